"""Bound machinery against brute-force oracles on enumerable instances."""

from __future__ import annotations

import math

import numpy as np
import pytest

from generr.learners import uniform_model
from generr.prng import derive_seed
from generr.reduction import (
    IIVMixture,
    SupportError,
    check_main_bound,
    cross_entropy,
    default_threshold,
    delta_calibration,
    delta_derivative_check,
    error_rate,
    iiv_misclassification,
    multiple_choice_bound,
    rescaled_model,
)
from generr.suites import (
    random_bound_instance,
    random_multiple_choice_instance,
    random_positive_instance,
)
from generr.world import (
    ConditionalModel,
    Partition,
    build_arbitrary_facts,
    training_distribution,
    truth_partition,
)


# Brute-force oracles: explicit loops over every (prompt, response) cell,
# written independently of the library's summation strategy.


def oracle_error_rate(model, partition, mu):
    total = 0.0
    for c in range(partition.n_prompts):
        for r in partition.error_idx[c]:
            total += float(mu[c]) * float(model.probs[c][r])
    return total


def oracle_cerr(model, p, partition, mu, threshold):
    total = 0.0
    for c in range(partition.n_prompts):
        for r in range(partition.n_responses[c]):
            predicted_valid = float(model.probs[c][r]) > threshold
            actually_valid = r in partition.valid_idx[c]
            if predicted_valid == actually_valid:
                continue
            if actually_valid:
                total += float(mu[c]) * float(p.probs[c][r]) / 2.0
            else:
                total += float(mu[c]) / (2.0 * len(partition.error_idx[c]))
    return total


def oracle_delta(model, p, mu, threshold):
    total = 0.0
    for c in range(model.n_prompts):
        for r in range(model.probs[c].size):
            if float(model.probs[c][r]) > threshold:
                total += float(mu[c]) * (float(model.probs[c][r]) - float(p.probs[c][r]))
    return abs(total)


def oracle_cross_entropy(model, p, mu):
    total = 0.0
    for c in range(p.n_prompts):
        for r in range(p.probs[c].size):
            mass = float(mu[c]) * float(p.probs[c][r])
            if mass > 0.0:
                total += mass * -math.log(float(model.probs[c][r]))
    return total


def test_error_rate_boundary_models():
    w = build_arbitrary_facts(5, 6, alpha=0.5, seed=1)
    part = truth_partition(w)
    p = training_distribution(w)
    assert error_rate(p, part, w.mu) == 0.0
    rows = []
    for c in range(5):
        row = np.zeros(6)
        row[part.error_idx[c][0]] = 1.0
        rows.append(row)
    all_error = ConditionalModel(probs=tuple(rows))
    assert error_rate(all_error, part, w.mu) == 1.0


def test_error_rate_matches_oracle_on_random_instances():
    for i in range(60):
        p, model, partition, mu = random_bound_instance(derive_seed(5, i))
        assert math.isclose(
            error_rate(model, partition, mu),
            oracle_error_rate(model, partition, mu),
            abs_tol=1e-12,
        )


def test_uniform_model_cerr_is_half_on_birthday_world():
    w = build_arbitrary_facts(8, 366, alpha=1.0, seed=3)
    part = truth_partition(w)
    p = training_distribution(w)
    mixture = IIVMixture(p=p, partition=part, mu=w.mu)
    um = uniform_model(w)
    # 1/366 <= 1/364 classifies everything as error: all valid mass is missed
    assert iiv_misclassification(um, mixture) == pytest.approx(0.5, abs=1e-12)


def test_cerr_matches_oracle_on_random_instances():
    for i in range(60):
        p, model, partition, mu = random_bound_instance(derive_seed(7, i))
        mixture = IIVMixture(p=p, partition=partition, mu=mu)
        threshold = default_threshold(partition, mu)
        assert math.isclose(
            iiv_misclassification(model, mixture, threshold),
            oracle_cerr(model, p, partition, mu, threshold),
            abs_tol=1e-12,
        )


def test_delta_uniform_and_identical_models():
    w = build_arbitrary_facts(6, 366, alpha=1.0, seed=4)
    part = truth_partition(w)
    p = training_distribution(w)
    threshold = default_threshold(part, w.mu)
    assert delta_calibration(uniform_model(w), p, w.mu, threshold) == 0.0
    for z in (0.0, 0.1, threshold, 0.5, 1.0):
        assert delta_calibration(p, p, w.mu, z) == 0.0


def test_delta_matches_oracle_on_random_instances():
    for i in range(60):
        p, model, partition, mu = random_bound_instance(derive_seed(11, i))
        threshold = default_threshold(partition, mu)
        assert math.isclose(
            delta_calibration(model, p, mu, threshold),
            oracle_delta(model, p, mu, threshold),
            abs_tol=1e-12,
        )


def test_delta_permutation_equivariance():
    rng = np.random.default_rng(0)
    for i in range(20):
        p, model, partition, mu = random_bound_instance(derive_seed(13, i))
        threshold = default_threshold(partition, mu)
        base = delta_calibration(model, p, mu, threshold)
        perms = [rng.permutation(n) for n in partition.n_responses]
        model2 = ConditionalModel(probs=tuple(row[perm] for row, perm in zip(model.probs, perms)))
        p2 = ConditionalModel(probs=tuple(row[perm] for row, perm in zip(p.probs, perms)))
        assert math.isclose(delta_calibration(model2, p2, mu, threshold), base, abs_tol=1e-12)


def test_main_bound_for_the_data_distribution_itself():
    w = build_arbitrary_facts(6, 5, alpha=0.8, seed=5)
    part = truth_partition(w)
    p = training_distribution(w)
    report = check_main_bound(p, p, part, w.mu)
    assert report.err == 0.0
    assert report.rhs <= 0.0
    assert report.holds


def test_main_bound_birthday_ratio_term():
    w = build_arbitrary_facts(6, 366, alpha=1.0, seed=6)
    part = truth_partition(w)
    p = training_distribution(w)
    report = check_main_bound(p, uniform_model(w), part, w.mu)
    assert report.ratio_term == 2 / 364
    assert report.holds


def test_main_bound_rejects_noisy_training_distribution():
    w = build_arbitrary_facts(4, 5, alpha=1.0, seed=7)
    part = truth_partition(w)
    noisy_rows = []
    for c in range(4):
        row = np.full(5, 0.0)
        row[int(w.answer_idx[c])] = 0.9
        row[part.error_idx[c][0]] = 0.1
        noisy_rows.append(row)
    noisy = ConditionalModel(probs=tuple(noisy_rows))
    with pytest.raises(ValueError, match="noiseless"):
        check_main_bound(noisy, uniform_model(w), part, w.mu)


def test_main_bound_random_instances_hold():
    for i in range(300):
        p, model, partition, mu = random_bound_instance(derive_seed(17, i))
        report = check_main_bound(p, model, partition, mu)
        assert report.holds, f"instance {i}: err={report.err} rhs={report.rhs}"
        # the same inequality read as a cap on misclassification
        assert 2 * report.cerr <= report.err + report.ratio_term + report.delta + 1e-9


def test_cross_entropy_trivial_values():
    w = build_arbitrary_facts(3, 4, alpha=1.0, seed=8)
    p = training_distribution(w)
    assert cross_entropy(p, p, w.mu) == 0.0  # deterministic rows: -log 1
    um = uniform_model(w)
    assert cross_entropy(um, p, w.mu) == pytest.approx(math.log(4), abs=1e-12)


def test_cross_entropy_matches_oracle():
    for i in range(40):
        model, p, mu, _ = random_positive_instance(derive_seed(19, i))
        assert math.isclose(
            cross_entropy(model, p, mu), oracle_cross_entropy(model, p, mu), abs_tol=1e-10
        )


def test_cross_entropy_support_violation_names_cell():
    mu = np.array([1.0])
    p = ConditionalModel(probs=(np.array([0.5, 0.5]),))
    model = ConditionalModel(probs=(np.array([1.0, 0.0]),))
    with pytest.raises(SupportError) as exc:
        cross_entropy(model, p, mu)
    assert exc.value.prompt_index == 0
    assert exc.value.response_index == 1


def test_rescaled_model_identity_cases():
    model, _, _, threshold = random_positive_instance(derive_seed(23, 0))
    same = rescaled_model(model, 1.0, threshold)
    for a, b in zip(same.probs, model.probs):
        assert np.array_equal(a, b)
    # nothing above threshold: scaling is a no-op for any s
    low = ConditionalModel(probs=(np.array([0.5, 0.5]),))
    for s in (0.5, 2.0, 7.0):
        out = rescaled_model(low, s, threshold=0.9)
        assert np.array_equal(out.probs[0], low.probs[0])
    with pytest.raises(ValueError):
        rescaled_model(low, 0.0, 0.5)


def test_rescaled_model_renormalizes():
    for i in range(25):
        model, _, _, threshold = random_positive_instance(derive_seed(29, i))
        out = rescaled_model(model, 3.7, threshold)
        for row in out.probs:
            assert math.isclose(float(np.sum(row)), 1.0, abs_tol=1e-12)


def test_delta_derivative_trivial_cases():
    w = build_arbitrary_facts(5, 4, alpha=0.5, seed=9)
    p = training_distribution(w)
    um = uniform_model(w)
    threshold = 1.0 / 2  # truth partition has |E_c| = 2
    rep = delta_derivative_check(um, p, w.mu, threshold)
    assert rep.delta == 0.0 and rep.agree
    # a model equal to the data distribution is stationary too, but needs
    # full support for the loss; blend it slightly with uniform
    blended = ConditionalModel(
        probs=tuple(0.9 * a + 0.1 * b for a, b in zip(p.probs, um.probs))
    )
    rep2 = delta_derivative_check(blended, blended, w.mu, threshold)
    assert rep2.delta == 0.0 and rep2.agree


def test_delta_derivative_random_instances():
    for i in range(100):
        model, p, mu, threshold = random_positive_instance(derive_seed(31, i))
        rep = delta_derivative_check(model, p, mu, threshold)
        assert rep.agree, f"instance {i}: delta={rep.delta} fd={rep.finite_difference}"


def test_multiple_choice_rejects_wide_valid_sets():
    w = build_arbitrary_facts(4, 5, alpha=1.0, seed=10)
    part = truth_partition(w)  # valid sets have two entries
    p = training_distribution(w)
    with pytest.raises(ValueError, match="exactly one valid"):
        multiple_choice_bound(uniform_model(w), p, part, w.mu)


def test_multiple_choice_perfect_model():
    model, p, partition, mu = random_multiple_choice_instance(derive_seed(37, 0))
    report = multiple_choice_bound(p, p, partition, mu)
    assert report.err == 0.0
    assert report.holds
    assert report.expectation_identity_gap >= -1e-9


def test_multiple_choice_two_choice_world():
    # C = 2: some threshold must witness err >= cerr(t)
    partition = Partition(valid_idx=((0,), (1,)), error_idx=((1,), (0,)), n_responses=(2, 2))
    p = ConditionalModel(probs=(np.array([1.0, 0.0]), np.array([0.0, 1.0])))
    model = ConditionalModel(probs=(np.array([0.6, 0.4]), np.array([0.7, 0.3])))
    mu = np.array([0.5, 0.5])
    report = multiple_choice_bound(model, p, partition, mu)
    assert report.n_choices == 2
    assert report.holds
    assert report.err >= report.cerr_at_best_t - 1e-9


def test_multiple_choice_random_instances():
    for i in range(200):
        model, p, partition, mu = random_multiple_choice_instance(derive_seed(41, i))
        report = multiple_choice_bound(model, p, partition, mu)
        assert report.holds, f"instance {i}"
        assert report.expectation_identity_gap >= -1e-9
