"""World construction, partitions, sampling, and serialization."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from generr.world import (
    MAX_CELLS,
    ConditionalModel,
    TrainingSet,
    World,
    build_arbitrary_facts,
    sample_training,
    training_distribution,
    truth_partition,
)


def test_minimal_world_forced_answer():
    w = build_arbitrary_facts(1, 2, alpha=1.0, seed=0)
    assert w.prompt_ids == ("c0",)
    assert w.responses[0] == ("r0", "IDK")
    assert w.answer_id(0) == "r0"  # only one candidate exists


def test_birthday_world_truth_partition_sizes():
    w = build_arbitrary_facts(4, 366, alpha=1.0, seed=5)
    part = truth_partition(w)
    for c in range(4):
        assert len(part.valid_idx[c]) == 2
        assert len(part.error_idx[c]) == 364


def test_same_seed_identical_worlds():
    a = build_arbitrary_facts(50, 7, alpha=0.4, seed=99)
    b = build_arbitrary_facts(50, 7, alpha=0.4, seed=99)
    assert a.prompt_ids == b.prompt_ids
    assert a.responses == b.responses
    assert np.array_equal(a.answer_idx, b.answer_idx)
    assert np.array_equal(a.mu, b.mu)
    assert np.array_equal(a.alpha, b.alpha)
    c = build_arbitrary_facts(50, 7, alpha=0.4, seed=100)
    assert not np.array_equal(a.answer_idx, c.answer_idx)


def test_build_rejections():
    with pytest.raises(ValueError):
        build_arbitrary_facts(0, 5, alpha=1.0, seed=0)
    with pytest.raises(ValueError):
        build_arbitrary_facts(3, 1, alpha=1.0, seed=0)
    with pytest.raises(ValueError):
        build_arbitrary_facts(3, 5, alpha=1.5, seed=0)
    with pytest.raises(ValueError, match="cap"):
        build_arbitrary_facts(MAX_CELLS, 2, alpha=1.0, seed=0)


def test_truth_partition_rejects_two_response_worlds():
    w = build_arbitrary_facts(2, 2, alpha=1.0, seed=1)
    with pytest.raises(ValueError, match="at least 3"):
        truth_partition(w)


def test_custom_mu_and_renormalization_policy():
    mu = [0.5, 0.25, 0.25]
    w = build_arbitrary_facts(3, 4, alpha=1.0, seed=2, mu=mu)
    assert np.allclose(w.mu, mu)

    drifted = np.array([0.5, 0.25, 0.25]) * (1 + 2e-10)  # inside renorm window
    w2 = build_arbitrary_facts(3, 4, alpha=1.0, seed=2, mu=drifted)
    assert math.isclose(float(np.sum(w2.mu)), 1.0, abs_tol=1e-12)

    with pytest.raises(ValueError, match="sums to"):
        build_arbitrary_facts(3, 4, alpha=1.0, seed=2, mu=[0.5, 0.25, 0.2])
    with pytest.raises(ValueError, match="negative"):
        build_arbitrary_facts(3, 4, alpha=1.0, seed=2, mu=[1.5, -0.25, -0.25])


def test_world_invariants_enforced():
    with pytest.raises(ValueError, match="abstain token"):
        World(
            prompt_ids=("c0",),
            mu=np.array([1.0]),
            responses=(("r0", "r1"),),
            abstain_token="IDK",
            alpha=np.array([1.0]),
            answer_idx=np.array([0]),
        )
    with pytest.raises(ValueError, match="may not be the abstain"):
        World(
            prompt_ids=("c0",),
            mu=np.array([1.0]),
            responses=(("r0", "IDK"),),
            abstain_token="IDK",
            alpha=np.array([1.0]),
            answer_idx=np.array([1]),
        )


def test_training_distribution_boundaries():
    w = build_arbitrary_facts(3, 5, alpha=[1.0, 0.0, 0.3], seed=7)
    p = training_distribution(w)
    a0, idk0 = int(w.answer_idx[0]), int(w.abstain_idx[0])
    assert p.prob(0, a0) == 1.0 and p.prob(0, idk0) == 0.0
    assert p.prob(1, int(w.abstain_idx[1])) == 1.0
    row2 = p.probs[2]
    assert row2[int(w.answer_idx[2])] == 0.3
    assert row2[int(w.abstain_idx[2])] == 0.7
    assert sorted(row2.tolist(), reverse=True)[2:] == [0.0, 0.0, 0.0]


def test_training_distribution_has_zero_error_mass():
    # composed with the truth partition, the data distribution never errs
    w = build_arbitrary_facts(10, 6, alpha=0.5, seed=3)
    p = training_distribution(w)
    part = truth_partition(w)
    for c in range(w.n_prompts):
        for r in part.error_idx[c]:
            assert p.prob(c, r) == 0.0


def test_sample_training_empty_and_forced():
    w = build_arbitrary_facts(1, 4, alpha=1.0, seed=11)
    empty = sample_training(w, 0, seed=1)
    assert empty.n == 0
    forced = sample_training(w, 25, seed=1)
    assert forced.n == 25
    assert np.all(forced.prompt_idx == 0)
    assert np.all(forced.response_idx == int(w.answer_idx[0]))


def test_sample_training_bit_reproducible():
    w = build_arbitrary_facts(100, 5, alpha=0.6, seed=13)
    a = sample_training(w, 10_000, seed=21)
    b = sample_training(w, 10_000, seed=21)
    assert np.array_equal(a.prompt_idx, b.prompt_idx)
    assert np.array_equal(a.response_idx, b.response_idx)
    c = sample_training(w, 10_000, seed=22)
    assert not np.array_equal(a.response_idx, c.response_idx)


def test_sampled_prompt_frequencies_match_mu():
    # binomial concentration: every prompt count within 3 standard errors
    mu = np.array([0.4, 0.3, 0.15, 0.1, 0.05])
    w = build_arbitrary_facts(5, 4, alpha=0.8, seed=17, mu=mu)
    n = 1_000_000
    t = sample_training(w, n, seed=29)
    counts = np.bincount(t.prompt_idx, minlength=5)
    for c in range(5):
        se = math.sqrt(n * mu[c] * (1 - mu[c]))
        assert abs(counts[c] - n * mu[c]) <= 3 * se


def test_training_set_validation():
    w = build_arbitrary_facts(3, 4, alpha=1.0, seed=1)
    with pytest.raises(ValueError, match="unknown prompt"):
        TrainingSet(world=w, prompt_idx=np.array([5]), response_idx=np.array([0]))
    with pytest.raises(ValueError, match="unknown response"):
        TrainingSet(world=w, prompt_idx=np.array([0]), response_idx=np.array([9]))


@given(
    n_prompts=st.integers(1, 30),
    size=st.integers(3, 8),
    alpha=st.floats(0.0, 1.0),
    n=st.integers(0, 500),
    seed=st.integers(0, 2**32),
)
@settings(max_examples=40, deadline=None)
def test_sampled_training_always_valid(n_prompts, size, alpha, n, seed):
    w = build_arbitrary_facts(n_prompts, size, alpha=alpha, seed=seed)
    t = sample_training(w, n, seed=seed + 1)
    assert t.n == n
    # reconstruction through validation must not raise
    TrainingSet(world=w, prompt_idx=t.prompt_idx.copy(), response_idx=t.response_idx.copy())


def test_world_json_round_trip():
    w = build_arbitrary_facts(6, 5, alpha=0.35, seed=41, mu=[0.3, 0.2, 0.2, 0.1, 0.1, 0.1])
    back = World.from_json(w.to_json())
    assert back.prompt_ids == w.prompt_ids
    assert back.responses == w.responses
    assert np.array_equal(back.answer_idx, w.answer_idx)
    assert np.array_equal(back.mu, w.mu)
    assert np.array_equal(back.alpha, w.alpha)


def test_training_json_round_trip():
    w = build_arbitrary_facts(6, 5, alpha=0.5, seed=43)
    t = sample_training(w, 200, seed=44)
    back = TrainingSet.from_json(t.to_json(), w)
    assert np.array_equal(back.prompt_idx, t.prompt_idx)
    assert np.array_equal(back.response_idx, t.response_idx)


def test_model_row_validation():
    with pytest.raises(ValueError, match="sums to"):
        ConditionalModel(probs=(np.array([0.5, 0.4]),))
    m = ConditionalModel(probs=(np.array([0.5, 0.5]), np.array([1.0])))
    assert m.n_prompts == 2


def test_arrays_are_frozen():
    w = build_arbitrary_facts(3, 4, alpha=1.0, seed=2)
    with pytest.raises(ValueError):
        w.mu[0] = 0.5
    with pytest.raises(ValueError):
        w.answer_idx[0] = 1
