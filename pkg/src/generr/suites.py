"""Randomized verification suites behind the service and CLI.

Each suite runs seeded instances or trials of one inequality, returns the
per-instance rows plus a verdict, and renders a deterministic CSV.  Rows
are keyed by derived per-instance seeds, so reruns with one root seed
reproduce the artifacts byte for byte.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .estimators import (
    MMConcentrationConfig,
    classic_gt_bound,
    passes_with_slack,
    verify_mm_concentration,
)
from .grading import GraderConfig, optimal_policy, random_beliefs
from .learners import (
    TrialConfig,
    classifier_misclassification,
    crypto_world,
    family_opt,
    full_context_classifier,
    max_delta_over_thresholds,
    run_arbitrary_facts_trials,
    summarize_trials,
    trigram_constrained_model,
    trigram_demo,
)
from .prng import derive_seed, stream
from .reduction import (
    IIVMixture,
    TOLERANCE,
    check_main_bound,
    default_threshold,
    delta_calibration,
    delta_derivative_check,
    error_rate,
    iiv_misclassification,
    multiple_choice_bound,
)
from .world import ConditionalModel, Partition, truth_partition, training_distribution

__all__ = [
    "SuiteResult",
    "random_bound_instance",
    "random_positive_instance",
    "random_multiple_choice_instance",
    "main_bound_suite",
    "derivative_suite",
    "multiple_choice_suite",
    "good_turing_suite",
    "good_turing_classic_suite",
    "misaligned_suite",
    "crypto_suite",
    "trigram_suite",
    "arbitrary_facts_suite",
]


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    violations: int
    total: int
    summary: dict
    rows: list[dict] = field(repr=False)
    columns: tuple[str, ...] = field(repr=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_render(row[col]) for col in self.columns])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "violations": self.violations,
            "total": self.total,
            "summary": self.summary,
        }


def _render(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _random_simplex(rng: np.random.Generator, size: int, concentration: float = 1.0):
    return rng.dirichlet(np.full(size, concentration))


def random_bound_instance(seed: int):
    """Random (p, model, partition, mu) with a noiseless p.

    Sizes stay small enough for exhaustive sums.  Some instances zero out
    a prompt's weight to exercise the support-only min/max rules, and
    some sparsify the model with exact zero cells.
    """
    rng = stream(seed, 0)
    n_prompts = int(rng.integers(1, 21))
    sizes = rng.integers(2, 11, size=n_prompts)

    mu = _random_simplex(rng, n_prompts)
    if n_prompts > 1 and rng.random() < 0.2:
        drop = int(rng.integers(0, n_prompts))
        mu[drop] = 0.0
        mu = mu / mu.sum()

    valid, error, p_rows, model_rows = [], [], [], []
    for c in range(n_prompts):
        m = int(sizes[c])
        v_size = int(rng.integers(1, m))
        picks = rng.permutation(m)
        v = tuple(sorted(int(x) for x in picks[:v_size]))
        e = tuple(sorted(int(x) for x in picks[v_size:]))
        valid.append(v)
        error.append(e)

        p_row = np.zeros(m)
        p_row[list(v)] = _random_simplex(rng, v_size, concentration=0.7)
        p_rows.append(p_row)

        concentration = 0.3 if rng.random() < 0.5 else 1.5
        row = _random_simplex(rng, m, concentration)
        if rng.random() < 0.3:  # exact zeros stress the strict threshold
            keep = rng.random(m) < 0.7
            keep[int(rng.integers(0, m))] = True
            row = np.where(keep, row, 0.0)
            row = row / row.sum()
        model_rows.append(row)

    partition = Partition(
        valid_idx=tuple(valid), error_idx=tuple(error), n_responses=tuple(int(s) for s in sizes)
    )
    p = ConditionalModel(probs=tuple(p_rows))
    model = ConditionalModel(probs=tuple(model_rows))
    return p, model, partition, mu


def random_positive_instance(seed: int):
    """Random (model, p, mu, threshold) with a strictly positive model.

    Used by the derivative identity, which needs finite cross-entropy for
    scale factors near 1.
    """
    rng = stream(seed, 0)
    n_prompts = int(rng.integers(1, 13))
    sizes = rng.integers(2, 9, size=n_prompts)
    mu = _random_simplex(rng, n_prompts)
    p_rows, model_rows = [], []
    for c in range(n_prompts):
        m = int(sizes[c])
        p_rows.append(_random_simplex(rng, m))
        row = _random_simplex(rng, m)
        model_rows.append(0.99 * row + 0.01 / m)  # bound cells away from zero
    threshold = float(rng.random())
    return (
        ConditionalModel(probs=tuple(model_rows)),
        ConditionalModel(probs=tuple(p_rows)),
        mu,
        threshold,
    )


def random_multiple_choice_instance(seed: int):
    """Random universe with exactly one valid response per prompt."""
    rng = stream(seed, 0)
    n_prompts = int(rng.integers(1, 21))
    sizes = rng.integers(2, 11, size=n_prompts)
    mu = _random_simplex(rng, n_prompts)
    valid, error, p_rows, model_rows = [], [], [], []
    for c in range(n_prompts):
        m = int(sizes[c])
        a = int(rng.integers(0, m))
        valid.append((a,))
        error.append(tuple(r for r in range(m) if r != a))
        p_row = np.zeros(m)
        p_row[a] = 1.0
        p_rows.append(p_row)
        concentration = 0.3 if rng.random() < 0.5 else 1.5
        model_rows.append(_random_simplex(rng, m, concentration))
    partition = Partition(
        valid_idx=tuple(valid), error_idx=tuple(error), n_responses=tuple(int(s) for s in sizes)
    )
    return ConditionalModel(probs=tuple(model_rows)), ConditionalModel(probs=tuple(p_rows)), partition, mu


def main_bound_suite(instances: int, seed: int) -> SuiteResult:
    """The central inequality on randomized instances; zero violations expected."""
    rows = []
    violations = 0
    for i in range(instances):
        instance_seed = derive_seed(seed, i)
        p, model, partition, mu = random_bound_instance(instance_seed)
        report = check_main_bound(p, model, partition, mu)
        if not report.holds:
            violations += 1
        rows.append(
            {
                "seed": instance_seed,
                "err": report.err,
                "cerr": report.cerr,
                "delta": report.delta,
                "ratio_term": report.ratio_term,
                "holds": report.holds,
            }
        )
    return SuiteResult(
        name="main-bound",
        passed=violations == 0,
        violations=violations,
        total=instances,
        summary={"instances": instances, "violations": violations},
        rows=rows,
        columns=("seed", "err", "cerr", "delta", "ratio_term", "holds"),
    )


def derivative_suite(instances: int, seed: int, tolerance: float = 1e-6) -> SuiteResult:
    """Calibration gap versus loss derivative under positive-set rescaling."""
    rows = []
    violations = 0
    worst = 0.0
    for i in range(instances):
        instance_seed = derive_seed(seed, i)
        model, p, mu, threshold = random_positive_instance(instance_seed)
        report = delta_derivative_check(model, p, mu, threshold, tolerance=tolerance)
        gap = abs(report.delta - report.finite_difference)
        worst = max(worst, gap)
        if not report.agree:
            violations += 1
        rows.append(
            {
                "seed": instance_seed,
                "threshold": threshold,
                "delta": report.delta,
                "finite_difference": report.finite_difference,
                "abs_gap": gap,
                "agree": report.agree,
            }
        )
    return SuiteResult(
        name="delta-derivative",
        passed=violations == 0,
        violations=violations,
        total=instances,
        summary={"instances": instances, "violations": violations, "max_abs_gap": worst},
        rows=rows,
        columns=("seed", "threshold", "delta", "finite_difference", "abs_gap", "agree"),
    )


def multiple_choice_suite(instances: int, seed: int) -> SuiteResult:
    """Threshold-sweep bound on random single-valid-response universes."""
    rows = []
    violations = 0
    worst_gap = math.inf
    for i in range(instances):
        instance_seed = derive_seed(seed, i)
        model, p, partition, mu = random_multiple_choice_instance(instance_seed)
        report = multiple_choice_bound(model, p, partition, mu)
        ok = report.holds and report.expectation_identity_gap >= -TOLERANCE
        if not ok:
            violations += 1
        worst_gap = min(worst_gap, report.expectation_identity_gap)
        rows.append(
            {
                "seed": instance_seed,
                "err": report.err,
                "n_choices": report.n_choices,
                "best_t": report.best_t,
                "cerr_at_best_t": report.cerr_at_best_t,
                "avg_cerr_uniform_t": report.avg_cerr_uniform_t,
                "expectation_identity_gap": report.expectation_identity_gap,
                "holds": ok,
            }
        )
    return SuiteResult(
        name="multiple-choice",
        passed=violations == 0,
        violations=violations,
        total=instances,
        summary={
            "instances": instances,
            "violations": violations,
            "min_expectation_identity_gap": worst_gap,
        },
        rows=rows,
        columns=(
            "seed",
            "err",
            "n_choices",
            "best_t",
            "cerr_at_best_t",
            "avg_cerr_uniform_t",
            "expectation_identity_gap",
            "holds",
        ),
    )


def good_turing_suite(
    trials: int,
    n_training: int,
    gamma: float,
    seed: int,
    n_prompts: int = 5_000_000,
    alpha: float = 0.9,
    response_set_size: int = 366,
) -> SuiteResult:
    """Abstention-aware concentration of the singleton rate around missing mass."""
    config = MMConcentrationConfig(
        n_prompts=n_prompts,
        n_training=n_training,
        gamma=gamma,
        trials=trials,
        seed=seed,
        alpha=alpha,
        response_set_size=response_set_size,
    )
    report = verify_mm_concentration(config)
    row = {
        "trials": report.trials,
        "gamma": report.gamma,
        "bound": report.bound,
        "violations": report.violations,
        "pass": report.passed,
    }
    return SuiteResult(
        name="good-turing-abstention",
        passed=report.passed,
        violations=report.violations,
        total=report.trials,
        summary={
            "bound": report.bound,
            "violations": report.violations,
            "empirical_failure_rate": report.empirical_failure_rate,
            "max_abs_deviation": report.max_abs_deviation,
            "vacuous": report.vacuous,
            "n_prompts": n_prompts,
            "alpha": alpha,
            "n_training": n_training,
        },
        rows=[row],
        columns=("trials", "gamma", "bound", "violations", "pass"),
    )


def good_turing_classic_suite(
    trials: int,
    n_samples: int,
    gamma: float,
    seed: int,
    zipf_exponent: float = 1.1,
    support_size: int = 10_000,
) -> SuiteResult:
    """Classic singleton estimate versus exact missing mass of a Zipf source."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    ranks = np.arange(1, support_size + 1, dtype=np.float64)
    probs = ranks ** -zipf_exponent
    probs /= probs.sum()
    cdf = np.cumsum(probs)
    bound = classic_gt_bound(n_samples, gamma)
    rows = []
    violations = 0
    worst = 0.0
    for trial in range(trials):
        rng = stream(derive_seed(seed, trial), 0)
        u = rng.random(n_samples)
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), support_size - 1)
        uniq, counts = np.unique(idx, return_counts=True)
        gt = int((counts == 1).sum()) / n_samples
        mm_exact = 1.0 - math.fsum(float(probs[i]) for i in uniq)
        dev = abs(mm_exact - gt)
        worst = max(worst, dev)
        violated = dev > bound
        if violated:
            violations += 1
        rows.append(
            {
                "trial": trial,
                "good_turing": gt,
                "missing_mass": mm_exact,
                "abs_deviation": dev,
                "bound": bound,
                "violated": violated,
            }
        )
    passed = passes_with_slack(violations, trials, gamma)
    return SuiteResult(
        name="good-turing-classic",
        passed=passed,
        violations=violations,
        total=trials,
        summary={
            "trials": trials,
            "violations": violations,
            "bound": bound,
            "max_abs_deviation": worst,
            "zipf_exponent": zipf_exponent,
            "support_size": support_size,
            "n_samples": n_samples,
        },
        rows=rows,
        columns=("trial", "good_turing", "missing_mass", "abs_deviation", "bound", "violated"),
    )


def misaligned_suite(trials: int, seed: int) -> SuiteResult:
    """Right/wrong grading: the optimal response is never an abstention."""
    profile = random_beliefs(seed, trials)
    report = optimal_policy(profile, GraderConfig.from_target(0))
    rows = []
    for decision, item in zip(report.decisions, profile.items):
        rows.append(
            {
                "item_id": decision.item_id,
                "n_candidates": len(item.probabilities),
                "best_confidence": decision.confidence,
                "answered": decision.answer,
            }
        )
    violations = report.n_abstained
    return SuiteResult(
        name="misaligned",
        passed=violations == 0,
        violations=violations,
        total=trials,
        summary={"trials": trials, "violations": violations},
        rows=rows,
        columns=("item_id", "n_candidates", "best_confidence", "answered"),
    )


def crypto_suite(message_count: int, seed: int, random_models: int = 50) -> SuiteResult:
    """Hardness floor on decryption prompts under an information-theoretic pad.

    The uniform baseline cannot be distinguished from chance, so its
    error rate must reach 1 - 2/(messages - 1); its calibration gap is
    zero at every attained threshold.  Random models are then probed for
    the contrapositive: any error rate below the floor must be paid for
    by classifier advantage or calibration gap.
    """
    world, baseline = crypto_world(message_count, seed)
    partition = truth_partition(world)
    p = training_distribution(world)
    mixture = IIVMixture(p=p, partition=partition, mu=world.mu)
    threshold = default_threshold(partition, world.mu)

    base_err = error_rate(baseline, partition, world.mu)
    base_delta = delta_calibration(baseline, p, world.mu, threshold)
    base_max_dz = max_delta_over_thresholds(baseline, p, world.mu)
    base_cerr = iiv_misclassification(baseline, mixture, threshold)
    beta_floor = 1.0 - 0.0 - 2.0 / (message_count - 1) - base_delta
    rows = [
        {
            "model": "uniform-baseline",
            "err": base_err,
            "cerr": base_cerr,
            "delta": base_delta,
            "floor": beta_floor,
            "holds": base_err >= beta_floor - TOLERANCE,
        }
    ]
    violations = 0 if rows[0]["holds"] and base_max_dz == 0.0 else 1

    for i in range(random_models):
        rng = stream(derive_seed(seed, i + 1), 0)
        model = ConditionalModel(
            probs=tuple(
                rng.dirichlet(np.ones(len(resp))) for resp in world.responses
            )
        )
        err = error_rate(model, partition, world.mu)
        cerr = iiv_misclassification(model, mixture, threshold)
        delta = delta_calibration(model, p, world.mu, threshold)
        beta_implied = 1.0 - 2.0 * cerr
        floor = 1.0 - beta_implied - 2.0 / (message_count - 1) - delta
        holds = err >= floor - TOLERANCE
        if not holds:
            violations += 1
        rows.append(
            {
                "model": f"random-{i}",
                "err": err,
                "cerr": cerr,
                "delta": delta,
                "floor": floor,
                "holds": holds,
            }
        )
    return SuiteResult(
        name="crypto",
        passed=violations == 0,
        violations=violations,
        total=len(rows),
        summary={
            "message_count": message_count,
            "baseline_err": base_err,
            "baseline_delta": base_delta,
            "baseline_max_abs_delta_z": base_max_dz,
            "floor": beta_floor,
            "violations": violations,
        },
        rows=rows,
        columns=("model", "err", "cerr", "delta", "floor", "holds"),
    )


def trigram_suite(weight_grid: int = 21) -> SuiteResult:
    """Two-token-window demo: family optimum is exactly one half.

    Every model constrained to the shared window has error rate 1/2, the
    window-limited classifier family bottoms out at misclassification
    1/2, and a full-context classifier separates the mixture perfectly.
    """
    demo = trigram_demo()
    mixture = demo.mixture()
    opt, rates = family_opt(demo.family, mixture)
    full_ctx = classifier_misclassification(full_context_classifier, mixture)

    rows = []
    violations = 0
    if opt != 0.5:
        violations += 1
    if full_ctx != 0.0:
        violations += 1
    for name, rate in sorted(rates.items()):
        rows.append({"subject": f"classifier:{name}", "value": rate, "holds": True})
    rows.append({"subject": "family-opt", "value": opt, "holds": opt == 0.5})
    rows.append({"subject": "full-context-cerr", "value": full_ctx, "holds": full_ctx == 0.0})

    n_choices = 2
    factor = 2.0 * (1.0 - 1.0 / n_choices)
    for i in range(weight_grid):
        w = i / (weight_grid - 1)
        model = trigram_constrained_model(w)
        err = error_rate(model, demo.partition, demo.mu)
        holds = err >= factor * opt - TOLERANCE and err >= 0.5 - TOLERANCE
        if not holds:
            violations += 1
        rows.append({"subject": f"model:w={w!r}", "value": err, "holds": holds})

    return SuiteResult(
        name="trigram",
        passed=violations == 0,
        violations=violations,
        total=len(rows),
        summary={"family_opt": opt, "full_context_cerr": full_ctx, "violations": violations},
        rows=rows,
        columns=("subject", "value", "holds"),
    )


def arbitrary_facts_suite(
    config: TrialConfig, learner, gamma: float = 0.01
) -> tuple[SuiteResult, list]:
    """Both singleton-rate bounds over repeated fresh worlds for one learner."""
    outcomes = run_arbitrary_facts_trials(config, learner)
    summary = summarize_trials(outcomes, gamma=gamma)
    rows = [
        {
            "trial": o.trial,
            "seed": o.seed,
            "learner": o.learner,
            "sr": o.sr,
            "err": o.err,
            "delta": o.delta,
            "missing_mass": o.missing_mass,
            "max_abs_delta_z": o.max_abs_delta_z,
            "lower_bound_rhs": o.lower_bound_rhs,
            "upper_bound_rhs": o.upper_bound_rhs,
            "lower_holds": o.lower_holds,
            "upper_holds": o.upper_holds,
            "lower_vacuous": o.lower_vacuous,
            "upper_vacuous": o.upper_vacuous,
        }
        for o in outcomes
    ]
    result = SuiteResult(
        name="arbitrary-facts",
        passed=summary.passed,
        violations=summary.lower_violations + summary.upper_violations,
        total=config.trials,
        summary=summary.to_dict(),
        rows=rows,
        columns=(
            "trial",
            "seed",
            "learner",
            "sr",
            "err",
            "delta",
            "missing_mass",
            "max_abs_delta_z",
            "lower_bound_rhs",
            "upper_bound_rhs",
            "lower_holds",
            "upper_holds",
            "lower_vacuous",
            "upper_vacuous",
        ),
    )
    return result, outcomes
