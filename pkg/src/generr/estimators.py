"""Singleton rate, abstention-aware missing mass, and Good-Turing checks.

The singleton rate counts training prompts that were answered (not
abstained) exactly once.  It estimates the missing mass: the probability
that a fresh draw answers a prompt never answered in training.  The
missing mass itself is computed analytically from the world, since the
simulator knows ``mu`` and ``alpha``; Monte Carlo only enters through
the concentration trials.

Counting uses exact integer arithmetic; only final rates are floats.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .prng import derive_seed, stream
from .world import (
    MAX_CELLS,
    TrainingSet,
    World,
    build_arbitrary_facts,
    draw_uniform_prompts,
    sample_training,
)

__all__ = [
    "SingletonReport",
    "GoodTuringReport",
    "ConcentrationReport",
    "singleton_rate",
    "unanswered_set",
    "missing_mass",
    "good_turing_classic",
    "mm_singleton_bound",
    "classic_gt_bound",
    "binomial_slack",
    "passes_with_slack",
    "MMConcentrationConfig",
    "verify_mm_concentration",
]


@dataclass(frozen=True)
class SingletonReport:
    singleton_count: int
    n: int
    rate: float
    singleton_prompts: frozenset[str]
    degenerate: bool  # true when n == 0 and the rate defaults to 0


@dataclass(frozen=True)
class GoodTuringReport:
    singleton_count: int
    n: int
    rate: float
    degenerate: bool


@dataclass(frozen=True)
class ConcentrationReport:
    """Outcome of repeated trials against a concentration inequality.

    ``passed`` follows the binomial-slack rule: with T trials and failure
    budget gamma, the inequality is accepted iff
    ``violations <= T * gamma + 3 * sqrt(T * gamma * (1 - gamma))``.
    ``vacuous`` flags bounds so wide they can never be violated.
    """

    trials: int
    gamma: float
    bound: float
    violations: int
    empirical_failure_rate: float
    passed: bool
    vacuous: bool
    max_abs_deviation: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "trials": self.trials,
                "gamma": self.gamma,
                "bound": self.bound,
                "violations": self.violations,
                "empirical_failure_rate": self.empirical_failure_rate,
                "pass": self.passed,
                "vacuous": self.vacuous,
                "max_abs_deviation": self.max_abs_deviation,
            },
            sort_keys=True,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["trials", "gamma", "bound", "violations", "pass"])
        writer.writerow(
            [self.trials, repr(self.gamma), repr(self.bound), self.violations, self.passed]
        )
        return buf.getvalue()


def _answered_mask(training: TrainingSet, abstain_token: str) -> np.ndarray:
    world = training.world
    abstain_pos = np.array(
        [
            resp.index(abstain_token) if abstain_token in resp else -1
            for resp in world.responses
        ],
        dtype=np.int64,
    )
    return training.response_idx != abstain_pos[training.prompt_idx]


def singleton_rate(training: TrainingSet, abstain_token: str) -> SingletonReport:
    """Fraction of training pairs whose prompt is answered exactly once.

    A prompt counts if exactly one pair has that prompt with a
    non-abstain response; pairs where it abstains are ignored entirely.
    """
    n = training.n
    if n == 0:
        return SingletonReport(0, 0, 0.0, frozenset(), degenerate=True)
    answered = training.prompt_idx[_answered_mask(training, abstain_token)]
    uniq, counts = np.unique(answered, return_counts=True)
    singles = uniq[counts == 1]
    ids = frozenset(training.world.prompt_ids[int(c)] for c in singles)
    count = int(singles.size)
    return SingletonReport(count, n, count / n, ids, degenerate=False)


def unanswered_set(training: TrainingSet, world: World) -> frozenset[str]:
    """Prompts that never received a non-abstain response in training."""
    answered = training.prompt_idx[_answered_mask(training, world.abstain_token)]
    seen = set(np.unique(answered).tolist())
    return frozenset(pid for c, pid in enumerate(world.prompt_ids) if c not in seen)


def missing_mass(world: World, training: TrainingSet) -> float:
    """Exact probability that a fresh draw answers an unanswered prompt.

    Equals ``sum over unanswered c of mu(c) * alpha(c)``, the chance that
    ``(c, r)`` drawn from the data distribution has ``c`` unanswered in
    training and ``r`` not the abstain token.
    """
    answered = training.prompt_idx[_answered_mask(training, world.abstain_token)]
    seen = np.zeros(world.n_prompts, dtype=bool)
    seen[np.unique(answered)] = True
    return math.fsum(
        float(world.mu[c] * world.alpha[c])
        for c in range(world.n_prompts)
        if not seen[c]
    )


def good_turing_classic(samples: Sequence[Hashable]) -> GoodTuringReport:
    """Classic missing-mass estimate: the fraction of samples seen once."""
    n = len(samples)
    if n == 0:
        return GoodTuringReport(0, 0, 0.0, degenerate=True)
    counts: dict[Hashable, int] = {}
    for s in samples:
        counts[s] = counts.get(s, 0) + 1
    singles = sum(1 for v in counts.values() if v == 1)
    return GoodTuringReport(singles, n, singles / n, degenerate=False)


def mm_singleton_bound(n: int, gamma: float) -> float:
    """High-probability bound on |missing mass - singleton rate|."""
    return 4.42 * math.sqrt(math.log(5.0 / gamma) / n)


def classic_gt_bound(n: int, gamma: float) -> float:
    """High-probability bound on |missing mass - classic Good-Turing|."""
    return 1.0 / n + 2.42 * math.sqrt(math.log(4.0 / gamma) / n)


def binomial_slack(trials: int, gamma: float) -> float:
    """Three-sigma allowance on the number of violations in T trials."""
    return trials * gamma + 3.0 * math.sqrt(trials * gamma * (1.0 - gamma))


def passes_with_slack(violations: int, trials: int, gamma: float) -> bool:
    return violations <= binomial_slack(trials, gamma)


@dataclass(frozen=True)
class MMConcentrationConfig:
    """Trial settings for the singleton-vs-missing-mass concentration check.

    Worlds are symmetric: uniform prompt distribution, one constant
    ``alpha``, and a fixed response-set size.  When the dense cell cap
    allows, each trial builds a full world (fresh answers) and training
    set; above the cap an exact grouped engine computes the same two
    statistics from sufficient counts.  Both engines consume identical
    random blocks, so results agree trial-for-trial.
    """

    n_prompts: int
    n_training: int
    gamma: float
    trials: int
    seed: int
    alpha: float = 1.0
    response_set_size: int = 366

    def __post_init__(self):
        if self.trials < 100:
            raise ValueError("trials must be at least 100")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.n_prompts < 1 or self.n_training < 1:
            raise ValueError("n_prompts and n_training must be positive")


def grouped_answered_counts(
    rng: np.random.Generator, n_prompts: int, alpha: float, n: int
) -> tuple[int, int]:
    """(distinct answered prompts, singleton prompts) for one trial.

    Mirrors the random blocks of :func:`generr.world.sample_training` on
    a uniform world: one block for prompts, one for the answer/abstain
    decision.  These counts depend only on which prompts get answered,
    never on the realized answers, so answer draws are not needed here.
    """
    idx = draw_uniform_prompts(rng, n_prompts, n)
    u = rng.random(n)
    answered = idx[u < alpha]
    if n_prompts * 8 <= 1 << 29:  # scatter-count beats sorting when it fits
        counts = np.bincount(answered, minlength=n_prompts)
        return int(np.count_nonzero(counts)), int(np.count_nonzero(counts == 1))
    uniq, counts = np.unique(answered, return_counts=True)
    return int(uniq.size), int((counts == 1).sum())


def _mm_trial(config: MMConcentrationConfig, trial: int, dense: bool) -> tuple[float, float]:
    trial_seed = derive_seed(config.seed, trial)
    if dense:
        world = build_arbitrary_facts(
            config.n_prompts, config.response_set_size, config.alpha, seed=trial_seed
        )
        training = sample_training(world, config.n_training, trial_seed)
        mm = missing_mass(world, training)
        sr = singleton_rate(training, world.abstain_token).rate
        return mm, sr
    rng = stream(trial_seed, 1)
    distinct, singles = grouped_answered_counts(
        rng, config.n_prompts, config.alpha, config.n_training
    )
    mm = config.alpha * ((config.n_prompts - distinct) / config.n_prompts)
    return mm, singles / config.n_training


def verify_mm_concentration(config: MMConcentrationConfig) -> ConcentrationReport:
    """Count trials where |missing mass - singleton rate| exceeds its bound."""
    bound = mm_singleton_bound(config.n_training, config.gamma)
    dense = config.n_prompts * config.response_set_size <= MAX_CELLS
    violations = 0
    worst = 0.0
    for trial in range(config.trials):
        mm, sr = _mm_trial(config, trial, dense)
        dev = abs(mm - sr)
        worst = max(worst, dev)
        if dev > bound:
            violations += 1
    return ConcentrationReport(
        trials=config.trials,
        gamma=config.gamma,
        bound=bound,
        violations=violations,
        empirical_failure_rate=violations / config.trials,
        passed=passes_with_slack(violations, config.trials, config.gamma),
        vacuous=bound >= 1.0,
        max_abs_deviation=worst,
    )
