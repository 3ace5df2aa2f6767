"""Concrete learners and scenario universes for the bound harnesses.

The calibrated memorizer reproduces the data distribution on prompts it
saw answered and spreads the answer mass uniformly over the candidate
responses (everything except the abstain token) on prompts it never saw
answered, keeping the abstain probability exactly right.  That
construction has a calibration gap of zero at every threshold: within
each unseen prompt the spread block is constant, so any threshold keeps
or drops the whole block, whose total mass matches the data
distribution's answer mass.

Trial harnesses run many independent worlds.  Configurations whose dense
tables would exceed the cell cap are handled by an exact grouped engine
for symmetric worlds (uniform prompt distribution, constant alpha and
response-set size): all reported statistics are group sums over seen and
unseen prompts, and they are invariant to the realized answer key, so
the grouped engine never needs to materialize it.  The two engines
consume identical random blocks and agree trial-for-trial at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .estimators import (
    binomial_slack,
    grouped_answered_counts,
    missing_mass,
    passes_with_slack,
    singleton_rate,
)
from .prng import derive_seed, stream
from .reduction import (
    IIVMixture,
    default_threshold,
    delta_calibration,
    error_rate,
)
from .world import (
    MAX_CELLS,
    ConditionalModel,
    Partition,
    TrainingSet,
    World,
    build_arbitrary_facts,
    sample_training,
    training_distribution,
    truth_partition,
)

__all__ = [
    "calibrated_memorizer",
    "memorizer_error",
    "uniform_model",
    "training_oracle_model",
    "attained_thresholds",
    "max_delta_over_thresholds",
    "LEARNERS",
    "TrialConfig",
    "TrialOutcome",
    "TrialSummary",
    "run_arbitrary_facts_trials",
    "summarize_trials",
    "ClassifierFamily",
    "TrigramDemo",
    "trigram_demo",
    "classifier_misclassification",
    "family_opt",
    "trigram_constrained_model",
    "crypto_world",
]


def _unseen_mask(world: World, training: TrainingSet) -> np.ndarray:
    answered = training.prompt_idx[
        training.response_idx != world.abstain_idx[training.prompt_idx]
    ]
    seen = np.zeros(world.n_prompts, dtype=bool)
    seen[np.unique(answered)] = True
    return ~seen


def calibrated_memorizer(world: World, training: TrainingSet) -> ConditionalModel:
    """Memorize answered prompts; spread answer mass uniformly elsewhere.

    Seen prompts reproduce the data distribution exactly.  Unseen prompts
    keep abstain probability ``1 - alpha`` and give each candidate
    response (including the true answer, which the learner cannot know)
    probability ``alpha / #candidates``.
    """
    unseen = _unseen_mask(world, training)
    rows = []
    for c in range(world.n_prompts):
        m = len(world.responses[c])
        idk = int(world.abstain_idx[c])
        a = float(world.alpha[c])
        row = np.zeros(m, dtype=np.float64)
        row[idk] = 1.0 - a
        if unseen[c]:
            spread = a / (m - 1)
            for r in range(m):
                if r != idk:
                    row[r] = spread
        else:
            row[int(world.answer_idx[c])] = a
        rows.append(row)
    return ConditionalModel(probs=tuple(rows))


def memorizer_error(world: World, training: TrainingSet) -> float:
    """Closed-form truth-partition error of the calibrated memorizer.

    Each unseen prompt contributes ``mu * alpha * (k - 1) / k`` where
    ``k`` counts candidate responses: of the k uniform shares of the
    answer mass, all but the one on the true answer land in the error
    set.  Must agree exactly with summing the memorizer's table.
    """
    unseen = _unseen_mask(world, training)
    return math.fsum(
        float(world.mu[c])
        * float(world.alpha[c])
        * (len(world.responses[c]) - 2)
        / (len(world.responses[c]) - 1)
        for c in range(world.n_prompts)
        if unseen[c]
    )


def uniform_model(world: World) -> ConditionalModel:
    """Uniform probability over each prompt's full response list."""
    return ConditionalModel(
        probs=tuple(
            np.full(len(resp), 1.0 / len(resp), dtype=np.float64)
            for resp in world.responses
        )
    )


def training_oracle_model(world: World, training: TrainingSet | None = None) -> ConditionalModel:
    """The data distribution itself, read off the world's answer key.

    No algorithm can produce this from training data alone on unseen
    prompts; it is included to probe where the singleton-rate lower
    bound's learner assumptions matter.
    """
    return training_distribution(world)


def attained_thresholds(model: ConditionalModel) -> list[float]:
    values = {0.0}
    for row in model.probs:
        values.update(float(v) for v in row)
    return sorted(values)


def max_delta_over_thresholds(
    model: ConditionalModel, p: ConditionalModel, mu, exact: bool = False
) -> float:
    """Largest calibration gap over every attained threshold."""
    return max(
        delta_calibration(model, p, mu, z, exact=exact) for z in attained_thresholds(model)
    )


@dataclass(frozen=True)
class TrialConfig:
    """Shared world settings for repeated bound trials."""

    n_prompts: int
    response_set_size: int
    alpha: float
    n_training: int
    trials: int
    seed: int
    engine: str = "auto"  # auto | dense | grouped

    def __post_init__(self):
        if self.trials < 100:
            raise ValueError("trials must be at least 100")
        if self.response_set_size < 3:
            raise ValueError(
                "response_set_size must be at least 3 so the truth partition has errors"
            )
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.n_prompts < 1 or self.n_training < 0:
            raise ValueError("n_prompts must be positive and n_training non-negative")
        if self.engine not in ("auto", "dense", "grouped"):
            raise ValueError("engine must be auto, dense, or grouped")

    @property
    def n_cells(self) -> int:
        return self.n_prompts * self.response_set_size


@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    seed: int
    learner: str
    sr: float
    err: float
    delta: float
    missing_mass: float
    max_abs_delta_z: float
    lower_bound_rhs: float
    upper_bound_rhs: float
    lower_holds: bool
    upper_holds: bool
    lower_vacuous: bool
    upper_vacuous: bool


@dataclass(frozen=True)
class TrialSummary:
    learner: str
    trials: int
    gamma: float
    lower_violations: int
    upper_violations: int
    lower_passed: bool
    upper_passed: bool
    passed: bool
    lower_vacuous_trials: int
    upper_vacuous_trials: int
    mean_sr: float
    mean_err: float
    max_abs_delta_z: float
    min_upper_margin: float
    min_lower_margin: float

    def to_dict(self) -> dict:
        return {
            "learner": self.learner,
            "trials": self.trials,
            "gamma": self.gamma,
            "allowed_violations": binomial_slack(self.trials, self.gamma),
            "lower_violations": self.lower_violations,
            "upper_violations": self.upper_violations,
            "lower_passed": self.lower_passed,
            "upper_passed": self.upper_passed,
            "passed": self.passed,
            "lower_vacuous_trials": self.lower_vacuous_trials,
            "upper_vacuous_trials": self.upper_vacuous_trials,
            "mean_sr": self.mean_sr,
            "mean_err": self.mean_err,
            "max_abs_delta_z": self.max_abs_delta_z,
            "min_upper_margin": self.min_upper_margin,
            "min_lower_margin": self.min_lower_margin,
        }


def _bound_terms(config: TrialConfig) -> tuple[int, int, float, float]:
    """(min|E_c|, max|E_c|, lower statistical term, upper statistical term)."""
    e_size = config.response_set_size - 2
    n = config.n_training
    stat_lower = (35.0 + 6.0 * math.log(n)) / math.sqrt(n) if n > 0 else math.inf
    stat_upper = 13.0 / math.sqrt(n) if n > 0 else math.inf
    return e_size, e_size, stat_lower, stat_upper


def _outcome(
    config: TrialConfig,
    trial: int,
    trial_seed: int,
    learner: str,
    sr: float,
    mm: float,
    err: float,
    delta: float,
    max_dz: float,
) -> TrialOutcome:
    min_e, max_e, stat_lower, stat_upper = _bound_terms(config)
    lower_rhs = sr - 2.0 / min_e - stat_lower - delta
    upper_rhs = sr - sr / (max_e + 1) + stat_upper
    return TrialOutcome(
        trial=trial,
        seed=trial_seed,
        learner=learner,
        sr=sr,
        err=err,
        delta=delta,
        missing_mass=mm,
        max_abs_delta_z=max_dz,
        lower_bound_rhs=lower_rhs,
        upper_bound_rhs=upper_rhs,
        lower_holds=err >= lower_rhs,
        upper_holds=err <= upper_rhs,
        lower_vacuous=lower_rhs <= 0.0,
        upper_vacuous=upper_rhs >= 1.0,
    )


# Grouped closed forms.  Arguments: n_unseen, n_prompts C, alpha, response
# set size m (candidates k = m - 1, error cells per prompt m - 2).  Each
# returns (err, delta at the classification threshold, max |delta_z| over
# attained thresholds).  The delta computations mirror the dense sums but
# collapse prompts into seen/unseen groups whose per-group differences
# between model mass and data mass cancel identically.


def _grouped_memorizer(n_unseen: int, n_prompts: int, alpha: float, m: int):
    k = m - 1
    w_unseen = n_unseen / n_prompts
    err = w_unseen * alpha * (k - 1) / k
    spread = alpha / k

    def delta_at(z: float) -> float:
        # Seen prompts: model equals the data distribution cell by cell.
        seen_diff = 0.0
        # Unseen prompts: the candidate block (total mass alpha, constant
        # cell value) enters A all-or-none; the data distribution puts the
        # same alpha on its one answer cell, which sits inside the block.
        block_in = spread > z
        unseen_diff = (alpha if block_in else 0.0) - (alpha if block_in else 0.0)
        # Abstain cells match exactly on both sides for every prompt.
        return abs(seen_diff + w_unseen * unseen_diff)

    thresholds = {0.0, alpha, 1.0 - alpha, spread}
    max_dz = max(delta_at(z) for z in thresholds)
    return err, delta_at(1.0 / (m - 2)), max_dz


def _grouped_uniform(n_unseen: int, n_prompts: int, alpha: float, m: int):
    value = 1.0 / m
    err = (m - 2) / m

    def delta_at(z: float) -> float:
        # All cells share one value, so A is everything or nothing; both
        # the model and the data distribution then have mass 1 (or 0).
        if value > z:
            return abs(1.0 - 1.0)
        return 0.0

    return err, delta_at(1.0 / (m - 2)), max(delta_at(z) for z in (0.0, value))


def _grouped_oracle(n_unseen: int, n_prompts: int, alpha: float, m: int):
    # Model identical to the data distribution: zero error, zero gap.
    def delta_at(z: float) -> float:
        return abs((alpha - alpha) + ((1.0 - alpha) - (1.0 - alpha)))

    return 0.0, delta_at(1.0 / (m - 2)), max(delta_at(z) for z in (0.0, alpha, 1.0 - alpha))


LEARNERS: dict[str, dict] = {
    "calibrated-memorizer": {
        "dense": calibrated_memorizer,
        "grouped": _grouped_memorizer,
    },
    "uniform": {
        "dense": lambda world, training: uniform_model(world),
        "grouped": _grouped_uniform,
    },
    "cheating-oracle": {
        "dense": training_oracle_model,
        "grouped": _grouped_oracle,
    },
}


def _dense_trial(config: TrialConfig, trial: int, learner_name: str, dense_fn) -> TrialOutcome:
    trial_seed = derive_seed(config.seed, trial)
    world = build_arbitrary_facts(
        config.n_prompts, config.response_set_size, config.alpha, seed=trial_seed
    )
    training = sample_training(world, config.n_training, trial_seed)
    model = dense_fn(world, training)
    partition = truth_partition(world)
    p = training_distribution(world)
    threshold = default_threshold(partition, world.mu)
    err = error_rate(model, partition, world.mu)
    delta = delta_calibration(model, p, world.mu, threshold)
    sr = singleton_rate(training, world.abstain_token).rate
    mm = missing_mass(world, training)
    max_dz = max_delta_over_thresholds(model, p, world.mu)
    return _outcome(config, trial, trial_seed, learner_name, sr, mm, err, delta, max_dz)


def _grouped_trial(
    config: TrialConfig, trial: int, learner_name: str, grouped_fn
) -> TrialOutcome:
    trial_seed = derive_seed(config.seed, trial)
    rng = stream(trial_seed, 1)
    distinct, singles = grouped_answered_counts(
        rng, config.n_prompts, config.alpha, config.n_training
    )
    n_unseen = config.n_prompts - distinct
    sr = singles / config.n_training
    mm = config.alpha * (n_unseen / config.n_prompts)
    err, delta, max_dz = grouped_fn(
        n_unseen, config.n_prompts, config.alpha, config.response_set_size
    )
    return _outcome(config, trial, trial_seed, learner_name, sr, mm, err, delta, max_dz)


def run_arbitrary_facts_trials(
    config: TrialConfig, learner: str | Callable[[World, TrainingSet], ConditionalModel]
) -> list[TrialOutcome]:
    """Run independent trials: fresh answer key, fresh training set, one learner.

    ``learner`` is a registry name from :data:`LEARNERS` or any callable
    producing a model from (world, training).  Callables require the
    dense engine and therefore a configuration under the cell cap.
    """
    if callable(learner) and not isinstance(learner, str):
        name = getattr(learner, "__name__", "custom")
        dense_fn, grouped_fn = learner, None
    else:
        if learner not in LEARNERS:
            raise ValueError(f"unknown learner {learner!r}; options: {sorted(LEARNERS)}")
        name = learner
        dense_fn = LEARNERS[learner]["dense"]
        grouped_fn = LEARNERS[learner]["grouped"]

    engine = config.engine
    if engine == "auto":
        engine = "dense" if config.n_cells <= MAX_CELLS else "grouped"
    if engine == "dense" and config.n_cells > MAX_CELLS:
        raise ValueError(
            f"{config.n_cells} cells exceed the dense cap of {MAX_CELLS}; "
            "use the grouped engine"
        )
    if engine == "grouped" and grouped_fn is None:
        raise ValueError("custom learners require the dense engine")

    if engine == "dense":
        return [
            _dense_trial(config, t, name, dense_fn) for t in range(config.trials)
        ]
    return [
        _grouped_trial(config, t, name, grouped_fn) for t in range(config.trials)
    ]


def summarize_trials(outcomes: list[TrialOutcome], gamma: float = 0.01) -> TrialSummary:
    """Aggregate pass/fail with three-sigma binomial slack on violations."""
    if not outcomes:
        raise ValueError("no outcomes to summarize")
    n = len(outcomes)
    lower_viol = sum(1 for o in outcomes if not o.lower_holds)
    upper_viol = sum(1 for o in outcomes if not o.upper_holds)
    lower_ok = passes_with_slack(lower_viol, n, gamma)
    upper_ok = passes_with_slack(upper_viol, n, gamma)
    return TrialSummary(
        learner=outcomes[0].learner,
        trials=n,
        gamma=gamma,
        lower_violations=lower_viol,
        upper_violations=upper_viol,
        lower_passed=lower_ok,
        upper_passed=upper_ok,
        passed=lower_ok and upper_ok,
        lower_vacuous_trials=sum(1 for o in outcomes if o.lower_vacuous),
        upper_vacuous_trials=sum(1 for o in outcomes if o.upper_vacuous),
        mean_sr=math.fsum(o.sr for o in outcomes) / n,
        mean_err=math.fsum(o.err for o in outcomes) / n,
        max_abs_delta_z=max(o.max_abs_delta_z for o in outcomes),
        min_upper_margin=min(o.upper_bound_rhs - o.err for o in outcomes),
        min_lower_margin=min(o.err - o.lower_bound_rhs for o in outcomes),
    )


@dataclass(frozen=True)
class ClassifierFamily:
    """Enumerable set of binary validity classifiers over (prompt, response)."""

    name: str
    members: tuple[tuple[str, Callable[[int, int], bool]], ...]


def classifier_misclassification(
    classify: Callable[[int, int], bool], mixture: IIVMixture
) -> float:
    """Mixture mass where the classifier disagrees with true validity."""
    part = mixture.partition
    terms = []
    for c in range(part.n_prompts):
        if float(mixture.mu[c]) == 0.0:
            continue
        for r in range(part.n_responses[c]):
            valid = r in part.valid_idx[c]
            if classify(c, r) != valid:
                terms.append(mixture.density(c, r))
    return math.fsum(terms)


def family_opt(family: ClassifierFamily, mixture: IIVMixture) -> tuple[float, dict[str, float]]:
    """Best achievable misclassification within the family, by enumeration."""
    rates = {
        name: classifier_misclassification(fn, mixture) for name, fn in family.members
    }
    return min(rates.values()), rates


@dataclass(frozen=True)
class TrigramDemo:
    """Two prompts distinguishable only by context a two-token window misses.

    Both prompts end in the same two tokens, so any model or classifier
    limited to that window must treat them identically; yet each prompt's
    valid response is the other's error.  The family holds every
    classifier computable from the shared window: the four functions of
    the response alone.
    """

    prompt_ids: tuple[str, str]
    response_ids: tuple[str, str]
    mu: np.ndarray
    partition: Partition
    p: ConditionalModel
    family: ClassifierFamily

    def mixture(self) -> IIVMixture:
        return IIVMixture(p=self.p, partition=self.partition, mu=self.mu)


def trigram_demo() -> TrigramDemo:
    mu = np.array([0.5, 0.5])
    partition = Partition(
        valid_idx=((0,), (1,)),
        error_idx=((1,), (0,)),
        n_responses=(2, 2),
    )
    p = ConditionalModel(probs=(np.array([1.0, 0.0]), np.array([0.0, 1.0])))
    members = (
        ("reject-both", lambda c, r: False),
        ("accept-both", lambda c, r: True),
        ("accept-first-response", lambda c, r: r == 0),
        ("accept-second-response", lambda c, r: r == 1),
    )
    family = ClassifierFamily(name="two-token-window", members=members)
    return TrigramDemo(
        prompt_ids=("prompt-she", "prompt-he"),
        response_ids=("ending-hers", "ending-his"),
        mu=mu,
        partition=partition,
        p=p,
        family=family,
    )


def trigram_constrained_model(weight_first: float) -> ConditionalModel:
    """A model that cannot see past the shared window: same row for both prompts."""
    if not 0.0 <= weight_first <= 1.0:
        raise ValueError("weight must lie in [0, 1]")
    row = np.array([weight_first, 1.0 - weight_first])
    return ConditionalModel(probs=(row, row.copy()))


def full_context_classifier(c: int, r: int) -> bool:
    """Sees the whole prompt, so it can match each response to its prompt."""
    return c == r


def crypto_world(message_count: int, seed: int) -> tuple[World, ConditionalModel]:
    """Decryption prompts under an information-theoretic pad.

    A seeded random bijection maps each of ``message_count`` ciphertext
    prompts to its plaintext answer.  The response list for every prompt
    is all messages plus the abstain token, so guessing is chance-level:
    no classifier can beat coin flipping without the key.  Returns the
    world together with the uniform baseline model, whose calibration gap
    is zero at every threshold.
    """
    if message_count < 3:
        raise ValueError("message_count must be at least 3")
    rng = stream(seed, 0)
    decrypt = rng.permutation(message_count)
    responses = tuple(f"m{i}" for i in range(message_count)) + ("IDK",)
    world = World(
        prompt_ids=tuple(f"h{i}" for i in range(message_count)),
        mu=np.full(message_count, 1.0 / message_count),
        responses=tuple(responses for _ in range(message_count)),
        abstain_token="IDK",
        alpha=np.ones(message_count),
        answer_idx=np.asarray(decrypt, dtype=np.int64),
    )
    return world, uniform_model(world)
