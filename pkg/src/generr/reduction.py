"""Generative error rate, the Is-It-Valid reduction, and bound checkers.

A conditional model is turned into a binary validity classifier by
thresholding its probabilities: a (prompt, response) cell is labeled
valid exactly when the model's probability is strictly above the
threshold.  The central inequality checked here is

    error_rate >= 2 * iiv_misclassification - max|V_c| / min|E_c| - delta

for any model, whenever the data distribution puts no mass on errors.
``delta`` is the calibration gap: the absolute difference between the
model's and the data distribution's mass on above-threshold cells.  It
also equals the magnitude of the cross-entropy derivative under
positive-set rescaling at scale 1, which :func:`delta_derivative_check`
verifies by central finite differences.

All mixture sums use compensated (exact) summation via ``math.fsum`` and
a comparison tolerance of 1e-9, so the checks are effectively exact at
desk scale.  Minima and maxima of per-prompt set sizes range only over
prompts with positive probability; prompts never asked cannot affect any
rate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .world import ConditionalModel, Partition

__all__ = [
    "TOLERANCE",
    "SupportError",
    "IIVMixture",
    "BoundReport",
    "DerivativeReport",
    "MultipleChoiceReport",
    "default_threshold",
    "error_rate",
    "iiv_misclassification",
    "delta_calibration",
    "check_main_bound",
    "cross_entropy",
    "rescaled_model",
    "delta_derivative_check",
    "multiple_choice_bound",
]

TOLERANCE = 1e-9


class SupportError(ValueError):
    """Model gives zero probability to a cell the data distribution uses."""

    def __init__(self, prompt_index: int, response_index: int):
        self.prompt_index = prompt_index
        self.response_index = response_index
        super().__init__(
            f"model assigns zero probability to cell (prompt {prompt_index}, "
            f"response {response_index}) which carries data mass"
        )


def _check_shapes(model: ConditionalModel, partition: Partition, mu: np.ndarray) -> np.ndarray:
    mu = np.asarray(mu, dtype=np.float64)
    if model.n_prompts != partition.n_prompts or mu.size != model.n_prompts:
        raise ValueError("model, partition, and mu must cover the same prompts")
    for c, row in enumerate(model.probs):
        if row.size != partition.n_responses[c]:
            raise ValueError(f"prompt index {c}: model row does not match the partition")
    return mu


def _support(mu: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.asarray(mu) > 0.0)


def min_error_set_size(partition: Partition, mu: np.ndarray) -> int:
    return min(len(partition.error_idx[int(c)]) for c in _support(mu))


def max_valid_set_size(partition: Partition, mu: np.ndarray) -> int:
    return max(len(partition.valid_idx[int(c)]) for c in _support(mu))


def default_threshold(partition: Partition, mu: np.ndarray) -> float:
    """Classification threshold 1 / min|E_c| over askable prompts."""
    return 1.0 / min_error_set_size(partition, mu)


@dataclass(frozen=True)
class IIVMixture:
    """Even mixture of data-distribution samples and uniform errors.

    Valid cells carry mass ``mu(c) * p(r | c) / 2``; error cells carry
    ``mu(c) / (2 |E_c|)``.  Construction requires the data distribution
    to be supported on valid cells, otherwise the mixture would not be a
    probability distribution.
    """

    p: ConditionalModel
    partition: Partition
    mu: np.ndarray

    def __post_init__(self):
        mu = _check_shapes(self.p, self.partition, self.mu)
        self.partition.check_nonempty(mu)
        object.__setattr__(self, "mu", mu)
        err_mass = error_rate(self.p, self.partition, mu)
        if err_mass > 1e-12:
            raise ValueError(
                f"data distribution puts mass {err_mass!r} on error cells; "
                "the mixture requires a noiseless distribution"
            )
        total = self.total_mass()
        if abs(total - 1.0) > TOLERANCE:
            raise ValueError(f"mixture mass {total!r} is not 1 within {TOLERANCE}")

    def density(self, c: int, r: int) -> float:
        if r in self.partition.valid_idx[c]:
            return float(self.mu[c]) * self.p.prob(c, r) / 2.0
        return float(self.mu[c]) / (2.0 * len(self.partition.error_idx[c]))

    def total_mass(self) -> float:
        terms = []
        for c in range(self.partition.n_prompts):
            m = float(self.mu[c])
            if m == 0.0:
                continue
            for r in self.partition.valid_idx[c]:
                terms.append(m * self.p.prob(c, r) / 2.0)
            terms.append(m / 2.0)
        return math.fsum(terms)


def error_rate(model: ConditionalModel, partition: Partition, mu) -> float:
    """Probability that a sample from the model lands in an error set."""
    mu = _check_shapes(model, partition, mu)
    return math.fsum(
        float(mu[c]) * model.prob(c, r)
        for c in range(partition.n_prompts)
        if mu[c] > 0.0
        for r in partition.error_idx[c]
    )


def iiv_misclassification(
    model: ConditionalModel, mixture: IIVMixture, threshold: float | None = None
) -> float:
    """Mixture mass misclassified by thresholding the model's probabilities.

    The induced classifier calls a cell valid iff the model probability
    is strictly above ``threshold`` (default ``1 / min|E_c|``); ties
    classify as errors.
    """
    if threshold is None:
        threshold = default_threshold(mixture.partition, mixture.mu)
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    part = mixture.partition
    terms = []
    for c in range(part.n_prompts):
        m = float(mixture.mu[c])
        if m == 0.0:
            continue
        for r in part.valid_idx[c]:
            if model.prob(c, r) <= threshold:  # valid cell classified as error
                terms.append(m * mixture.p.prob(c, r) / 2.0)
        e_size = len(part.error_idx[c])
        for r in part.error_idx[c]:
            if model.prob(c, r) > threshold:  # error cell classified as valid
                terms.append(m / (2.0 * e_size))
    return math.fsum(terms)


def delta_calibration(
    model: ConditionalModel,
    p: ConditionalModel,
    mu,
    threshold: float,
    exact: bool = False,
) -> float:
    """Calibration gap |model(A) - p(A)| at the given threshold.

    ``A`` is the set of cells whose model probability strictly exceeds
    ``threshold``.  Because both measures are normalized per prompt, the
    gap equals |p(B) - model(B)| over the complementary set, so the sum
    runs over whichever side has fewer cells; an empty side then yields
    an exact zero instead of cancellation residue.  With ``exact=True``
    the above-threshold sum is accumulated in rational arithmetic over
    the stored float values.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    mu = np.asarray(mu, dtype=np.float64)
    if model.n_prompts != p.n_prompts or mu.size != model.n_prompts:
        raise ValueError("model, p, and mu must cover the same prompts")
    if exact:
        gap = Fraction(0)
        for c in range(model.n_prompts):
            m = Fraction(float(mu[c]))
            if m == 0:
                continue
            row, prow = model.probs[c], p.probs[c]
            for r in range(row.size):
                if float(row[r]) > threshold:
                    gap += m * (Fraction(float(row[r])) - Fraction(float(prow[r])))
        return float(abs(gap))
    n_above = sum(
        int(np.count_nonzero(row > threshold))
        for c, row in enumerate(model.probs)
        if float(mu[c]) > 0.0
    )
    n_below = sum(row.size for c, row in enumerate(model.probs) if float(mu[c]) > 0.0) - n_above
    use_above = n_above <= n_below
    terms = []
    for c in range(model.n_prompts):
        m = float(mu[c])
        if m == 0.0:
            continue
        row, prow = model.probs[c], p.probs[c]
        for r in range(row.size):
            if (float(row[r]) > threshold) == use_above:
                terms.append(m * (float(row[r]) - float(prow[r])))
    return abs(math.fsum(terms))


@dataclass(frozen=True)
class BoundReport:
    """One evaluation of the main error-versus-misclassification inequality."""

    err: float
    cerr: float
    ratio_term: float
    delta: float
    threshold: float
    lhs: float
    rhs: float
    holds: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "err": self.err,
                "cerr": self.cerr,
                "ratio_term": self.ratio_term,
                "delta": self.delta,
                "threshold": self.threshold,
                "lhs": self.lhs,
                "rhs": self.rhs,
                "holds": self.holds,
            },
            sort_keys=True,
        )


def check_main_bound(
    p: ConditionalModel, model: ConditionalModel, partition: Partition, mu
) -> BoundReport:
    """Evaluate err >= 2 * cerr - max|V_c|/min|E_c| - delta.

    ``p`` must be a noiseless data distribution (no error mass); the
    report's ``holds`` must come out true for every valid input, which is
    the primary property this package certifies.
    """
    mu = _check_shapes(model, partition, mu)
    mixture = IIVMixture(p=p, partition=partition, mu=mu)  # validates p's support
    threshold = default_threshold(partition, mu)
    err = error_rate(model, partition, mu)
    cerr = iiv_misclassification(model, mixture, threshold)
    ratio = max_valid_set_size(partition, mu) / min_error_set_size(partition, mu)
    delta = delta_calibration(model, p, mu, threshold)
    rhs = 2.0 * cerr - ratio - delta
    return BoundReport(
        err=err,
        cerr=cerr,
        ratio_term=ratio,
        delta=delta,
        threshold=threshold,
        lhs=err,
        rhs=rhs,
        holds=err >= rhs - TOLERANCE,
    )


def cross_entropy(model: ConditionalModel, p: ConditionalModel, mu) -> float:
    """Expected surprisal of the model under the data distribution."""
    mu = np.asarray(mu, dtype=np.float64)
    terms = []
    for c in range(p.n_prompts):
        m = float(mu[c])
        if m == 0.0:
            continue
        row, prow = model.probs[c], p.probs[c]
        for r in range(prow.size):
            mass = float(prow[r])
            if mass == 0.0:
                continue
            q = float(row[r])
            if q <= 0.0:
                raise SupportError(c, r)
            terms.append(m * mass * -math.log(q))
    return math.fsum(terms)


def rescaled_model(model: ConditionalModel, s: float, threshold: float) -> ConditionalModel:
    """Scale above-threshold cells by ``s`` and renormalize per prompt.

    Rows with no above-threshold cells (and the scale 1 itself) are
    returned bit-identically: the map is then the mathematical identity
    and renormalizing would only inject rounding noise.
    """
    if s <= 0.0:
        raise ValueError("scale must be positive")
    if s == 1.0:
        return model
    rows = []
    for row in model.probs:
        above = row > threshold
        if not above.any():
            rows.append(row)
            continue
        scaled = np.where(above, s * row, row)
        rows.append(scaled / scaled.sum())
    return ConditionalModel(probs=tuple(rows))


@dataclass(frozen=True)
class DerivativeReport:
    delta: float
    finite_difference: float
    agree: bool


def delta_derivative_check(
    model: ConditionalModel,
    p: ConditionalModel,
    mu,
    threshold: float,
    step: float = 1e-5,
    tolerance: float = 1e-6,
) -> DerivativeReport:
    """Check that the calibration gap equals |d/ds cross_entropy| at s=1.

    The derivative is taken with respect to the positive-set rescaling
    factor and estimated by a central finite difference of width
    ``step``.
    """
    delta = delta_calibration(model, p, mu, threshold)
    up = cross_entropy(rescaled_model(model, 1.0 + step, threshold), p, mu)
    down = cross_entropy(rescaled_model(model, 1.0 - step, threshold), p, mu)
    fd = abs((up - down) / (2.0 * step))
    return DerivativeReport(delta=delta, finite_difference=fd, agree=abs(delta - fd) <= tolerance)


@dataclass(frozen=True)
class MultipleChoiceReport:
    """Threshold-sweep certificate for single-valid-response universes.

    ``holds`` records that some swept threshold t witnesses
    ``err >= 2 (1 - 1/C) * cerr(t)`` and that the closed-form average of
    ``cerr(t)`` over uniformly random t stays within its bound;
    ``expectation_identity_gap`` is that bound minus the average and must
    not be materially negative.
    """

    err: float
    best_t: float
    cerr_at_best_t: float
    holds: bool
    expectation_identity_gap: float
    n_choices: int
    avg_cerr_uniform_t: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "err": self.err,
                "best_t": self.best_t,
                "cerr_at_best_t": self.cerr_at_best_t,
                "holds": self.holds,
                "expectation_identity_gap": self.expectation_identity_gap,
                "n_choices": self.n_choices,
                "avg_cerr_uniform_t": self.avg_cerr_uniform_t,
            },
            sort_keys=True,
        )


def multiple_choice_bound(
    model: ConditionalModel, p: ConditionalModel, partition: Partition, mu
) -> MultipleChoiceReport:
    """Certify the pure multiple-choice bound with C = min|E_c| + 1 choices.

    Every prompt must have exactly one valid response.  Because the
    thresholded classifier is piecewise constant in t with breakpoints
    exactly at attained model probabilities, sweeping those values plus 0
    and 1 realizes every classifier the existential quantifier ranges
    over.  The uniform-t average of cerr(t) is computable in closed form
    since a cell is classified valid with probability equal to its model
    probability when t is uniform.
    """
    mu = _check_shapes(model, partition, mu)
    for c in range(partition.n_prompts):
        if len(partition.valid_idx[c]) != 1:
            raise ValueError(
                f"prompt index {c}: multiple-choice analysis needs exactly one valid response"
            )
    mixture = IIVMixture(p=p, partition=partition, mu=mu)
    n_choices = min_error_set_size(partition, mu) + 1
    factor = 2.0 * (1.0 - 1.0 / n_choices)
    err = error_rate(model, partition, mu)

    candidates = {0.0, 1.0}
    for c in _support(mu):
        candidates.update(float(v) for v in model.probs[int(c)])
    best_t, best_cerr, witnessed = 0.0, None, False
    for t in sorted(candidates):
        cerr_t = iiv_misclassification(model, mixture, t)
        if err >= factor * cerr_t - TOLERANCE:
            witnessed = True
            if best_cerr is None or cerr_t > best_cerr:
                best_t, best_cerr = t, cerr_t

    # E_t[cerr(t)] for t ~ U[0,1]: false negatives contribute
    # mu(c)/2 * (1 - model(a_c)); false positives mu(c)/(2|E_c|) * model(r).
    fn_terms, fp_terms = [], []
    for c in _support(mu):
        c = int(c)
        m = float(mu[c])
        a = partition.valid_idx[c][0]
        fn_terms.append(m / 2.0 * (1.0 - model.prob(c, a)))
        e_size = len(partition.error_idx[c])
        for r in partition.error_idx[c]:
            fp_terms.append(m / (2.0 * e_size) * model.prob(c, r))
    avg_cerr = math.fsum(fn_terms + fp_terms)
    identity_bound = 0.5 * (1.0 / (n_choices - 1) + 1.0) * err
    gap = identity_bound - avg_cerr

    holds = witnessed and gap >= -TOLERANCE and err >= factor * avg_cerr - TOLERANCE
    return MultipleChoiceReport(
        err=err,
        best_t=best_t,
        cerr_at_best_t=best_cerr if best_cerr is not None else math.nan,
        holds=holds,
        expectation_identity_gap=gap,
        n_choices=n_choices,
        avg_cerr_uniform_t=avg_cerr,
    )
