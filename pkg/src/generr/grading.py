"""Penalty-based grading of benchmark records and answering policies.

A grader with confidence target ``t`` pays 1 point per correct answer,
0 for an abstention, and ``-t / (1 - t)`` per wrong answer, so answering
beats abstaining exactly when the answer's probability of being correct
exceeds ``t``.  ``t = 0`` reproduces plain right/wrong grading, under
which abstaining is never optimal for any belief the test-taker may
hold.

Records arrive pre-judged (a ``correct`` boolean); equivalence judging
of free-text answers is out of scope.  Scores are kept as exact
fractions: targets are parsed from decimal strings, so ``t = 0.9`` costs
exactly 9 points per mistake, never ``8.999...``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .prng import stream

__all__ = [
    "RecordError",
    "RecordParseError",
    "EvalRecord",
    "parse_eval_records",
    "GraderConfig",
    "PRESET_TARGETS",
    "ScoreReport",
    "score",
    "BeliefItem",
    "BeliefProfile",
    "random_beliefs",
    "PolicyDecision",
    "PolicyReport",
    "optimal_policy",
    "MisalignedReport",
    "verify_observation_misaligned",
    "CompareReport",
    "compare_models",
    "AuditRow",
    "AuditReport",
    "behavioral_calibration_audit",
    "scores_to_csv",
    "audit_to_csv",
]

PRESET_TARGETS = ("0", "0.5", "0.75", "0.9")


class RecordError(ValueError):
    pass


class RecordParseError(ValueError):
    """Raised with the 1-based line numbers of every malformed record."""

    def __init__(self, problems: list[tuple[int, str]]):
        self.problems = problems
        detail = "; ".join(f"line {n}: {msg}" for n, msg in problems)
        super().__init__(f"malformed eval records: {detail}")


@dataclass(frozen=True)
class EvalRecord:
    item_id: str
    abstain: bool
    correct: bool | None = None
    confidence: float | None = None

    def __post_init__(self):
        if self.abstain and self.correct is not None:
            raise RecordError(
                f"record {self.item_id!r}: abstaining records must omit 'correct'"
            )
        if not self.abstain and self.correct is None:
            raise RecordError(
                f"record {self.item_id!r}: answered records require 'correct'"
            )
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise RecordError(
                f"record {self.item_id!r}: confidence must lie in [0, 1]"
            )


def parse_eval_records(text: str) -> list[EvalRecord]:
    """Parse JSONL, one record per line; unknown fields are ignored."""
    records = []
    problems: list[tuple[int, str]] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            problems.append((line_no, f"invalid JSON ({exc.msg})"))
            continue
        if not isinstance(doc, dict):
            problems.append((line_no, "record must be a JSON object"))
            continue
        try:
            records.append(
                EvalRecord(
                    item_id=str(doc.get("item_id", f"line-{line_no}")),
                    abstain=bool(doc.get("abstain", False)),
                    correct=doc.get("correct"),
                    confidence=doc.get("confidence"),
                )
            )
        except RecordError as exc:
            problems.append((line_no, str(exc)))
    if problems:
        raise RecordParseError(problems)
    return records


def _as_target(value) -> Fraction:
    """Parse a confidence target exactly; floats go through their repr."""
    if isinstance(value, Fraction):
        target = value
    elif isinstance(value, float):
        target = Fraction(repr(value))
    elif isinstance(value, (int, str)):
        target = Fraction(value)
    else:
        raise ValueError(f"cannot interpret confidence target {value!r}")
    if not 0 <= target < 1:
        raise ValueError(f"confidence target must lie in [0, 1), got {target}")
    return target


@dataclass(frozen=True)
class GraderConfig:
    """Confidence target plus its derived wrong-answer penalty."""

    target: Fraction
    name: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "target", _as_target(self.target))

    @classmethod
    def from_target(cls, value, name: str | None = None) -> "GraderConfig":
        return cls(target=_as_target(value), name=name)

    @property
    def penalty(self) -> Fraction:
        return self.target / (1 - self.target)

    def label(self) -> str:
        return self.name or str(self.target)


@dataclass(frozen=True)
class ScoreReport:
    n_items: int
    n_abstained: int
    n_correct: int
    n_wrong: int
    total_score: Fraction
    mean_score: Fraction | None
    accuracy_among_answered: Fraction | None
    accuracy_undefined: bool
    target: Fraction
    penalty: Fraction

    def to_dict(self) -> dict:
        return {
            "target": str(self.target),
            "penalty": str(self.penalty),
            "n_items": self.n_items,
            "n_abstained": self.n_abstained,
            "n_correct": self.n_correct,
            "n_wrong": self.n_wrong,
            "total_score": str(self.total_score),
            "total_score_float": float(self.total_score),
            "mean_score": None if self.mean_score is None else str(self.mean_score),
            "accuracy_among_answered": (
                None
                if self.accuracy_among_answered is None
                else str(self.accuracy_among_answered)
            ),
            "accuracy_undefined": self.accuracy_undefined,
        }


def score(records: list[EvalRecord], config: GraderConfig) -> ScoreReport:
    """Fold records into an exact score: +1, 0, or -penalty per record."""
    n_correct = sum(1 for r in records if not r.abstain and r.correct)
    n_wrong = sum(1 for r in records if not r.abstain and not r.correct)
    n_abst = sum(1 for r in records if r.abstain)
    total = Fraction(n_correct) - config.penalty * n_wrong
    answered = n_correct + n_wrong
    return ScoreReport(
        n_items=len(records),
        n_abstained=n_abst,
        n_correct=n_correct,
        n_wrong=n_wrong,
        total_score=total,
        mean_score=None if not records else total / len(records),
        accuracy_among_answered=None if answered == 0 else Fraction(n_correct, answered),
        accuracy_undefined=answered == 0,
        target=config.target,
        penalty=config.penalty,
    )


@dataclass(frozen=True)
class BeliefItem:
    """Posterior over which candidate response is the correct one."""

    item_id: str
    probabilities: tuple[float, ...]

    def __post_init__(self):
        if not self.probabilities:
            raise ValueError(f"item {self.item_id!r}: needs at least one candidate")
        if any(p < 0.0 for p in self.probabilities):
            raise ValueError(f"item {self.item_id!r}: negative candidate probability")
        if abs(math.fsum(self.probabilities) - 1.0) > 1e-9:
            raise ValueError(f"item {self.item_id!r}: probabilities must sum to 1")


@dataclass(frozen=True)
class BeliefProfile:
    items: tuple[BeliefItem, ...]


def random_beliefs(
    seed: int, n_items: int, min_candidates: int = 2, max_candidates: int = 10
) -> BeliefProfile:
    """Random posteriors: candidate counts then uniform simplex draws."""
    rng = stream(seed, 0)
    items = []
    for i in range(n_items):
        k = int(rng.integers(min_candidates, max_candidates + 1))
        raw = rng.dirichlet(np.ones(k))
        items.append(BeliefItem(item_id=f"item-{i}", probabilities=tuple(float(x) for x in raw)))
    return BeliefProfile(items=tuple(items))


@dataclass(frozen=True)
class PolicyDecision:
    item_id: str
    answer: bool
    chosen_index: int | None
    confidence: float
    expected_score: Fraction


@dataclass(frozen=True)
class PolicyReport:
    decisions: tuple[PolicyDecision, ...]
    expected_total: Fraction
    n_answered: int
    n_abstained: int


def _as_probability(value: float) -> Fraction:
    """Exact rational of the decimal a float prints as (0.8 -> 4/5)."""
    return Fraction(repr(float(value)))


def _expected_answer_score(confidence: Fraction, config: GraderConfig) -> Fraction:
    return confidence - (1 - confidence) * config.penalty


def optimal_policy(beliefs: BeliefProfile, config: GraderConfig) -> PolicyReport:
    """Answer with the most probable candidate iff its probability beats t.

    Ties at exactly t abstain: the expected score there is exactly zero,
    the same as abstaining, and the safe side of the tie is silence.
    """
    decisions = []
    for item in beliefs.items:
        best = max(range(len(item.probabilities)), key=lambda i: item.probabilities[i])
        conf = _as_probability(item.probabilities[best])
        if conf > config.target:
            decisions.append(
                PolicyDecision(
                    item_id=item.item_id,
                    answer=True,
                    chosen_index=best,
                    confidence=float(conf),
                    expected_score=_expected_answer_score(conf, config),
                )
            )
        else:
            decisions.append(
                PolicyDecision(
                    item_id=item.item_id,
                    answer=False,
                    chosen_index=None,
                    confidence=float(conf),
                    expected_score=Fraction(0),
                )
            )
    total = sum((d.expected_score for d in decisions), Fraction(0))
    n_answered = sum(1 for d in decisions if d.answer)
    return PolicyReport(
        decisions=tuple(decisions),
        expected_total=total,
        n_answered=n_answered,
        n_abstained=len(decisions) - n_answered,
    )


@dataclass(frozen=True)
class MisalignedReport:
    trials: int
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0


def verify_observation_misaligned(trials: int, seed: int) -> MisalignedReport:
    """Check that right/wrong grading never makes abstention optimal.

    Draws one random belief per trial and applies the optimal policy at
    target 0; any abstention counts as a violation.  Since candidate
    probabilities sum to 1, some candidate always has positive
    probability, so a best guess always has positive expected score.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    config = GraderConfig.from_target(0)
    profile = random_beliefs(seed, trials)
    report = optimal_policy(profile, config)
    return MisalignedReport(trials=trials, violations=report.n_abstained)


@dataclass(frozen=True)
class CompareReport:
    score_abstainer: Fraction
    score_guesser: Fraction
    guesser_beats_abstainer: bool

    def to_dict(self) -> dict:
        return {
            "score_abstainer": str(self.score_abstainer),
            "score_guesser": str(self.score_guesser),
            "guesser_beats_abstainer": self.guesser_beats_abstainer,
        }


def compare_models(
    beliefs: BeliefProfile, config: GraderConfig, abstain_below: Fraction | float | str
) -> CompareReport:
    """Expected scores of two test-takers sharing the same beliefs.

    The abstainer answers only when its best candidate's probability
    strictly exceeds ``abstain_below``; the guesser always answers.
    Under target 0 the guesser comes out ahead whenever the abstainer
    stays silent on an item with any chance of being right.
    """
    threshold = _as_target(abstain_below)
    score_a = Fraction(0)
    score_b = Fraction(0)
    for item in beliefs.items:
        conf = _as_probability(max(item.probabilities))
        answer_value = _expected_answer_score(conf, config)
        score_b += answer_value
        if conf > threshold:
            score_a += answer_value
    return CompareReport(
        score_abstainer=score_a,
        score_guesser=score_b,
        guesser_beats_abstainer=score_b > score_a,
    )


@dataclass(frozen=True)
class AuditRow:
    target: Fraction
    n_items: int
    n_answered: int
    answered_fraction: Fraction | None
    accuracy_among_answered: Fraction | None
    calibrated_at_t: bool
    vacuous: bool
    slack: float

    def to_dict(self) -> dict:
        return {
            "target": str(self.target),
            "n_items": self.n_items,
            "n_answered": self.n_answered,
            "answered_fraction": (
                None if self.answered_fraction is None else float(self.answered_fraction)
            ),
            "accuracy_among_answered": (
                None
                if self.accuracy_among_answered is None
                else float(self.accuracy_among_answered)
            ),
            "calibrated_at_t": self.calibrated_at_t,
            "vacuous": self.vacuous,
            "slack": self.slack,
        }


@dataclass(frozen=True)
class AuditReport:
    rows: tuple[AuditRow, ...]
    answered_fraction_monotone: bool

    def to_dict(self) -> dict:
        return {
            "rows": [row.to_dict() for row in self.rows],
            "answered_fraction_monotone": self.answered_fraction_monotone,
        }


def scores_to_csv(reports: list[ScoreReport]) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "target",
            "penalty",
            "n_items",
            "n_abstained",
            "n_correct",
            "n_wrong",
            "total_score",
            "mean_score",
            "accuracy_among_answered",
            "accuracy_undefined",
        ]
    )
    for rep in reports:
        writer.writerow(
            [
                str(rep.target),
                str(rep.penalty),
                rep.n_items,
                rep.n_abstained,
                rep.n_correct,
                rep.n_wrong,
                str(rep.total_score),
                "" if rep.mean_score is None else str(rep.mean_score),
                "" if rep.accuracy_among_answered is None else str(rep.accuracy_among_answered),
                rep.accuracy_undefined,
            ]
        )
    return buf.getvalue()


def audit_to_csv(report: "AuditReport") -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "target",
            "n_items",
            "n_answered",
            "answered_fraction",
            "accuracy_among_answered",
            "calibrated_at_t",
            "vacuous",
            "slack",
        ]
    )
    for row in report.rows:
        writer.writerow(
            [
                str(row.target),
                row.n_items,
                row.n_answered,
                "" if row.answered_fraction is None else repr(float(row.answered_fraction)),
                ""
                if row.accuracy_among_answered is None
                else repr(float(row.accuracy_among_answered)),
                row.calibrated_at_t,
                row.vacuous,
                repr(row.slack),
            ]
        )
    return buf.getvalue()


def behavioral_calibration_audit(
    runs: dict, failure_probability: float = 0.05
) -> AuditReport:
    """Audit accuracy against announced targets across per-target runs.

    A run keyed by target t is calibrated at t when its accuracy among
    answered items reaches t minus a finite-sample allowance
    ``sqrt(ln(1/failure_probability) / (2 n_answered))``.  Runs that
    answer nothing are vacuously calibrated and flagged.  Answering
    should not become more frequent as the target rises, which the
    monotonicity flag records.
    """
    rows = []
    for raw_target in sorted(runs, key=_as_target):
        target = _as_target(raw_target)
        records = runs[raw_target]
        n_items = len(records)
        n_correct = sum(1 for r in records if not r.abstain and r.correct)
        n_answered = sum(1 for r in records if not r.abstain)
        if n_answered == 0:
            rows.append(
                AuditRow(
                    target=target,
                    n_items=n_items,
                    n_answered=0,
                    answered_fraction=None if n_items == 0 else Fraction(0),
                    accuracy_among_answered=None,
                    calibrated_at_t=True,
                    vacuous=True,
                    slack=0.0,
                )
            )
            continue
        accuracy = Fraction(n_correct, n_answered)
        slack = math.sqrt(math.log(1.0 / failure_probability) / (2.0 * n_answered))
        rows.append(
            AuditRow(
                target=target,
                n_items=n_items,
                n_answered=n_answered,
                answered_fraction=None if n_items == 0 else Fraction(n_answered, n_items),
                accuracy_among_answered=accuracy,
                calibrated_at_t=float(accuracy) >= float(target) - slack,
                vacuous=False,
                slack=slack,
            )
        )
    fractions = [row.answered_fraction for row in rows if row.answered_fraction is not None]
    monotone = all(a >= b for a, b in zip(fractions, fractions[1:]))
    return AuditReport(rows=tuple(rows), answered_fraction_monotone=monotone)
