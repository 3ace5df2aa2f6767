"""Finite prompt/response universes and seeded sampling.

A :class:`World` fixes a prompt distribution ``mu``, a per-prompt response
list that always contains one designated abstain token, a per-prompt
answer probability ``alpha``, and the correct answer for each prompt.
Everything downstream (estimators, bound checkers, learners) consumes
these dense tables, so worlds are capped at ``MAX_CELLS`` total
(prompt, response) cells and reject anything larger.

All containers are immutable after construction; sampling takes an
explicit seed and keeps no hidden state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .prng import stream

__all__ = [
    "MAX_CELLS",
    "World",
    "Partition",
    "ConditionalModel",
    "TrainingSet",
    "build_arbitrary_facts",
    "truth_partition",
    "training_distribution",
    "sample_training",
]

MAX_CELLS = 10_000_000

# Probability vectors must sum to 1 within SUM_TOL.  Vectors off by more
# than SUM_TOL but within RENORM_TOL are treated as float drift and
# renormalized; anything worse is a user error and rejected.
SUM_TOL = 1e-12
RENORM_TOL = 1e-9


def _as_probability_vector(values: Sequence[float], what: str) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError(f"{what} must be a non-empty 1-d vector")
    if np.any(vec < 0.0) or not np.all(np.isfinite(vec)):
        raise ValueError(f"{what} has negative or non-finite entries")
    total = math.fsum(vec.tolist())
    if abs(total - 1.0) > SUM_TOL:
        if abs(total - 1.0) > RENORM_TOL:
            raise ValueError(f"{what} sums to {total!r}, not a probability vector")
        vec = vec / total
    vec.setflags(write=False)
    return vec


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class World:
    """Universe of prompts, responses, and ground truth.

    ``responses[c]`` is the ordered response list for prompt ``c`` and
    contains ``abstain_token`` exactly once plus at least one other
    response.  ``answer[c]`` is the correct (never abstaining) response.
    """

    prompt_ids: tuple[str, ...]
    mu: np.ndarray
    responses: tuple[tuple[str, ...], ...]
    abstain_token: str
    alpha: np.ndarray
    answer_idx: np.ndarray

    def __post_init__(self):
        n = len(self.prompt_ids)
        if n == 0:
            raise ValueError("world needs at least one prompt")
        if len(set(self.prompt_ids)) != n:
            raise ValueError("prompt ids must be unique")
        object.__setattr__(self, "mu", _as_probability_vector(self.mu, "mu"))
        if self.mu.size != n:
            raise ValueError("mu length does not match prompt count")

        alpha = np.asarray(self.alpha, dtype=np.float64)
        if alpha.shape != (n,):
            raise ValueError("alpha length does not match prompt count")
        if np.any(alpha < 0.0) or np.any(alpha > 1.0):
            raise ValueError("alpha entries must lie in [0, 1]")
        object.__setattr__(self, "alpha", _frozen(alpha))

        answer_idx = np.asarray(self.answer_idx, dtype=np.int64)
        if answer_idx.shape != (n,):
            raise ValueError("answer_idx length does not match prompt count")
        object.__setattr__(self, "answer_idx", _frozen(answer_idx))

        cells = 0
        abstain_idx = np.empty(n, dtype=np.int64)
        for c, resp in enumerate(self.responses):
            if len(set(resp)) != len(resp):
                raise ValueError(f"prompt {self.prompt_ids[c]}: duplicate responses")
            hits = [i for i, r in enumerate(resp) if r == self.abstain_token]
            if len(hits) != 1:
                raise ValueError(
                    f"prompt {self.prompt_ids[c]}: abstain token must appear exactly once"
                )
            if len(resp) < 2:
                raise ValueError(
                    f"prompt {self.prompt_ids[c]}: needs at least one non-abstain response"
                )
            abstain_idx[c] = hits[0]
            a = int(answer_idx[c])
            if not 0 <= a < len(resp):
                raise ValueError(f"prompt {self.prompt_ids[c]}: answer index out of range")
            if a == hits[0]:
                raise ValueError(f"prompt {self.prompt_ids[c]}: answer may not be the abstain token")
            cells += len(resp)
        if cells > MAX_CELLS:
            raise ValueError(
                f"world has {cells} (prompt, response) cells, above the cap of {MAX_CELLS}"
            )
        object.__setattr__(self, "_abstain_idx", _frozen(abstain_idx))
        object.__setattr__(self, "_n_cells", cells)

    @property
    def n_prompts(self) -> int:
        return len(self.prompt_ids)

    @property
    def n_cells(self) -> int:
        return self._n_cells

    @property
    def abstain_idx(self) -> np.ndarray:
        return self._abstain_idx

    @cached_property
    def prompt_cdf(self) -> np.ndarray:
        return _frozen(np.cumsum(self.mu))

    @cached_property
    def mu_is_uniform(self) -> bool:
        return bool(np.all(self.mu == self.mu[0]))

    def answer_id(self, c: int) -> str:
        return self.responses[c][int(self.answer_idx[c])]

    def to_json(self) -> str:
        """Serialize to the documented JSON schema (ids as strings)."""
        doc = {
            "schema_version": 1,
            "abstain_token": self.abstain_token,
            "prompts": [
                {
                    "id": pid,
                    "mu": float(self.mu[c]),
                    "alpha": float(self.alpha[c]),
                    "responses": list(self.responses[c]),
                    "answer": self.answer_id(c),
                }
                for c, pid in enumerate(self.prompt_ids)
            ],
        }
        return json.dumps(doc, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "World":
        doc = json.loads(text)
        prompts = doc["prompts"]
        return World(
            prompt_ids=tuple(p["id"] for p in prompts),
            mu=np.array([p["mu"] for p in prompts], dtype=np.float64),
            responses=tuple(tuple(p["responses"]) for p in prompts),
            abstain_token=doc["abstain_token"],
            alpha=np.array([p["alpha"] for p in prompts], dtype=np.float64),
            answer_idx=np.array(
                [p["responses"].index(p["answer"]) for p in prompts], dtype=np.int64
            ),
        )


@dataclass(frozen=True)
class Partition:
    """Per-prompt split of the response list into valid and error sets."""

    valid_idx: tuple[tuple[int, ...], ...]
    error_idx: tuple[tuple[int, ...], ...]
    n_responses: tuple[int, ...]

    def __post_init__(self):
        if not len(self.valid_idx) == len(self.error_idx) == len(self.n_responses):
            raise ValueError("per-prompt partition lists must have equal length")
        for c, (v, e, m) in enumerate(zip(self.valid_idx, self.error_idx, self.n_responses)):
            combined = sorted(v) + sorted(e)
            if sorted(combined) != list(range(m)):
                raise ValueError(f"prompt {c}: valid and error sets must partition the responses")
        object.__setattr__(self, "valid_idx", tuple(tuple(sorted(v)) for v in self.valid_idx))
        object.__setattr__(self, "error_idx", tuple(tuple(sorted(e)) for e in self.error_idx))

    @property
    def n_prompts(self) -> int:
        return len(self.n_responses)

    def check_nonempty(self, mu: np.ndarray) -> None:
        """Require both sides nonempty for every prompt that can be asked."""
        for c in np.flatnonzero(np.asarray(mu) > 0.0):
            if not self.valid_idx[c] or not self.error_idx[c]:
                raise ValueError(
                    f"prompt index {int(c)}: valid and error sets must both be nonempty"
                )


@dataclass(frozen=True)
class ConditionalModel:
    """Dense table of per-prompt response probabilities."""

    probs: tuple[np.ndarray, ...]

    def __post_init__(self):
        rows = []
        for c, row in enumerate(self.probs):
            rows.append(_as_probability_vector(row, f"model row for prompt index {c}"))
        object.__setattr__(self, "probs", tuple(rows))

    @property
    def n_prompts(self) -> int:
        return len(self.probs)

    def prob(self, c: int, r: int) -> float:
        return float(self.probs[c][r])

    def row_sizes(self) -> tuple[int, ...]:
        return tuple(row.size for row in self.probs)


@dataclass(frozen=True)
class TrainingSet:
    """Ordered list of sampled (prompt, response) pairs from a world."""

    world: World
    prompt_idx: np.ndarray
    response_idx: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.prompt_idx, dtype=np.int64)
        r = np.asarray(self.response_idx, dtype=np.int64)
        if p.shape != r.shape or p.ndim != 1:
            raise ValueError("prompt_idx and response_idx must be equal-length vectors")
        if p.size:
            if p.min() < 0 or p.max() >= self.world.n_prompts:
                raise ValueError("training pair references an unknown prompt")
            sizes = np.array([len(resp) for resp in self.world.responses], dtype=np.int64)
            if np.any(r < 0) or np.any(r >= sizes[p]):
                raise ValueError("training pair references an unknown response")
        object.__setattr__(self, "prompt_idx", _frozen(p))
        object.__setattr__(self, "response_idx", _frozen(r))

    @property
    def n(self) -> int:
        return int(self.prompt_idx.size)

    def pairs(self) -> list[tuple[str, str]]:
        return [
            (self.world.prompt_ids[c], self.world.responses[c][r])
            for c, r in zip(self.prompt_idx.tolist(), self.response_idx.tolist())
        ]

    def to_json(self) -> str:
        return json.dumps({"schema_version": 1, "n": self.n, "pairs": self.pairs()})

    @staticmethod
    def from_json(text: str, world: World) -> "TrainingSet":
        doc = json.loads(text)
        prompt_pos = {pid: c for c, pid in enumerate(world.prompt_ids)}
        response_pos = [
            {rid: i for i, rid in enumerate(resp)} for resp in world.responses
        ]
        p = np.array([prompt_pos[pid] for pid, _ in doc["pairs"]], dtype=np.int64)
        r = np.array(
            [response_pos[prompt_pos[pid]][rid] for pid, rid in doc["pairs"]],
            dtype=np.int64,
        )
        return TrainingSet(world=world, prompt_idx=p, response_idx=r)


def build_arbitrary_facts(
    n_prompts: int,
    response_set_size: int,
    alpha: float | Sequence[float],
    seed: int,
    mu: Sequence[float] | None = None,
    abstain_token: str = "IDK",
) -> World:
    """Build a world whose answers carry no learnable pattern.

    Each prompt gets the same response list: ``response_set_size - 1``
    candidate answers plus the abstain token.  The correct answer is
    drawn uniformly and independently per prompt from the candidates,
    reproducibly from ``seed``.  ``mu`` defaults to uniform.
    """
    if n_prompts < 1:
        raise ValueError("n_prompts must be at least 1")
    if response_set_size < 2:
        raise ValueError("response_set_size must be at least 2 (answer plus abstain)")
    if n_prompts * response_set_size > MAX_CELLS:
        raise ValueError(
            f"{n_prompts} x {response_set_size} cells exceed the cap of {MAX_CELLS}; "
            "use the grouped trial engine for configurations this large"
        )

    n_candidates = response_set_size - 1
    response_row = tuple(f"r{i}" for i in range(n_candidates)) + (abstain_token,)

    if np.isscalar(alpha):
        alpha_vec = np.full(n_prompts, float(alpha), dtype=np.float64)
    else:
        alpha_vec = np.asarray(alpha, dtype=np.float64)
    if np.any(alpha_vec < 0.0) or np.any(alpha_vec > 1.0):
        raise ValueError("alpha entries must lie in [0, 1]")

    mu_vec = (
        np.full(n_prompts, 1.0 / n_prompts, dtype=np.float64)
        if mu is None
        else np.asarray(mu, dtype=np.float64)
    )

    rng = stream(seed, 0)
    answers = rng.integers(0, n_candidates, size=n_prompts, dtype=np.int64)

    return World(
        prompt_ids=tuple(f"c{i}" for i in range(n_prompts)),
        mu=mu_vec,
        responses=tuple(response_row for _ in range(n_prompts)),
        abstain_token=abstain_token,
        alpha=alpha_vec,
        answer_idx=answers,
    )


def truth_partition(world: World) -> Partition:
    """Valid set {answer, abstain} per prompt; every other response errs.

    Rejects worlds where some askable prompt has only the answer and the
    abstain token, since the error side would be empty.
    """
    valid, error, sizes = [], [], []
    support = np.asarray(world.mu) > 0.0
    for c, resp in enumerate(world.responses):
        m = len(resp)
        a = int(world.answer_idx[c])
        idk = int(world.abstain_idx[c])
        if m < 3 and support[c]:
            raise ValueError(
                f"prompt {world.prompt_ids[c]}: truth partition needs at least 3 responses "
                "so the error set is nonempty"
            )
        v = (a, idk)
        e = tuple(i for i in range(m) if i not in v)
        valid.append(v)
        error.append(e)
        sizes.append(m)
    return Partition(valid_idx=tuple(valid), error_idx=tuple(error), n_responses=tuple(sizes))


def training_distribution(world: World) -> ConditionalModel:
    """Noise-free data distribution: answer with prob alpha, else abstain."""
    rows = []
    for c in range(world.n_prompts):
        row = np.zeros(len(world.responses[c]), dtype=np.float64)
        row[int(world.answer_idx[c])] = world.alpha[c]
        row[int(world.abstain_idx[c])] = 1.0 - world.alpha[c]
        rows.append(row)
    return ConditionalModel(probs=tuple(rows))


def draw_uniform_prompts(rng: np.random.Generator, n_prompts: int, n: int) -> np.ndarray:
    """Uniform prompt draws from one block of [0, 1) variates.

    ``floor(u * n_prompts)`` is exact for uniform weights and avoids a
    binary search; the dense and grouped engines share this rule so that
    equal streams yield equal samples.
    """
    u = rng.random(n)
    idx = (u * n_prompts).astype(np.int64)
    return np.minimum(idx, n_prompts - 1)


def draw_prompt_indices(rng: np.random.Generator, world: World, n: int) -> np.ndarray:
    if world.mu_is_uniform:
        return draw_uniform_prompts(rng, world.n_prompts, n)
    u = rng.random(n)
    return np.searchsorted(world.prompt_cdf, u, side="right").astype(np.int64)


def sample_training(world: World, n: int, seed: int) -> TrainingSet:
    """Draw ``n`` iid pairs: prompt from mu, then answer-or-abstain.

    The stream consumes two uniform blocks (prompt draws, then
    answer/abstain draws) regardless of alpha, so that callers relying on
    stream parity across engines see identical samples.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = stream(seed, 1)
    c = draw_prompt_indices(rng, world, n)
    u = rng.random(n)
    answered = u < world.alpha[c]
    r = np.where(answered, world.answer_idx[c], world.abstain_idx[c])
    return TrainingSet(world=world, prompt_idx=c, response_idx=r)
