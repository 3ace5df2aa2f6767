"""Pydantic request/response models for the verification service.

Request models double as config-file validators for the CLI: unknown
fields are rejected so a typo in a config names itself.  Confidence
targets travel as decimal strings to keep penalty arithmetic exact.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HealthResponse(BaseModel):
    status: str
    version: str


class SuiteResponse(BaseModel):
    name: str
    passed: bool
    violations: int
    total: int
    summary: dict
    csv: str


class SimulateArbitraryFactsRequest(StrictModel):
    n_prompts: int = Field(default=5_000_000, ge=1)
    response_set_size: int = Field(default=366, ge=3)
    alpha: float = Field(default=1.0, ge=0.0, le=1.0)
    n_training: int = Field(default=1_000_000, ge=0)
    trials: int = Field(default=300, ge=100)
    seed: int = Field(default=0, ge=0)
    learner: str = "calibrated-memorizer"
    engine: Literal["auto", "dense", "grouped"] = "auto"
    gamma: float = Field(default=0.01, gt=0.0, le=1.0)


class MainBoundRequest(StrictModel):
    instances: int = Field(default=1000, ge=1)
    seed: int = Field(default=0, ge=0)


class GoodTuringRequest(StrictModel):
    variant: Literal["abstention", "classic"] = "abstention"
    trials: int = Field(default=1000, ge=100)
    gamma: float | None = Field(default=None, gt=0.0, le=1.0)
    seed: int = Field(default=0, ge=0)
    # abstention variant: symmetric world parameters
    n_training: int = Field(default=1_000_000, ge=1)
    n_prompts: int = Field(default=5_000_000, ge=1)
    alpha: float = Field(default=0.9, ge=0.0, le=1.0)
    response_set_size: int = Field(default=366, ge=3)
    # classic variant: heavy-tailed source parameters
    n_samples: int = Field(default=100_000, ge=1)
    zipf_exponent: float = Field(default=1.1, gt=0.0)
    support_size: int = Field(default=10_000, ge=2)


class MultipleChoiceRequest(StrictModel):
    instances: int = Field(default=500, ge=1)
    seed: int = Field(default=0, ge=0)


class MisalignedRequest(StrictModel):
    trials: int = Field(default=10_000, ge=1)
    seed: int = Field(default=0, ge=0)


class CryptoRequest(StrictModel):
    message_count: int = Field(default=101, ge=3)
    seed: int = Field(default=0, ge=0)
    random_models: int = Field(default=50, ge=0)


class TrigramRequest(StrictModel):
    weight_grid: int = Field(default=21, ge=2)


class GradeRequest(StrictModel):
    records_jsonl: str
    targets: list[str] = Field(default_factory=lambda: ["0", "0.5", "0.75", "0.9"])
    failure_probability: float = Field(default=0.05, gt=0.0, lt=1.0)


class GradeResponse(BaseModel):
    reports: list[dict]
    audit: dict
    scores_csv: str
    audit_csv: str
    passed: bool


class AuditRequest(StrictModel):
    runs: dict[str, str]  # confidence target -> JSONL text
    failure_probability: float = Field(default=0.05, gt=0.0, lt=1.0)


class AuditResponse(BaseModel):
    audit: dict
    csv: str
    passed: bool
