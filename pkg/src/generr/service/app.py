"""FastAPI service exposing the simulation and grading suites.

Every endpoint is synchronous and deterministic: the response is a pure
function of the request body, including the rendered CSV artifacts, so
clients can persist byte-stable outputs.  Domain errors (bad records,
invalid configurations) surface as 400 with a structured detail; schema
violations are FastAPI's usual 422.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..grading import (
    GraderConfig,
    RecordParseError,
    audit_to_csv,
    behavioral_calibration_audit,
    parse_eval_records,
    score,
    scores_to_csv,
)
from ..learners import TrialConfig
from ..suites import (
    SuiteResult,
    arbitrary_facts_suite,
    crypto_suite,
    good_turing_classic_suite,
    good_turing_suite,
    main_bound_suite,
    misaligned_suite,
    multiple_choice_suite,
    trigram_suite,
)
from . import schemas

__all__ = ["create_app"]


def _suite_response(result: SuiteResult) -> schemas.SuiteResponse:
    return schemas.SuiteResponse(
        name=result.name,
        passed=result.passed,
        violations=result.violations,
        total=result.total,
        summary=result.summary,
        csv=result.to_csv(),
    )


def create_app() -> FastAPI:
    app = FastAPI(title="generr", version=__version__)

    @app.exception_handler(RecordParseError)
    async def _record_errors(request: Request, exc: RecordParseError):
        return JSONResponse(
            status_code=400,
            content={
                "detail": {
                    "message": "malformed eval records",
                    "problems": [{"line": n, "error": msg} for n, msg in exc.problems],
                }
            },
        )

    @app.exception_handler(ValueError)
    async def _value_errors(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/simulate/arbitrary-facts", response_model=schemas.SuiteResponse)
    def simulate_arbitrary_facts(req: schemas.SimulateArbitraryFactsRequest):
        config = TrialConfig(
            n_prompts=req.n_prompts,
            response_set_size=req.response_set_size,
            alpha=req.alpha,
            n_training=req.n_training,
            trials=req.trials,
            seed=req.seed,
            engine=req.engine,
        )
        result, _ = arbitrary_facts_suite(config, req.learner, gamma=req.gamma)
        return _suite_response(result)

    @app.post("/verify/main-bound", response_model=schemas.SuiteResponse)
    def verify_main_bound(req: schemas.MainBoundRequest):
        return _suite_response(main_bound_suite(req.instances, req.seed))

    @app.post("/verify/good-turing", response_model=schemas.SuiteResponse)
    def verify_good_turing(req: schemas.GoodTuringRequest):
        if req.variant == "classic":
            result = good_turing_classic_suite(
                trials=req.trials,
                n_samples=req.n_samples,
                gamma=req.gamma if req.gamma is not None else 0.05,
                seed=req.seed,
                zipf_exponent=req.zipf_exponent,
                support_size=req.support_size,
            )
        else:
            result = good_turing_suite(
                trials=req.trials,
                n_training=req.n_training,
                gamma=req.gamma if req.gamma is not None else 0.01,
                seed=req.seed,
                n_prompts=req.n_prompts,
                alpha=req.alpha,
                response_set_size=req.response_set_size,
            )
        return _suite_response(result)

    @app.post("/verify/multiple-choice", response_model=schemas.SuiteResponse)
    def verify_multiple_choice(req: schemas.MultipleChoiceRequest):
        return _suite_response(multiple_choice_suite(req.instances, req.seed))

    @app.post("/verify/misaligned", response_model=schemas.SuiteResponse)
    def verify_misaligned(req: schemas.MisalignedRequest):
        return _suite_response(misaligned_suite(req.trials, req.seed))

    @app.post("/verify/crypto", response_model=schemas.SuiteResponse)
    def verify_crypto(req: schemas.CryptoRequest):
        return _suite_response(crypto_suite(req.message_count, req.seed, req.random_models))

    @app.post("/demo/trigram", response_model=schemas.SuiteResponse)
    def demo_trigram(req: schemas.TrigramRequest):
        return _suite_response(trigram_suite(req.weight_grid))

    @app.post("/grade", response_model=schemas.GradeResponse)
    def grade(req: schemas.GradeRequest):
        records = parse_eval_records(req.records_jsonl)
        configs = [GraderConfig.from_target(t) for t in req.targets]
        reports = [score(records, cfg) for cfg in configs]
        audit = behavioral_calibration_audit(
            {str(cfg.target): records for cfg in configs},
            failure_probability=req.failure_probability,
        )
        return schemas.GradeResponse(
            reports=[rep.to_dict() for rep in reports],
            audit=audit.to_dict(),
            scores_csv=scores_to_csv(reports),
            audit_csv=audit_to_csv(audit),
            passed=True,
        )

    @app.post("/audit", response_model=schemas.AuditResponse)
    def audit(req: schemas.AuditRequest):
        runs = {target: parse_eval_records(text) for target, text in req.runs.items()}
        report = behavioral_calibration_audit(
            runs, failure_probability=req.failure_probability
        )
        return schemas.AuditResponse(
            audit=report.to_dict(),
            csv=audit_to_csv(report),
            passed=all(row.calibrated_at_t for row in report.rows),
        )

    return app
