"""Thin CLI client for the verification service.

Subcommands assemble a request, post it to the service, and persist the
returned artifacts (CSV rows plus a JSON summary) together with a
manifest of config echo, seed, and artifact hashes.  By default the
service runs in-process over an ASGI transport, so no server is needed;
``--server URL`` targets a running instance instead.

Exit codes: 0 pass, 1 bound/property violation, 2 usage or config error.
All randomness flows from the single ``--seed``; reruns with the same
seed write byte-identical artifacts.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click
import httpx

from .service import create_app

CONFIG_SCHEMA_VERSION = 1


class CliState:
    def __init__(self, seed, config_path, out_dir, fmt, server):
        self.seed = seed
        self.out_dir = Path(out_dir)
        self.fmt = fmt
        self.server = server
        self.config_params: dict = {}
        self.config_seed: int | None = None
        if config_path is not None:
            self._load_config(Path(config_path))

    def _load_config(self, path: Path) -> None:
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise click.UsageError(f"cannot read config {path}: {exc}")
        if not isinstance(doc, dict) or doc.get("schema_version") != CONFIG_SCHEMA_VERSION:
            raise click.UsageError(
                f"config {path}: field 'schema_version' must equal {CONFIG_SCHEMA_VERSION}"
            )
        params = doc.get("params", {})
        if not isinstance(params, dict):
            raise click.UsageError(f"config {path}: field 'params' must be an object")
        self.config_params = params
        if "seed" in doc:
            self.config_seed = int(doc["seed"])

    def resolved_seed(self, explicit: bool) -> int:
        if explicit or self.config_seed is None:
            return self.seed
        return self.config_seed

    def client(self) -> httpx.Client:
        if self.server:
            return httpx.Client(base_url=self.server, timeout=None)
        # In-process transport: same HTTP surface, no running server needed.
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            from starlette.testclient import TestClient

        return TestClient(create_app(), raise_server_exceptions=False)


pass_state = click.make_pass_decorator(CliState)


def _explicit_params(ctx: click.Context) -> dict:
    from click.core import ParameterSource

    explicit = {}
    for name, value in ctx.params.items():
        if ctx.get_parameter_source(name) == ParameterSource.COMMANDLINE:
            explicit[name] = value
    return explicit


def _build_payload(ctx: click.Context, state: CliState, seeded: bool = True) -> dict:
    """Config-file params overridden by explicitly given CLI flags."""
    payload = dict(state.config_params)
    explicit = _explicit_params(ctx)
    payload.update(explicit)
    if seeded:
        root = ctx.find_root()
        seed_explicit = (
            root.get_parameter_source("seed") == click.core.ParameterSource.COMMANDLINE
        )
        payload.setdefault("seed", state.resolved_seed(seed_explicit))
        if seed_explicit:
            payload["seed"] = state.seed
    return payload


def _post(state: CliState, path: str, payload: dict) -> dict:
    with state.client() as client:
        try:
            response = client.post(path, json=payload)
        except httpx.HTTPError as exc:
            click.echo(f"error: cannot reach service: {exc}", err=True)
            sys.exit(2)
    if response.status_code in (400, 422):
        detail = response.json().get("detail")
        click.echo(f"error: invalid request: {json.dumps(detail)}", err=True)
        sys.exit(2)
    if response.status_code != 200:
        click.echo(f"error: service returned {response.status_code}", err=True)
        sys.exit(2)
    return response.json()


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _write_artifacts(
    state: CliState,
    command: str,
    seed,
    config_echo: dict,
    files: dict[str, str],
    stdout_text: str,
) -> None:
    state.out_dir.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for name, text in files.items():
        data = text.encode()
        (state.out_dir / name).write_bytes(data)
        hashes[name] = _sha256(data)
    manifest = {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "command": command,
        "seed": seed,
        "config": config_echo,
        "artifacts": hashes,
    }
    (state.out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    )
    click.echo(stdout_text, nl=False)


def _emit_suite(state: CliState, command: str, stem: str, payload: dict, body: dict) -> None:
    summary_doc = {
        "name": body["name"],
        "passed": body["passed"],
        "violations": body["violations"],
        "total": body["total"],
        "summary": body["summary"],
        "config": payload,
    }
    summary_text = json.dumps(summary_doc, sort_keys=True, indent=2) + "\n"
    files = {f"{stem}.csv": body["csv"], f"{stem}-summary.json": summary_text}
    stdout_text = body["csv"] if state.fmt == "csv" else summary_text
    _write_artifacts(state, command, payload.get("seed"), payload, files, stdout_text)
    click.echo(
        f"[{body['name']}] passed={body['passed']} violations={body['violations']}"
        f"/{body['total']} -> {state.out_dir}",
        err=True,
    )
    sys.exit(0 if body["passed"] else 1)


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Root seed for all randomness.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out-dir", type=click.Path(file_okay=False), default="runs", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="csv", show_default=True)
@click.option("--server", default=None, help="Base URL of a running service (default: in-process).")
@click.pass_context
def main(ctx, seed, config_path, out_dir, fmt, server):
    """Simulation lab for generative-error bounds and abstention-aware grading."""
    ctx.obj = CliState(seed, config_path, out_dir, fmt, server)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the verification service."""
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port)


@main.group()
def simulate():
    """Repeated-world simulation harnesses."""


@simulate.command("arbitrary-facts")
@click.option("--n-prompts", type=int, default=5_000_000, show_default=True)
@click.option("--response-set-size", type=int, default=366, show_default=True)
@click.option("--alpha", type=float, default=1.0, show_default=True)
@click.option("--n-training", type=int, default=1_000_000, show_default=True)
@click.option("--trials", type=int, default=300, show_default=True)
@click.option("--learner", default="calibrated-memorizer", show_default=True)
@click.option("--engine", type=click.Choice(["auto", "dense", "grouped"]), default="auto")
@click.option("--gamma", type=float, default=0.01, show_default=True)
@click.pass_context
@pass_state
def simulate_arbitrary_facts(state, ctx, **_):
    """Singleton-rate bounds over fresh pattern-free worlds."""
    payload = _build_payload(ctx, state)
    body = _post(state, "/simulate/arbitrary-facts", payload)
    _emit_suite(state, "simulate arbitrary-facts", "arbitrary-facts", payload, body)


@main.group()
def verify():
    """Property suites for the certified inequalities."""


@verify.command("main-bound")
@click.option("--instances", type=int, default=1000, show_default=True)
@click.pass_context
@pass_state
def verify_main_bound(state, ctx, **_):
    """Error rate versus thresholded-classifier misclassification."""
    payload = _build_payload(ctx, state)
    body = _post(state, "/verify/main-bound", payload)
    _emit_suite(state, "verify main-bound", "main-bound", payload, body)


@verify.command("good-turing")
@click.option("--variant", type=click.Choice(["abstention", "classic"]), default="abstention")
@click.option("--trials", type=int, default=1000, show_default=True)
@click.option("--gamma", type=float, default=None)
@click.option("--n-training", type=int, default=1_000_000, show_default=True)
@click.option("--n-prompts", type=int, default=5_000_000, show_default=True)
@click.option("--alpha", type=float, default=0.9, show_default=True)
@click.option("--response-set-size", type=int, default=366, show_default=True)
@click.option("--n-samples", type=int, default=100_000, show_default=True)
@click.option("--zipf-exponent", type=float, default=1.1, show_default=True)
@click.option("--support-size", type=int, default=10_000, show_default=True)
@click.pass_context
@pass_state
def verify_good_turing(state, ctx, **kwargs):
    """Concentration of singleton estimates around the missing mass."""
    payload = _build_payload(ctx, state)
    body = _post(state, "/verify/good-turing", payload)
    variant = payload.get("variant", "abstention")
    _emit_suite(state, "verify good-turing", f"good-turing-{variant}", payload, body)


@verify.command("multiple-choice")
@click.option("--instances", type=int, default=500, show_default=True)
@click.pass_context
@pass_state
def verify_multiple_choice(state, ctx, **_):
    """Threshold-sweep bound for single-valid-response universes."""
    payload = _build_payload(ctx, state)
    body = _post(state, "/verify/multiple-choice", payload)
    _emit_suite(state, "verify multiple-choice", "multiple-choice", payload, body)


@verify.command("misaligned")
@click.option("--trials", type=int, default=10_000, show_default=True)
@click.pass_context
@pass_state
def verify_misaligned(state, ctx, **_):
    """Right/wrong grading never rewards abstention."""
    payload = _build_payload(ctx, state)
    body = _post(state, "/verify/misaligned", payload)
    _emit_suite(state, "verify misaligned", "misaligned", payload, body)


@verify.command("crypto")
@click.option("--message-count", type=int, default=101, show_default=True)
@click.option("--random-models", type=int, default=50, show_default=True)
@click.pass_context
@pass_state
def verify_crypto(state, ctx, **_):
    """Hardness floor on pad-encrypted decryption prompts."""
    payload = _build_payload(ctx, state)
    body = _post(state, "/verify/crypto", payload)
    _emit_suite(state, "verify crypto", "crypto", payload, body)


@main.group()
def demo():
    """Small fully-enumerable demonstrations."""


@demo.command("trigram")
@click.option("--weight-grid", type=int, default=21, show_default=True)
@click.pass_context
@pass_state
def demo_trigram(state, ctx, **_):
    """Two-token-window universe where every constrained model errs half the time."""
    payload = _build_payload(ctx, state, seeded=False)
    body = _post(state, "/demo/trigram", payload)
    _emit_suite(state, "demo trigram", "trigram", payload, body)


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--target", "targets", multiple=True, help="Decimal confidence target; repeatable.")
@click.option("--failure-probability", type=float, default=0.05, show_default=True)
@pass_state
def grade(state, input_path, targets, failure_probability):
    """Score a JSONL record file under one grader per confidence target."""
    text = Path(input_path).read_text()
    payload = {
        "records_jsonl": text,
        "targets": list(targets) or ["0", "0.5", "0.75", "0.9"],
        "failure_probability": failure_probability,
    }
    body = _post(state, "/grade", payload)
    summary_doc = {
        "reports": body["reports"],
        "audit": body["audit"],
        "input_sha256": _sha256(text.encode()),
    }
    summary_text = json.dumps(summary_doc, sort_keys=True, indent=2) + "\n"
    files = {
        "scores.csv": body["scores_csv"],
        "grade-audit.csv": body["audit_csv"],
        "grade-summary.json": summary_text,
    }
    stdout_text = body["scores_csv"] if state.fmt == "csv" else summary_text
    config_echo = {
        "input_sha256": summary_doc["input_sha256"],
        "targets": payload["targets"],
        "failure_probability": failure_probability,
    }
    _write_artifacts(state, "grade", None, config_echo, files, stdout_text)
    click.echo(f"[grade] {len(body['reports'])} graders -> {state.out_dir}", err=True)
    sys.exit(0)


@main.command()
@click.option(
    "--run",
    "runs",
    multiple=True,
    required=True,
    help="TARGET=PATH pair mapping a confidence target to its JSONL records; repeatable.",
)
@click.option("--failure-probability", type=float, default=0.05, show_default=True)
@pass_state
def audit(state, runs, failure_probability):
    """Audit per-target runs for behavioral calibration."""
    run_map = {}
    echo = {}
    for spec in runs:
        target, sep, path = spec.partition("=")
        if not sep:
            raise click.UsageError(f"--run expects TARGET=PATH, got {spec!r}")
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise click.UsageError(f"cannot read run file {path}: {exc}")
        run_map[target] = text
        echo[target] = _sha256(text.encode())
    payload = {"runs": run_map, "failure_probability": failure_probability}
    body = _post(state, "/audit", payload)
    summary_text = json.dumps(body["audit"], sort_keys=True, indent=2) + "\n"
    files = {"audit.csv": body["csv"], "audit-summary.json": summary_text}
    stdout_text = body["csv"] if state.fmt == "csv" else summary_text
    config_echo = {"runs": echo, "failure_probability": failure_probability}
    _write_artifacts(state, "audit", None, config_echo, files, stdout_text)
    click.echo(f"[audit] calibrated={body['passed']} -> {state.out_dir}", err=True)
    sys.exit(0)


if __name__ == "__main__":
    main()
