"""HTTP surface of the verification service."""

from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from generr.service import create_app


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


FIXTURE_JSONL = "\n".join(
    [
        '{"item_id": "a", "abstain": false, "correct": true, "confidence": 0.95}',
        '{"item_id": "b", "abstain": false, "correct": true, "confidence": 0.8}',
        '{"item_id": "c", "abstain": false, "correct": false, "confidence": 0.6}',
        '{"item_id": "d", "abstain": false, "correct": false, "confidence": 0.7}',
        '{"item_id": "e", "abstain": true, "confidence": 0.2}',
        '{"item_id": "f", "abstain": true}',
    ]
)


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"


def test_verify_main_bound_endpoint(client):
    r = client.post("/verify/main-bound", json={"instances": 40, "seed": 3})
    assert r.status_code == 200
    body = r.json()
    assert body["passed"] and body["violations"] == 0
    assert body["csv"].splitlines()[0] == "seed,err,cerr,delta,ratio_term,holds"
    assert len(body["csv"].splitlines()) == 41


def test_verify_misaligned_deterministic(client):
    payload = {"trials": 200, "seed": 5}
    a = client.post("/verify/misaligned", json=payload).json()
    b = client.post("/verify/misaligned", json=payload).json()
    assert a == b
    assert a["passed"]


def test_verify_good_turing_classic_endpoint(client):
    r = client.post(
        "/verify/good-turing",
        json={"variant": "classic", "trials": 100, "n_samples": 2000, "support_size": 300},
    )
    assert r.status_code == 200
    assert r.json()["name"] == "good-turing-classic"


def test_verify_good_turing_abstention_small(client):
    r = client.post(
        "/verify/good-turing",
        json={
            "trials": 100,
            "n_training": 500,
            "n_prompts": 1000,
            "alpha": 0.8,
            "response_set_size": 5,
        },
    )
    assert r.status_code == 200
    body = r.json()
    assert body["name"] == "good-turing-abstention"
    assert body["csv"].splitlines()[0] == "trials,gamma,bound,violations,pass"


def test_verify_multiple_choice_endpoint(client):
    body = client.post("/verify/multiple-choice", json={"instances": 50, "seed": 2}).json()
    assert body["passed"]


def test_verify_crypto_endpoint(client):
    body = client.post(
        "/verify/crypto", json={"message_count": 101, "seed": 1, "random_models": 10}
    ).json()
    assert body["passed"]
    assert body["summary"]["baseline_max_abs_delta_z"] == 0.0


def test_demo_trigram_endpoint(client):
    body = client.post("/demo/trigram", json={}).json()
    assert body["passed"]
    assert body["summary"]["family_opt"] == 0.5


def test_simulate_arbitrary_facts_endpoint(client):
    body = client.post(
        "/simulate/arbitrary-facts",
        json={
            "n_prompts": 200,
            "response_set_size": 5,
            "alpha": 1.0,
            "n_training": 100,
            "trials": 100,
            "seed": 4,
        },
    ).json()
    assert body["passed"]
    assert body["total"] == 100


def test_simulate_rejects_unknown_learner(client):
    r = client.post(
        "/simulate/arbitrary-facts",
        json={
            "n_prompts": 50,
            "response_set_size": 4,
            "n_training": 10,
            "trials": 100,
            "learner": "who",
        },
    )
    assert r.status_code == 400
    assert "unknown learner" in r.json()["detail"]


def test_unknown_field_is_named(client):
    r = client.post("/verify/main-bound", json={"instances": 10, "instanecs": 5})
    assert r.status_code == 422
    assert "instanecs" in r.text


def test_grade_endpoint_exact_totals(client):
    body = client.post(
        "/grade", json={"records_jsonl": FIXTURE_JSONL, "targets": ["0", "0.5", "0.75", "0.9"]}
    ).json()
    totals = [rep["total_score"] for rep in body["reports"]]
    assert totals == ["2", "0", "-4", "-16"]
    penalties = [rep["penalty"] for rep in body["reports"]]
    assert penalties == ["0", "1", "3", "9"]
    assert body["audit"]["rows"][0]["accuracy_among_answered"] == 0.5


def test_grade_endpoint_reports_bad_lines(client):
    bad = FIXTURE_JSONL + "\n" + '{"item_id": "z", "abstain": true, "correct": false}'
    r = client.post("/grade", json={"records_jsonl": bad, "targets": ["0"]})
    assert r.status_code == 400
    problems = r.json()["detail"]["problems"]
    assert problems[0]["line"] == 7


def test_audit_endpoint(client):
    runs = {
        "0": '{"item_id": "a", "abstain": false, "correct": true}',
        "0.9": '{"item_id": "a", "abstain": true}',
    }
    body = client.post("/audit", json={"runs": runs}).json()
    assert body["passed"]
    rows = body["audit"]["rows"]
    assert [row["target"] for row in rows] == ["0", "9/10"]
