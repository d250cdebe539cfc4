"""HTTP service: request/response models, status-code mapping, determinism."""
from __future__ import annotations

import json
import math
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from conftest import RUNNING_PROBABILITY
from timedmc.service import app

MODELS = Path(__file__).resolve().parent.parent / "models"


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


@pytest.fixture(scope="module")
def ctmc_doc():
    return json.loads((MODELS / "branching_ctmc.json").read_text())


@pytest.fixture(scope="module")
def dta_doc():
    return json.loads((MODELS / "reach_dta.json").read_text())


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_verify_returns_report(client, ctmc_doc, dta_doc):
    response = client.post("/verify", json={"ctmc": ctmc_doc, "dta": dta_doc})
    assert response.status_code == 200
    body = response.json()
    assert body["method"] == "single_clock"
    assert body["acceptance"] == "finite"
    assert body["probability"] == pytest.approx(RUNNING_PROBABILITY, abs=1e-9)
    assert "witness" not in body
    assert "holds" not in body


def test_verify_muller_pair(client):
    payload = {
        "ctmc": json.loads((MODELS / "cycle_ctmc.json").read_text()),
        "dta": json.loads((MODELS / "two_family_muller_dta.json").read_text()),
    }
    response = client.post("/verify", json=payload)
    assert response.status_code == 200
    body = response.json()
    assert body["acceptance"] == "muller"
    assert body["probability"] == pytest.approx(1.0 - math.exp(-1.0), abs=1e-6)


def test_verify_simulate_is_deterministic(client, ctmc_doc, dta_doc):
    payload = {
        "ctmc": ctmc_doc,
        "dta": dta_doc,
        "method": "simulate",
        "samples": 20_000,
        "seed": 11,
    }
    first = client.post("/verify", json=payload).json()
    second = client.post("/verify", json=payload).json()
    first.pop("timings_ms"), second.pop("timings_ms")
    assert first == second
    lo, hi = first["confidence_interval"]
    assert lo <= first["probability"] <= hi


def test_verify_qualitative(client, ctmc_doc, dta_doc):
    response = client.post(
        "/verify", json={"ctmc": ctmc_doc, "dta": dta_doc, "qualitative": "positive"}
    )
    assert response.status_code == 200
    body = response.json()
    assert "probability" not in body
    assert body["holds"] is True
    assert isinstance(body["witness"], list) and body["witness"]


def test_option_conflict_maps_to_400(client, ctmc_doc, dta_doc):
    response = client.post(
        "/verify", json={"ctmc": ctmc_doc, "dta": dta_doc, "acceptance": "muller"}
    )
    assert response.status_code == 400
    assert "declares finite acceptance" in response.json()["detail"]


def test_unknown_method_maps_to_400(client, ctmc_doc, dta_doc):
    response = client.post(
        "/verify", json={"ctmc": ctmc_doc, "dta": dta_doc, "method": "bogus"}
    )
    assert response.status_code == 400


def test_model_validation_maps_to_422(client, ctmc_doc, dta_doc):
    broken = dict(ctmc_doc)
    broken["transitions"] = ctmc_doc["transitions"][:2]
    response = client.post("/verify", json={"ctmc": broken, "dta": dta_doc})
    assert response.status_code == 422
    assert "sum to" in response.json()["detail"]


def test_request_schema_violation_maps_to_422(client, ctmc_doc):
    response = client.post("/verify", json={"ctmc": ctmc_doc})
    assert response.status_code == 422


def test_non_convergence_maps_to_409(client, ctmc_doc, dta_doc):
    response = client.post(
        "/verify",
        json={
            "ctmc": ctmc_doc,
            "dta": dta_doc,
            "method": "grid",
            "grid_step": 0.2,
            "epsilon": 1e-14,
            "max_sweeps": 1,
        },
    )
    assert response.status_code == 409
    assert "did not converge" in response.json()["detail"]


def test_time_bound_with_muller_maps_to_400(client):
    payload = {
        "ctmc": json.loads((MODELS / "cycle_ctmc.json").read_text()),
        "dta": json.loads((MODELS / "two_family_muller_dta.json").read_text()),
        "time_bound": 1.0,
    }
    response = client.post("/verify", json=payload)
    assert response.status_code == 400


def test_nondeterministic_dta_maps_to_422(client, ctmc_doc, dta_doc):
    overlapping = json.loads(json.dumps(dta_doc))
    overlapping["edges"].append(
        {
            "from": "q0",
            "symbol": ["a"],
            "guard": [{"clock": "x", "op": "<", "const": 1}],
            "to": "q1",
        }
    )
    response = client.post("/verify", json={"ctmc": ctmc_doc, "dta": overlapping})
    assert response.status_code == 422
