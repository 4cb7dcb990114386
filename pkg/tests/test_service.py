"""HTTP facade: request validation, payload shapes, non-finite handling."""
import math

import pytest
from fastapi.testclient import TestClient

from divbarrier import __version__
from divbarrier.goldens import BASE_CONFIG
from divbarrier.service import app

BASE = dict(BASE_CONFIG, beta1=1.0, beta2=1.0)


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    doc = client.get("/health").json()
    assert doc == {"status": "ok", "version": __version__}


def test_solve_endpoint(client):
    r = client.post("/solve", json={"params": BASE})
    assert r.status_code == 200
    doc = r.json()
    assert doc["w0"] == pytest.approx(0.6744453, abs=5e-6)
    assert doc["bstar"] == pytest.approx(1.951939, abs=5e-5)
    assert doc["params"]["beta1"] == 1.0


def test_non_finite_thresholds_serialize_as_null(client):
    cfg = dict(BASE, mu1=0.2, beta1=0.05, beta2=0.05)
    doc = client.post("/solve", json={"params": cfg}).json()
    assert doc["regime"] == "Line1FullCession"
    assert doc["w1"] is None
    assert doc["w2"] is not None and math.isfinite(doc["w2"])


def test_classify_endpoint(client):
    doc = client.post("/classify", json={"params": BASE}).json()
    assert doc["regime"] == "GeneralInterior_NeqCase"
    assert len(doc["psi_coeffs"]) == 5


def test_eval_endpoint(client):
    r = client.post("/eval", json={"params": BASE,
                                   "x": [0.0, 0.3, 1.0, 2.5]})
    assert r.status_code == 200
    pts = r.json()
    assert pts[0]["g"] == 0.0
    assert pts[0]["g_prime"] is None  # +inf at the origin maps to null
    assert pts[2]["pi1"] == pytest.approx(1.0)
    assert client.post("/eval", json={"params": BASE,
                                      "x": [-1.0]}).status_code == 422


def test_eval_degenerate_strategy_is_null(client):
    cfg = dict(BASE, delta=100.0)
    pts = client.post("/eval", json={"params": cfg, "x": [1.0]}).json()
    assert pts[0]["g"] == pytest.approx(0.7)
    assert pts[0]["pi1"] is None and pts[0]["entropy_rate"] is None


def test_verify_endpoint(client):
    doc = client.post("/verify", json={"params": dict(BASE, delta=100.0),
                                       "grid_n": 64}).json()
    assert doc["passed"] is True
    doc = client.post("/verify", json={"params": BASE, "grid_n": 64}).json()
    assert doc["passed"] is False


def test_simulate_endpoint(client):
    req = {"params": BASE, "x0": 1.0, "dt": 0.01, "n_paths": 200,
           "t_max": 2.0, "seed": 3, "antithetic": True}
    doc = client.post("/simulate", json=req).json()
    assert doc["n_paths"] == 200
    assert math.isfinite(doc["j_hat"]) and doc["std_err"] > 0
    assert doc["g_exact"] == pytest.approx(6.3473, abs=1e-3)
    assert doc["l1_mean"] is None


def test_simulate_two_line_endpoint(client):
    req = {"params": BASE, "mode": "TwoLine", "x1": 0.6, "x2": 0.4,
           "dt": 0.01, "n_paths": 100, "t_max": 2.0, "dtype": "float64"}
    doc = client.post("/simulate", json=req).json()
    assert doc["l1_mean"] is not None and doc["l2_mean"] is not None


def test_simulate_validation(client):
    req = {"params": BASE, "x0": 1.0, "policy_pi": [0.5, 0.5],
           "policy_theta": [0.0, 0.0]}
    assert client.post("/simulate", json=req).status_code == 422
    req = {"params": BASE, "mode": "TwoLine", "x0": 1.0}
    assert client.post("/simulate", json=req).status_code == 422


def test_bad_params_rejected(client):
    assert client.post("/solve", json={"params": dict(BASE, sigma1=-1.0)}
                       ).status_code == 422
    missing = {k: v for k, v in BASE.items() if k != "mu1"}
    assert client.post("/solve", json={"params": missing}).status_code == 422
    assert client.post("/solve", json={"params": dict(BASE, beta1=-1.0)}
                       ).status_code == 422


def test_reproduce_endpoint(client):
    doc = client.get("/reproduce/ambiguity").json()
    assert doc["passed"] is True and len(doc["rows"]) == 4
    assert all(row["ok"] for row in doc["rows"])
    assert client.get("/reproduce/nope").status_code == 404
