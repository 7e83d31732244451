import math
import warnings

import numpy as np
import pytest

import optembed as oe

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from fastapi.testclient import TestClient

from optembed.service.app import app

from helpers import TRUTH_TREE, section3_network

client = TestClient(app)


@pytest.fixture(scope="module")
def net_json():
    return oe.predictor_json(section3_network(np.random.default_rng(21)))


def test_health():
    r = client.get("/health")
    assert r.status_code == 200 and r.json()["status"] == "ok"


def test_embed_counts(net_json):
    r = client.post("/embed", json={"predictor": net_json, "inputs": 10})
    assert r.status_code == 200
    body = r.json()
    assert (body["vars"], body["cons"], body["outputs"]) == (44, 34, 2)
    assert body["artifact"].startswith("{")


def test_embed_lp_artifact(net_json):
    r = client.post(
        "/embed",
        json={"predictor": net_json, "inputs": 10, "relu": "bigm", "format": "lp"},
    )
    assert r.status_code == 200
    assert r.json()["artifact"].startswith("Minimize")


def test_embed_domain_error_is_400(net_json):
    r = client.post(
        "/embed",
        json={
            "predictor": net_json,
            "inputs": [["-inf", "inf"]] * 10,
            "relu": "bigm",
            "format": "json",
        },
    )
    assert r.status_code == 400
    assert r.json()["error"] == "UnboundedInput"


def test_embed_validation_error_is_422(net_json):
    r = client.post("/embed", json={"predictor": net_json})
    assert r.status_code == 422


def test_check_deterministic(net_json):
    req = {"predictor": net_json, "inputs": 10, "samples": 20, "tol": 1e-8, "seed": 7}
    a = client.post("/check", json=req).json()
    b = client.post("/check", json=req).json()
    assert a == b
    assert a["ok"] and a["max_violation"] <= 1e-8


def test_check_graybox(net_json):
    r = client.post(
        "/check",
        json={"predictor": net_json, "inputs": 10, "formulation": "graybox", "samples": 10},
    )
    assert r.status_code == 200 and r.json()["ok"]


def test_bounds_relu():
    r = client.post(
        "/bounds", json={"predictor": {"type": "relu"}, "inputs": [[-1.0, 1.0]]}
    )
    assert r.json()["intervals"] == [[0.0, 1.0]]


def test_bounds_truth_tree():
    r = client.post(
        "/bounds", json={"predictor": oe.predictor_json(TRUTH_TREE), "inputs": 2}
    )
    assert r.json()["intervals"] == [[-2.0, 4.0]]


def test_bounds_sigmoid_point():
    r = client.post(
        "/bounds", json={"predictor": {"type": "sigmoid"}, "inputs": [[0.0, 0.0]]}
    )
    assert r.json()["intervals"] == [[0.5, 0.5]]


def test_bounds_unbounded_softplus_encodes_inf():
    r = client.post(
        "/bounds", json={"predictor": {"type": "softplus"}, "inputs": [[0.0, "inf"]]}
    )
    assert r.json()["intervals"] == [[math.log(2.0), "inf"]]


def test_oracle_eval_jac_hess():
    sig = {"predictor": {"type": "sigmoid"}, "x": [0.0]}
    assert client.post("/oracle", json={**sig, "mode": "eval"}).json()["rows"] == [[0.5]]
    assert client.post("/oracle", json={**sig, "mode": "jac"}).json()["rows"] == [[0.25]]
    aff = {"predictor": {"type": "affine", "A": [[1.0, 2.0]], "b": [0.0]}, "x": [0.0, 0.0]}
    assert client.post("/oracle", json={**aff, "mode": "jac"}).json()["rows"] == [[1.0, 2.0]]
    r = client.post("/oracle", json={**aff, "mode": "hess", "lam": [3.0]})
    assert r.json()["rows"] == [[0.0, 0.0], [0.0, 0.0]]


def test_oracle_hess_requires_lam():
    r = client.post(
        "/oracle", json={"predictor": {"type": "sigmoid"}, "x": [0.0], "mode": "hess"}
    )
    assert r.status_code == 422


def test_oracle_tree_rejected():
    r = client.post(
        "/oracle",
        json={"predictor": oe.predictor_json(TRUTH_TREE), "x": [0.5, 0.5], "mode": "eval"},
    )
    assert r.status_code == 400
    assert r.json()["error"] == "NonDifferentiablePredictor"


def test_predict_and_dims(net_json):
    x = list(np.random.default_rng(5).uniform(0, 1, 10))
    r = client.post("/predict", json={"predictor": net_json, "x": x})
    assert r.status_code == 200 and len(r.json()["y"]) == 2
    d = client.post("/dims", json={"predictor": net_json}).json()
    assert (d["n_in"], d["n_out"]) == (10, 2)
    d = client.post("/dims", json={"predictor": {"type": "tanh"}}).json()
    assert (d["n_in"], d["n_out"]) == (None, None)


def test_parse_error_names_path():
    r = client.post("/predict", json={"predictor": {"type": "affine", "A": [[1]]}, "x": [0]})
    assert r.status_code == 400
    body = r.json()
    assert body["error"] == "ParseError" and "$.b" in body["detail"]
