import json

import pytest
from fastapi.testclient import TestClient

from loadplan.datagen import generate_dataset
from loadplan.proxy import TrainingConfig, save_model, train_single
from loadplan.service import create_app

from conftest import instance_from_doc, t1_doc


@pytest.fixture(scope="module")
def t1_model_path(tmp_path_factory):
    inst = instance_from_doc(t1_doc())
    ds = generate_dataset(inst, n=24, seed=6, stage_time_limit=10)
    data = ds.to_training_data()
    cfg = TrainingConfig(seed=3, epochs=200, hidden_layers=2, hidden_dim=16, dropout=0.0)
    model, _ = train_single(data, cfg)
    path = tmp_path_factory.mktemp("model") / "t1_model.json"
    save_model(model, path)
    return str(path)


@pytest.fixture
def client(tmp_path, t1_model_path):
    app = create_app(store_dir=str(tmp_path / "store"), model_path=t1_model_path, solver_slots=2)
    return TestClient(app)


@pytest.fixture
def uploaded(client):
    r = client.post("/v1/instances", content=json.dumps(t1_doc()))
    assert r.status_code == 200
    return r.json()["id"]


def test_upload_and_fetch_instance(client, uploaded):
    r = client.get(f"/v1/instances/{uploaded}")
    assert r.status_code == 200
    assert {p["id"] for p in r.json()["sort_pairs"]} == {"s1", "s2"}


def test_upload_is_content_addressed(client):
    a = client.post("/v1/instances", content=json.dumps(t1_doc())).json()["id"]
    b = client.post("/v1/instances", content=json.dumps(t1_doc())).json()["id"]
    assert a == b


def test_solve_mip_returns_optimal_cost(client, uploaded):
    r = client.post(f"/v1/instances/{uploaded}/solve", json={"mode": "mip", "time_limit_s": 20})
    assert r.status_code == 200
    body = r.json()
    assert body["solution"]["metrics"]["cost"] == 150.0
    assert body["solution"]["metrics"]["hamming_to_reference"] == 1.0


def test_solve_ids_are_idempotent(client, uploaded):
    r1 = client.post(f"/v1/instances/{uploaded}/solve", json={"mode": "mip", "time_limit_s": 20})
    r2 = client.post(f"/v1/instances/{uploaded}/solve", json={"mode": "mip", "time_limit_s": 20})
    assert r1.json()["solution_id"] == r2.json()["solution_id"]
    assert r1.json()["solution"]["plan"] == r2.json()["solution"]["plan"]


def test_solution_fetch_roundtrip(client, uploaded):
    sid = client.post(
        f"/v1/instances/{uploaded}/solve", json={"mode": "greedy", "time_limit_s": 20}
    ).json()["solution_id"]
    r = client.get(f"/v1/solutions/{sid}")
    assert r.status_code == 200
    assert r.json()["mode"] == "greedy"


def test_whatif_identity_matches_base_proxy_solve(client, uploaded):
    base = client.post(
        f"/v1/instances/{uploaded}/solve", json={"mode": "proxy", "time_limit_s": 20}
    ).json()
    w = client.post(
        f"/v1/instances/{uploaded}/whatif", json={"global_scale": 1.0, "time_limit_s": 20}
    ).json()
    assert w["derived_instance_id"] == uploaded
    assert w["solution_id"] == base["solution_id"]
    assert w["solution"]["plan"]["y"] == base["solution"]["plan"]["y"]


def test_whatif_scale_and_overrides(client, uploaded):
    w = client.post(
        f"/v1/instances/{uploaded}/whatif",
        json={"global_scale": 1.1, "per_commodity_overrides": {"k3": 10.0}},
    )
    assert w.status_code == 200
    derived = client.get(f"/v1/instances/{w.json()['derived_instance_id']}").json()
    volumes = {c["id"]: c["volume"] for c in derived["commodities"]}
    assert volumes["k1"] == pytest.approx(66.0)
    assert volumes["k3"] == 10.0
    # what-if responses always carry a feasible plan plus restoration report
    assert w.json()["solution"]["restoration"] is not None


def test_compare_solution_with_itself(client, uploaded):
    sid = client.post(
        f"/v1/instances/{uploaded}/solve", json={"mode": "proxy", "time_limit_s": 20}
    ).json()["solution_id"]
    r = client.get("/v1/compare", params={"a": sid, "b": sid})
    assert r.status_code == 200
    body = r.json()
    assert body["delta"] == 0.0
    assert body["tv_step"] == 0.0
    assert body["cost_delta"] == 0.0


def test_compare_two_solutions(client, uploaded):
    mip = client.post(f"/v1/instances/{uploaded}/solve", json={"mode": "mip"}).json()
    w = client.post(f"/v1/instances/{uploaded}/whatif", json={"global_scale": 1.2}).json()
    r = client.get(
        "/v1/compare", params={"a": w["solution_id"], "b": mip["solution_id"]}
    )
    assert r.status_code == 200
    assert r.json()["tv_step"] >= 0.0


def test_compare_across_structures_422(client, uploaded):
    doc = t1_doc()
    doc["commodities"] = doc["commodities"][:1]
    doc["reference_plan"] = None
    other = client.post("/v1/instances", content=json.dumps(doc)).json()["id"]
    sid_a = client.post(f"/v1/instances/{uploaded}/solve", json={"mode": "mip"}).json()["solution_id"]
    sid_b = client.post(f"/v1/instances/{other}/solve", json={"mode": "mip"}).json()["solution_id"]
    r = client.get("/v1/compare", params={"a": sid_a, "b": sid_b})
    assert r.status_code == 422


def test_unknown_ids_404(client, uploaded):
    assert client.get("/v1/instances/ffff").status_code == 404
    assert client.get("/v1/solutions/ffff").status_code == 404
    assert client.get("/v1/compare", params={"a": "x", "b": "y"}).status_code == 404
    assert client.post("/v1/instances/ffff/solve", json={"mode": "mip"}).status_code == 404


def test_malformed_body_400(client, uploaded):
    assert client.post("/v1/instances", content=b"{nope").status_code == 400
    r = client.post(f"/v1/instances/{uploaded}/solve", json={"mode": "warp"})
    assert r.status_code == 400
    assert r.json()["fields"][0]["path"].endswith("mode")


def test_invalid_instance_400_names_field(client):
    doc = t1_doc()
    doc["commodities"][0]["volume"] = -4.0
    r = client.post("/v1/instances", content=json.dumps(doc))
    assert r.status_code == 400
    assert "volume" in r.json()["error"]


def test_whatif_unknown_override_422(client, uploaded):
    r = client.post(
        f"/v1/instances/{uploaded}/whatif", json={"per_commodity_overrides": {"zz": 1.0}}
    )
    assert r.status_code == 422


def test_whatif_negative_override_422(client, uploaded):
    r = client.post(
        f"/v1/instances/{uploaded}/whatif", json={"per_commodity_overrides": {"k1": -3.0}}
    )
    assert r.status_code == 422


def test_gdo_without_reference_422(client):
    doc = t1_doc()
    doc["reference_plan"] = None
    iid = client.post("/v1/instances", content=json.dumps(doc)).json()["id"]
    r = client.post(f"/v1/instances/{iid}/solve", json={"mode": "gdo"})
    assert r.status_code == 422


def test_busy_slots_409(tmp_path, t1_model_path):
    app = create_app(store_dir=str(tmp_path / "store2"), model_path=t1_model_path, solver_slots=1)
    client = TestClient(app)
    iid = client.post("/v1/instances", content=json.dumps(t1_doc())).json()["id"]
    assert app.state.solver_slots.acquire(blocking=False)
    try:
        r = client.post(f"/v1/instances/{iid}/solve", json={"mode": "mip"})
        assert r.status_code == 409
    finally:
        app.state.solver_slots.release()
    # after release the same request succeeds
    assert client.post(f"/v1/instances/{iid}/solve", json={"mode": "mip"}).status_code == 200


def test_model_upload_and_proxy_solve(tmp_path, t1_model_path):
    app = create_app(store_dir=str(tmp_path / "store3"), solver_slots=2)
    client = TestClient(app)
    iid = client.post("/v1/instances", content=json.dumps(t1_doc())).json()["id"]
    # no model yet
    assert client.post(f"/v1/instances/{iid}/solve", json={"mode": "proxy"}).status_code == 422
    with open(t1_model_path, "rb") as fh:
        assert client.post("/v1/models", content=fh.read()).status_code == 200
    assert client.post(f"/v1/instances/{iid}/solve", json={"mode": "proxy"}).status_code == 200


def test_openapi_served(client):
    r = client.get("/openapi.json")
    assert r.status_code == 200
    assert any(path.startswith("/v1/") for path in r.json()["paths"])
