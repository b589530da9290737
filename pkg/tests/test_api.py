import numpy as np
from fastapi.testclient import TestClient

from lago.api import create_app
from lago.data import from_center_blocks
from lago.estimation import fit_gee
from lago.links import Link
from lago.store import TrialStore

CONFIG = {
    "bounds": {"lower": [0.0, 0.0], "upper": [2.0, 8.0]},
    "link": "logit",
    "cost": {"kind": "linear", "unit_costs": [8.0, 2.0]},
    "theta": 0.8,
    "z_ref": [0.0],
}


def _client(tmp_path, name="store"):
    store = TrialStore(str(tmp_path / name))
    return TestClient(create_app(store)), store


def _rows(rng, stage, n_centers=6, n_per=8, effects=(0.25, 0.1)):
    rows = []
    for j in range(n_centers):
        ctrl = j % 2 == 0
        a = [0.0, 0.0] if ctrl else [float(rng.uniform(0.3, 2.0)),
                                     float(rng.uniform(1.0, 8.0))]
        z = [float(rng.normal())]
        eta = 0.1 + effects[0] * a[0] + effects[1] * a[1] - 0.2 * z[0]
        mu = 1 / (1 + np.exp(-eta))
        for i in range(n_per):
            rows.append({"center_id": f"s{stage}c{j}", "arm":
                         "control" if ctrl else "intervention",
                         "y": float(mu + rng.normal(0, 0.2)), "a": a, "z": z})
    return rows


def test_create_append_fit_matches_library(tmp_path):
    client, _ = _client(tmp_path)
    r = client.post("/api/trials", json=dict(CONFIG, trial_id="t1"))
    assert r.status_code == 201 and r.json()["schema_version"] == 1

    rng = np.random.default_rng(5)
    rows = _rows(rng, 1)
    r = client.post("/api/trials/t1/stages/1/rows", json={"rows": rows})
    assert r.status_code == 200 and r.json()["appended"] == len(rows)

    r = client.get("/api/trials/t1/fit")
    assert r.status_code == 200
    doc = r.json()
    assert doc["schema_version"] == 1

    blocks = {}
    for row in rows:
        blocks.setdefault(row["center_id"],
                          (row["arm"] == "intervention", row["a"], row["z"], []))
        blocks[row["center_id"]][3].append(row["y"])
    ds = from_center_blocks([(1, cid, arm, a, z, ys)
                             for cid, (arm, a, z, ys) in blocks.items()])
    lib = fit_gee(ds, Link.LOGIT)
    api_beta = np.array([doc["fit"]["beta"]["intercept"],
                         *doc["fit"]["beta"]["effects"],
                         *doc["fit"]["beta"]["covariate_effects"]])
    assert np.max(np.abs(api_beta - lib.beta_hat.as_array())) < 1e-12
    kinds = {t["kind"] for t in doc["tests"]}
    assert {"wald_chisq", "two_sample_z", "adjusted_gamma"} <= kinds


def test_what_if_monotone_and_pure(tmp_path):
    client, store = _client(tmp_path)
    client.post("/api/trials", json=dict(CONFIG, trial_id="t1"))
    rng = np.random.default_rng(7)
    client.post("/api/trials/t1/stages/1/rows", json={"rows": _rows(rng, 1)})

    path = store._path("t1")
    before = open(path, "rb").read()
    c8 = client.get("/api/trials/t1/recommend", params={"theta": 0.8}).json()
    c9 = client.get("/api/trials/t1/recommend", params={"theta": 0.9}).json()
    assert c9["recommendation"]["cost"] >= c8["recommendation"]["cost"]
    # cost switch re-dispatches
    cub = client.get("/api/trials/t1/recommend", params={
        "theta": 0.8, "cost": "cubic:0.05,-1.19,10,10;0.1,-0.7,2,0"}).json()
    assert cub["recommendation"]["method"] in ("grid_search", "fallback_upper_bounds")
    after = open(path, "rb").read()
    assert before == after  # what-if queries never mutate the store


def test_lock_ordering_and_immutability(tmp_path):
    client, _ = _client(tmp_path)
    client.post("/api/trials", json=dict(CONFIG, trial_id="t1"))
    rng = np.random.default_rng(11)
    client.post("/api/trials/t1/stages/1/rows", json={"rows": _rows(rng, 1)})

    r = client.post("/api/trials/t1/stages/2/lock")
    assert r.status_code == 409  # out of order

    r = client.post("/api/trials/t1/stages/2/rows", json={"rows": _rows(rng, 2)})
    assert r.status_code == 409  # stage 2 not open until stage 1 locks

    r = client.post("/api/trials/t1/stages/1/lock")
    assert r.status_code == 200
    snap = r.json()["snapshot"]
    assert snap["next_stage_recommendation"]["schema_version"] == 1

    r = client.post("/api/trials/t1/stages/1/rows", json={"rows": _rows(rng, 1)})
    assert r.status_code == 409  # locked rows immutable
    r = client.post("/api/trials/t1/stages/1/lock")
    assert r.status_code == 409  # double lock

    r = client.post("/api/trials/t1/stages/2/rows", json={"rows": _rows(rng, 2)})
    assert r.status_code == 200


def test_validation_errors_carry_field_paths(tmp_path):
    client, _ = _client(tmp_path)
    r = client.post("/api/trials", json={"link": "logit", "cost": CONFIG["cost"],
                                         "theta": 0.8})
    assert r.status_code == 400 and r.json()["field"] == "bounds"

    client.post("/api/trials", json=dict(CONFIG, trial_id="t1"))
    bad = {"rows": [{"center_id": "c1", "arm": "treatment", "y": 1.0,
                     "a": [1.0, 2.0], "z": [0.0]}]}
    r = client.post("/api/trials/t1/stages/1/rows", json=bad)
    assert r.status_code == 400
    assert r.json()["field"] == "rows[0].arm"

    bad = {"rows": [{"center_id": "c1", "arm": "control", "y": 1.0,
                     "a": [1.0, 0.0], "z": [0.0]}]}
    r = client.post("/api/trials/t1/stages/1/rows", json=bad)
    assert r.status_code == 400 and "zero" in r.json()["error"]


def test_unknown_trial_404(tmp_path):
    client, _ = _client(tmp_path)
    assert client.get("/api/trials/nope").status_code == 404
    assert client.get("/api/trials/nope/fit").status_code == 404


def test_persistence_round_trip(tmp_path):
    client, store = _client(tmp_path)
    client.post("/api/trials", json=dict(CONFIG, trial_id="t1"))
    rng = np.random.default_rng(13)
    client.post("/api/trials/t1/stages/1/rows", json={"rows": _rows(rng, 1)})
    client.post("/api/trials/t1/stages/1/lock")
    state1 = client.get("/api/trials/t1").json()

    # a fresh service over the same directory reproduces the state exactly
    client2 = TestClient(create_app(TrialStore(str(tmp_path / "store"))))
    state2 = client2.get("/api/trials/t1").json()
    assert state1 == state2
    assert state2["locked_stages"] == [1]
    assert state2["locks"]["1"]["next_stage_recommendation"]["package"]


def test_confset_and_bands_endpoints(tmp_path):
    client, _ = _client(tmp_path)
    client.post("/api/trials", json=dict(CONFIG, trial_id="t1"))
    rng = np.random.default_rng(17)
    client.post("/api/trials/t1/stages/1/rows", json={"rows": _rows(rng, 1, n_centers=10)})

    cs = client.get("/api/trials/t1/confset", params={"increment": 0.5}).json()
    assert cs["total_grid_points"] == 5 * 17
    assert cs["member_count"] == len(cs["members"])

    cb = client.get("/api/trials/t1/bands", params={"increment": 1.0}).json()
    assert len(cb["entries"]) == 3 * 9
    for e in cb["entries"]:
        assert e["band_lower"] <= e["ci_lower"] + 1e-12
        assert e["band_upper"] >= e["ci_upper"] - 1e-12
    assert cb["multiplier"] > 1.96


def test_duplicate_trial_creation_conflicts(tmp_path):
    client, _ = _client(tmp_path)
    assert client.post("/api/trials", json=dict(CONFIG, trial_id="t1")).status_code == 201
    assert client.post("/api/trials", json=dict(CONFIG, trial_id="t1")).status_code == 409
