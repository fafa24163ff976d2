import json
import math

import numpy as np
import pytest
from fastapi.testclient import TestClient

from icmse.designer import testfn_xi_1d as xi_1d
from icmse.service import CampaignStore, create_app


@pytest.fixture()
def client(tmp_path):
    store = CampaignStore(str(tmp_path / "campaigns"))
    app = create_app(store)
    with TestClient(app) as c:
        c.store = store
        yield c


def base_config(**kw):
    cfg = {"p": 1, "n_ini": 4, "n_seq": 5, "c": 0.55, "bifidelity": False,
           "method": "icmse", "restarts": 4, "seed": 7, "fit_restarts": 3}
    cfg.update(kw)
    return cfg


def observations_1d(n=5, c=0.55):
    xs = np.linspace(0.05, 0.95, n)
    out = []
    for x in xs:
        v = float(xi_1d(x))
        out.append({"x": [float(x)], "value": min(v, c), "censored": bool(v >= c)})
    return out


class TestCreateCampaign:
    def test_without_observations_returns_initial_design(self, client):
        r = client.post("/api/campaigns", json={"config": base_config()})
        assert r.status_code == 201
        doc = r.json()
        assert doc["status"] == "AwaitingObservation"
        assert len(doc["initial_design"]) == 4
        assert all(0.0 < v < 1.0 for row in doc["initial_design"] for v in row)

    def test_with_observations_becomes_ready(self, client):
        r = client.post("/api/campaigns", json={
            "config": base_config(),
            "initial_observations": observations_1d(),
        })
        assert r.status_code == 201
        doc = r.json()
        assert doc["status"] == "ReadyToPropose"
        assert doc["model_snapshot"] is not None

    def test_invalid_config_rejected_with_field(self, client):
        r = client.post("/api/campaigns", json={"config": base_config(n_ini=0)})
        assert r.status_code == 422
        body = r.json()
        assert body["code"] == "validation"

    def test_unknown_campaign_404(self, client):
        r = client.get("/api/campaigns/doesnotexist")
        assert r.status_code == 404
        assert r.json()["code"] == "not_found"


class TestObservations:
    def make_ready(self, client):
        r = client.post("/api/campaigns", json={
            "config": base_config(),
            "initial_observations": observations_1d(),
        })
        return r.json()["id"]

    def test_censored_value_normalized(self, client):
        cid = self.make_ready(client)
        r = client.post(f"/api/campaigns/{cid}/observations",
                        json={"x": [0.5], "value": 0.7, "censored": True})
        assert r.status_code == 200
        doc = r.json()
        assert doc["normalized"] is True
        assert doc["observations"][-1]["value"] == 0.55
        assert doc["observations"][-1]["censored"] is True

    def test_uncensored_above_limit_rejected(self, client):
        cid = self.make_ready(client)
        r = client.post(f"/api/campaigns/{cid}/observations",
                        json={"x": [0.5], "value": 0.7, "censored": False})
        assert r.status_code == 422
        assert r.json()["field"] == "value"

    def test_seq_token_conflict(self, client):
        cid = self.make_ready(client)
        body = {"x": [0.4], "value": 0.1, "censored": False, "seq_token": "t-1"}
        assert client.post(f"/api/campaigns/{cid}/observations", json=body).status_code == 200
        r = client.post(f"/api/campaigns/{cid}/observations", json=body)
        assert r.status_code == 409
        assert r.json()["code"] == "conflict"

    def test_unknown_id_404(self, client):
        r = client.post("/api/campaigns/nope/observations",
                        json={"x": [0.4], "value": 0.1})
        assert r.status_code == 404


class TestProposal:
    def make_ready(self, client):
        r = client.post("/api/campaigns", json={
            "config": base_config(),
            "initial_observations": observations_1d(6),
        })
        return r.json()["id"]

    def test_proposal_feasible_with_diagnostics(self, client):
        cid = self.make_ready(client)
        r = client.get(f"/api/campaigns/{cid}/proposal")
        assert r.status_code == 200
        prop = r.json()
        assert 0.0 <= prop["x_next"][0] <= 1.0
        assert "lambda" in prop["diagnostics"]

    def test_cached_until_new_observation(self, client):
        cid = self.make_ready(client)
        a = client.get(f"/api/campaigns/{cid}/proposal").json()
        b = client.get(f"/api/campaigns/{cid}/proposal").json()
        assert a["x_next"] == b["x_next"]
        # campaign is awaiting the response for the pending proposal
        assert client.get(f"/api/campaigns/{cid}").json()["status"] == "AwaitingObservation"
        client.post(f"/api/campaigns/{cid}/observations",
                    json={"x": a["x_next"], "value": 0.2, "censored": False})
        doc = client.get(f"/api/campaigns/{cid}").json()
        assert doc["status"] == "ReadyToPropose"
        c = client.get(f"/api/campaigns/{cid}/proposal").json()
        assert c["x_next"] != a["x_next"] or c["diagnostics"] != a["diagnostics"]

    def test_conflict_when_not_ready(self, client):
        r = client.post("/api/campaigns", json={"config": base_config()})
        cid = r.json()["id"]
        resp = client.get(f"/api/campaigns/{cid}/proposal")
        assert resp.status_code == 409


class TestPredictions:
    def make_ready(self, client, c=0.55):
        r = client.post("/api/campaigns", json={
            "config": base_config(c=c),
            "initial_observations": observations_1d(6, c=c if c is not None else 10.0),
        })
        return r.json()["id"]

    def test_grid_predictions(self, client):
        cid = self.make_ready(client)
        grid = ";".join(f"{x}" for x in np.linspace(0, 1, 21))
        r = client.get(f"/api/campaigns/{cid}/predictions", params={"grid": grid})
        assert r.status_code == 200
        rows = r.json()
        assert len(rows) == 21
        for row in rows:
            assert row["var"] >= 0.0
            assert 0.0 <= row["lambda_point"] <= 1.0

    def test_lambda_point_crosses_half_with_mean(self, client):
        cid = self.make_ready(client)
        grid = np.linspace(0, 1, 101)
        r = client.get(f"/api/campaigns/{cid}/predictions",
                       params={"grid": ";".join(map(str, grid))})
        rows = r.json()
        for row in rows:
            if row["lambda_point"] > 0.5:
                assert row["mean"] > 0.55 - 1e-9

    def test_no_censoring_limit_gives_zero_lambda(self, client):
        cid = self.make_ready(client, c=None)
        r = client.get(f"/api/campaigns/{cid}/predictions", params={"grid": "0.2;0.8"})
        assert all(row["lambda_point"] == 0.0 for row in r.json())

    def test_out_of_range_grid_point_rejected(self, client):
        cid = self.make_ready(client)
        r = client.get(f"/api/campaigns/{cid}/predictions", params={"grid": "0.5;1.5"})
        assert r.status_code == 422
        assert r.json()["field"] == "grid[1]"

    def test_criterion_endpoint(self, client):
        cid = self.make_ready(client)
        r = client.get(f"/api/campaigns/{cid}/criterion",
                       params={"grid": "0.1;0.5;0.9"})
        assert r.status_code == 200
        assert len(r.json()) == 3
        for row in r.json():
            assert np.isfinite(row["value"])


class TestEventSourcing:
    def test_replay_reproduces_document(self, client, tmp_path):
        rng = np.random.default_rng(3)
        r = client.post("/api/campaigns", json={
            "config": base_config(),
            "initial_observations": observations_1d(5),
        })
        cid = r.json()["id"]
        # random operation sequence
        for i in range(6):
            op = rng.integers(0, 3)
            if op == 0:
                client.get(f"/api/campaigns/{cid}/proposal")
            elif op == 1:
                x = float(rng.uniform(0, 1))
                v = float(xi_1d(x) + 0.1 * rng.standard_normal())
                client.post(f"/api/campaigns/{cid}/observations",
                            json={"x": [x], "value": min(v, 0.55),
                                  "censored": bool(v >= 0.55), "seq_token": f"tok{i}"})
            else:
                client.get(f"/api/campaigns/{cid}")
        live = client.store.get_campaign(cid)
        replayed = client.store.replay(cid)
        assert json.dumps(live, sort_keys=True) == json.dumps(replayed, sort_keys=True)

    def test_fresh_store_loads_identical_state(self, client, tmp_path):
        r = client.post("/api/campaigns", json={
            "config": base_config(),
            "initial_observations": observations_1d(5),
        })
        cid = r.json()["id"]
        client.get(f"/api/campaigns/{cid}/proposal")
        live = client.store.get_campaign(cid)
        fresh = CampaignStore(str(client.store.dir))
        assert json.dumps(fresh.get_campaign(cid), sort_keys=True) == json.dumps(
            live, sort_keys=True)

    def test_event_seq_strictly_increasing(self, client):
        r = client.post("/api/campaigns", json={
            "config": base_config(),
            "initial_observations": observations_1d(5),
        })
        cid = r.json()["id"]
        client.get(f"/api/campaigns/{cid}/proposal")
        path = client.store._events_path(cid)
        seqs = [json.loads(line)["seq"] for line in open(path) if line.strip()]
        assert seqs == sorted(seqs)
        assert len(set(seqs)) == len(seqs)

    def test_float_round_trip_through_json(self, client):
        value = 0.1 + 0.2 / 3.0  # not representable in short decimal
        r = client.post("/api/campaigns", json={
            "config": base_config(),
            "initial_observations": [{"x": [value], "value": value, "censored": False},
                                     {"x": [0.9], "value": -0.3, "censored": False}],
        })
        cid = r.json()["id"]
        stored = client.store.replay(cid)["observations"][0]
        assert stored["x"][0] == value
        assert stored["value"] == value


class TestBifidelityCampaign:
    def test_computer_block_campaign_becomes_ready(self, client):
        # 25 computer runs in 3 dimensions are enough to fit and propose
        rng = np.random.default_rng(0)
        xs = rng.uniform(0.05, 0.95, (25, 3))
        obs = [{
            "x": [float(v) for v in x],
            "value": float(np.cos(2 * x[0]) + x[1] - 0.5 * x[2]),
            "censored": False,
            "fidelity": "computer",
        } for x in xs]
        r = client.post("/api/campaigns", json={
            "config": {"p": 3, "n_ini": 25, "n_seq": 8, "c": 1.4, "bifidelity": True,
                       "method": "icmse", "restarts": 3, "seed": 5, "fit_restarts": 2},
            "initial_observations": obs,
        })
        assert r.status_code == 201
        doc = r.json()
        assert doc["status"] == "ReadyToPropose"
        prop = client.get(f"/api/campaigns/{doc['id']}/proposal")
        assert prop.status_code == 200
        assert len(prop.json()["x_next"]) == 3


class TestHighCensoringRiskFlag:
    def test_flag_set_when_lambda_extreme(self, client, monkeypatch):
        import icmse.service as service_mod
        from icmse.criteria import CriterionEval

        r = client.post("/api/campaigns", json={
            "config": base_config(),
            "initial_observations": observations_1d(6),
        })
        cid = r.json()["id"]

        def fake_propose(model, criterion, config):
            return np.array([0.5]), CriterionEval(
                value=0.01, lam=0.9999, trace_term=0.0, constant_included=True)

        monkeypatch.setattr(service_mod, "propose_next", fake_propose)
        prop = client.get(f"/api/campaigns/{cid}/proposal").json()
        assert prop["diagnostics"]["high_censoring_risk"] is True
        assert prop["x_next"] == [0.5]
