import numpy as np
import pytest
from fastapi.testclient import TestClient

from prefelicit.service import create_app

FAST_CONFIG = {
    "mcts_budget": 4,
    "fit_iters": 20,
    "fit_samples": 200,
    "metric_samples": 300,
    "async_fit": False,
    "seed": 123,
}


@pytest.fixture
def client(tmp_path):
    app = create_app(data_dir=tmp_path / "sessions", server_seed=1)
    with TestClient(app) as c:
        yield c


def create_session(client, horizon=2, **config_overrides):
    config = dict(FAST_CONFIG, **config_overrides)
    resp = client.post("/sessions", json={"horizon": horizon, "config": config})
    assert resp.status_code == 200
    return resp.json()["id"]


def answer_pending(client, sid, flip=False):
    state = client.get(f"/sessions/{sid}").json()
    i, j = state["question"]["pair"]
    if flip:
        i, j = j, i
    return client.post(f"/sessions/{sid}/answer", json={"preferred": i, "other": j})


class TestSessionLifecycle:
    def test_create_presents_first_question(self, client):
        sid = create_session(client, horizon=3)
        state = client.get(f"/sessions/{sid}").json()
        assert state["status"] == "awaiting_answer"
        assert state["round"] == 1
        assert state["horizon"] == 3
        pair = state["question"]["pair"]
        assert len(pair) == 2 and pair[0] != pair[1]
        assert len(state["question"]["alternatives"]) == 2
        assert state["history"] == []
        assert len(state["metrics"]) == 1  # prior snapshot before any answer

    def test_full_round_trip_to_done(self, client):
        sid = create_session(client, horizon=2)
        for k in range(2):
            resp = answer_pending(client, sid)
            assert resp.status_code == 200
        state = client.get(f"/sessions/{sid}").json()
        assert state["status"] == "done"
        assert len(state["history"]) == 2
        assert state["question"] is None
        assert len(state["metrics"]) == 3  # prior + one per answered round

    def test_no_repeated_pairs(self, client):
        sid = create_session(client, horizon=3)
        pairs = []
        for _ in range(3):
            state = client.get(f"/sessions/{sid}").json()
            pairs.append(frozenset(state["question"]["pair"]))
            answer_pending(client, sid)
        assert len(set(pairs)) == 3

    def test_posterior_updates_after_answer(self, client):
        sid = create_session(client, horizon=2)
        before = client.get(f"/sessions/{sid}").json()["posterior"]["theta"]
        answer_pending(client, sid)
        after = client.get(f"/sessions/{sid}").json()["posterior"]["theta"]
        assert before != after

    def test_pwi_and_rai_views(self, client):
        sid = create_session(client, horizon=1)
        state = client.get(f"/sessions/{sid}").json()
        n = len(state["alternative_ids"])
        pwi = np.asarray(state["pwi"])
        rai = np.asarray(state["rai"])
        assert pwi.shape == (n, n)
        off = ~np.eye(n, dtype=bool)
        assert np.allclose((pwi + pwi.T)[off], 1.0)
        assert np.allclose(rai.sum(axis=1), 1.0)


class TestAnswerValidation:
    def test_wrong_pair_conflicts(self, client):
        sid = create_session(client)
        state = client.get(f"/sessions/{sid}").json()
        i, j = state["question"]["pair"]
        k = next(x for x in range(6) if x not in (i, j))
        resp = client.post(f"/sessions/{sid}/answer", json={"preferred": i, "other": k})
        assert resp.status_code == 409
        assert client.get(f"/sessions/{sid}").json()["history"] == []

    def test_done_session_rejects_answers(self, client):
        sid = create_session(client, horizon=1)
        answer_pending(client, sid)
        state = client.get(f"/sessions/{sid}").json()
        assert state["status"] == "done"
        resp = client.post(f"/sessions/{sid}/answer", json={"preferred": 0, "other": 1})
        assert resp.status_code == 409

    def test_idempotent_resubmission(self, client):
        sid = create_session(client, horizon=2)
        state = client.get(f"/sessions/{sid}").json()
        i, j = state["question"]["pair"]
        body = {"preferred": i, "other": j, "idempotency_key": "once"}
        first = client.post(f"/sessions/{sid}/answer", json=body)
        assert first.status_code == 200
        second = client.post(f"/sessions/{sid}/answer", json=body)
        assert second.status_code == 200
        assert len(client.get(f"/sessions/{sid}").json()["history"]) == 1

    def test_unknown_session(self, client):
        assert client.get("/sessions/nope").status_code == 404

    def test_invalid_horizon_rejected(self, client):
        resp = client.post("/sessions", json={"horizon": 0, "config": FAST_CONFIG})
        assert resp.status_code == 422

    def test_invalid_table_rejected(self, client):
        table = {
            "alternatives": ["a", "a"],
            "criteria": [{"name": "g", "scale_min": 0.0, "scale_max": 1.0, "subintervals": 1}],
            "performances": [[0.1], [0.9]],
        }
        resp = client.post("/sessions", json={"horizon": 1, "config": FAST_CONFIG,
                                              "table": table})
        assert resp.status_code == 422


class TestCustomTable:
    def test_custom_table_session(self, client):
        table = {
            "alternatives": ["x", "y", "z"],
            "criteria": [
                {"name": "g1", "scale_min": 0.0, "scale_max": 1.0, "subintervals": 1},
                {"name": "g2", "scale_min": 0.0, "scale_max": 1.0, "subintervals": 1},
            ],
            "performances": [[0.9, 0.1], [0.1, 0.9], [0.5, 0.5]],
        }
        resp = client.post("/sessions", json={"horizon": 1, "config": FAST_CONFIG,
                                              "table": table})
        sid = resp.json()["id"]
        state = client.get(f"/sessions/{sid}").json()
        assert state["alternative_ids"] == ["x", "y", "z"]
        assert state["criteria"] == ["g1", "g2"]


class TestExport:
    def test_export_done_session(self, client):
        sid = create_session(client, horizon=2)
        answer_pending(client, sid)
        answer_pending(client, sid)
        out = client.get(f"/sessions/{sid}/export").json()
        assert len(out["statements"]) == 2
        pairs = [frozenset(s) for s in out["statements"]]
        assert len(set(pairs)) == 2
        assert out["theta"] is not None
        assert len(out["metrics"]) == 3
        assert out["seed"] == 123


class TestPersistence:
    def test_restart_resumes_session(self, tmp_path):
        data_dir = tmp_path / "sessions"
        app = create_app(data_dir=data_dir, server_seed=1)
        with TestClient(app) as client:
            sid = create_session(client, horizon=2)
            answer_pending(client, sid)
            state = client.get(f"/sessions/{sid}").json()

        app2 = create_app(data_dir=data_dir, server_seed=1)
        with TestClient(app2) as client2:
            resumed = client2.get(f"/sessions/{sid}").json()
            assert resumed["history"] == state["history"]
            assert resumed["status"] == state["status"]
            assert resumed["question"]["pair"] == state["question"]["pair"]
            assert resumed["posterior"]["theta"] == state["posterior"]["theta"]
            # the resumed session stays fully usable
            answer_pending(client2, sid)
            assert client2.get(f"/sessions/{sid}").json()["status"] == "done"

    def test_event_log_appends(self, tmp_path):
        data_dir = tmp_path / "sessions"
        app = create_app(data_dir=data_dir, server_seed=1)
        with TestClient(app) as client:
            sid = create_session(client, horizon=1)
            answer_pending(client, sid)
        events = (data_dir / sid / "events.jsonl").read_text().splitlines()
        kinds = [__import__("json").loads(e)["type"] for e in events]
        assert kinds[0] == "created"
        assert "question" in kinds
        assert "answer" in kinds
