import pytest
from fastapi.testclient import TestClient

from rdlab.experiment import StudyConfig, StudyHost, create_app, create_study
from rdlab.plotting import GraphicalParams
from rdlab.synthetic import example_dgp

TRUTH_FIELDS = {"d_multiple", "dgp_id", "seed", "truth", "answer", "graph_id"}


@pytest.fixture(scope="module")
def dgps():
    kinds = ["flat", "linear", "mild", "curved", "skewed"]
    return [
        example_dgp(kinds[i % len(kinds)], n=120, seed=400 + i) for i in range(11)
    ]


@pytest.fixture()
def client(dgps):
    host = StudyHost()
    config = StudyConfig(
        arms=(GraphicalParams(),),
        dgp_ids=tuple(d.dgp_id for d in dgps),
        participants_per_arm=3,
    )
    study = create_study(config, master_seed=31, dgps=dgps)
    host.add(study)
    app = create_app(host)
    return TestClient(app), study.study_id


def assert_no_truth(payload, path=""):
    if isinstance(payload, dict):
        for key, val in payload.items():
            assert key not in TRUTH_FIELDS, f"{path}.{key}"
            assert_no_truth(val, f"{path}.{key}")
    elif isinstance(payload, list):
        for i, val in enumerate(payload):
            assert_no_truth(val, f"{path}[{i}]")


def complete_session(client, study_id, bonus="fixed"):
    r = client.post(f"/studies/{study_id}/sessions")
    assert r.status_code == 200
    sid = r.json()["session_id"]
    for k in range(11):
        t = client.get(f"/sessions/{sid}/trials/{k}")
        assert t.status_code == 200
        resp = client.post(
            f"/sessions/{sid}/trials/{k}/response",
            json={"reported": k % 2 == 0, "bonus": bonus},
        )
        assert resp.status_code == 200
    fin = client.post(f"/sessions/{sid}/finalize", json={})
    assert fin.status_code == 200
    return sid, fin.json()


class TestHttpFlow:
    def test_full_participant_flow(self, client):
        cl, study_id = client
        sid, summary = complete_session(cl, study_id)
        assert summary["earnings_cents"] == 300 + 220
        assert 0 <= summary["n_correct"] <= 11

    def test_trial_payload_has_no_truth(self, client):
        cl, study_id = client
        r = cl.post(f"/studies/{study_id}/sessions")
        sid = r.json()["session_id"]
        payload = cl.get(f"/sessions/{sid}/trials/0").json()
        assert_no_truth(payload)
        assert "<svg" in payload["svg"]

    def test_session_state_endpoint_for_resume(self, client):
        cl, study_id = client
        r = cl.post(f"/studies/{study_id}/sessions")
        sid = r.json()["session_id"]
        cl.get(f"/sessions/{sid}/trials/0")
        cl.post(f"/sessions/{sid}/trials/0/response",
                json={"reported": True, "bonus": "wager"})
        state = cl.get(f"/sessions/{sid}").json()
        assert state["answered"] == 1 and not state["finished"]
        assert_no_truth(state)

    def test_out_of_order_conflict(self, client):
        cl, study_id = client
        sid = cl.post(f"/studies/{study_id}/sessions").json()["session_id"]
        assert cl.get(f"/sessions/{sid}/trials/3").status_code == 409
        cl.get(f"/sessions/{sid}/trials/0")
        r = cl.post(f"/sessions/{sid}/trials/2/response",
                    json={"reported": True, "bonus": "fixed"})
        assert r.status_code == 409

    def test_duplicate_submit_idempotent(self, client):
        cl, study_id = client
        sid = cl.post(f"/studies/{study_id}/sessions").json()["session_id"]
        cl.get(f"/sessions/{sid}/trials/0")
        body = {"reported": True, "bonus": "wager"}
        a = cl.post(f"/sessions/{sid}/trials/0/response", json=body)
        b = cl.post(f"/sessions/{sid}/trials/0/response", json=body)
        assert a.json() == b.json()
        conflict = cl.post(f"/sessions/{sid}/trials/0/response",
                           json={"reported": False, "bonus": "wager"})
        assert conflict.status_code == 409

    def test_study_full(self, client):
        cl, study_id = client
        for _ in range(3):
            cl.post(f"/studies/{study_id}/sessions")
        assert cl.post(f"/studies/{study_id}/sessions").status_code == 409

    def test_aggregate_and_export(self, client):
        cl, study_id = client
        complete_session(cl, study_id, bonus="wager")
        agg = cl.get(f"/studies/{study_id}/aggregate").json()
        assert agg["progress"]["sessions_finished"] == 1
        csv_text = cl.get(f"/studies/{study_id}/export.csv").text
        assert csv_text.startswith("section,arm,")

    def test_survey_capture(self, client):
        cl, study_id = client
        sid = cl.post(f"/studies/{study_id}/sessions").json()["session_id"]
        r = cl.post(f"/sessions/{sid}/survey",
                    json={"fields": {"age": "20-29", "stats_background": "some"}})
        assert r.status_code == 200

    def test_lineup_answer_via_sidecar_endpoint(self, client):
        cl, study_id = client
        out = cl.get(f"/studies/{study_id}/lineup", params={"seed": 4}).json()
        assert "<svg" in out["svg"]
        assert "answer" not in out
        ans = cl.get(f"/studies/{study_id}/lineup/4/answer").json()
        assert 1 <= ans["row"] <= 4 and 1 <= ans["col"] <= 5

    def test_create_study_via_http(self, dgps):
        host = StudyHost()
        app = create_app(host)
        cl = TestClient(app)
        config = {
            "arms": [GraphicalParams().to_dict()],
            "dgp_ids": [d.dgp_id for d in dgps],
            "participants_per_arm": 1,
        }
        r = cl.post("/studies", json={
            "config": config,
            "dgps": [d.to_dict() for d in dgps],
            "master_seed": 77,
        })
        assert r.status_code == 200
        assert r.json()["pool_size"] == 11
