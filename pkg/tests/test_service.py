import math

import pytest
from fastapi.testclient import TestClient

from pose_engine import defaults
from pose_engine.service import create_app

from .test_pipeline import record_synthetic


@pytest.fixture()
def client():
    with TestClient(create_app()) as c:
        yield c


def test_health_and_version(client):
    assert client.get("/healthz").json()["status"] == "ok"
    assert "version" in client.get("/version").json()


class TestMathEndpoints:
    def test_retarget_round_trip(self, client):
        resp = client.post(
            "/v1/math/retarget",
            json={"basis": [3, 0, 4], "joint": [-4, 0, 3], "engine_basis": [3, 0, 4]},
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["theta"] == pytest.approx(math.atan2(4, 3))
        assert body["scale"] == pytest.approx(5.0)
        assert body["normalized"] == pytest.approx([0.0, 0.0, 1.0])
        assert body["reproduced"] == pytest.approx([-4.0, 0.0, 3.0])

    def test_degenerate_basis_is_422(self, client):
        resp = client.post("/v1/math/retarget", json={"basis": [0, 1, 0], "joint": [1, 0, 0]})
        assert resp.status_code == 422

    def test_triangulate_inline_calibration(self, client):
        calibration = {
            "cameras": {
                "a": {
                    "intrinsics": {"fx": 1, "fy": 1, "cx": 0, "cy": 0},
                    "rotation": [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
                    "translation": [0, 0, 0],
                },
                "b": {
                    "intrinsics": {"fx": 1, "fy": 1, "cx": 0, "cy": 0},
                    "rotation": [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
                    "translation": [-1, 0, 0],
                },
            }
        }
        resp = client.post(
            "/v1/math/triangulate",
            json={
                "pixel_a": {"u": 0.0, "v": 0.0},
                "pixel_b": {"u": -0.2, "v": 0.0},
                "calibration": calibration,
            },
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["point"] == pytest.approx([0.0, 0.0, 5.0], abs=1e-9)
        assert body["reprojection_error_px"] == pytest.approx(0.0, abs=1e-9)

    def test_triangulate_path_form(self, client):
        resp = client.post(
            "/v1/math/triangulate",
            json={
                "pixel_a": {"u": 320.0, "v": 240.0},
                "pixel_b": {"u": 160.0, "v": 240.0},
                "calibration_path": str(defaults.CALIBRATION_SAMPLE),
            },
        )
        assert resp.status_code == 200
        assert resp.json()["point"][2] == pytest.approx(2.0, rel=1e-6)

    def test_triangulate_requires_one_calibration_source(self, client):
        resp = client.post(
            "/v1/math/triangulate",
            json={"pixel_a": {"u": 0, "v": 0}, "pixel_b": {"u": 0, "v": 0}},
        )
        assert resp.status_code == 422


class TestRunEndpoint:
    def test_file_run(self, client, tmp_path):
        stream = tmp_path / "in.pose"
        record_synthetic(stream, fps=30.0, duration_s=0.5)
        out = tmp_path / "out.pose"
        resp = client.post(
            "/v1/runs",
            json={"config": {"input": f"file:{stream}", "output": f"file:{out}", "mode": "step"}},
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["ok"] is True
        assert "pipeline metrics" in body["report"]
        assert out.exists()

    def test_bad_config_is_422(self, client):
        resp = client.post("/v1/runs", json={"config": {"input": "file:/nope/missing.pose"}})
        assert resp.status_code == 422

    def test_bench_endpoint(self, client):
        resp = client.post(
            "/v1/bench", json={"duration_s": 1.0, "rate_hz": 60.0, "mode": "step"}
        )
        assert resp.status_code == 200
        body = resp.json()
        assert body["achieved_fps"] == pytest.approx(60.0, rel=0.05)


class TestSessions:
    def test_session_lifecycle(self, client, tmp_path):
        stream = tmp_path / "in.pose"
        record_synthetic(stream, fps=30.0, duration_s=0.4)
        out = tmp_path / "out.pose"
        resp = client.post(
            "/v1/sessions",
            json={"config": {
                "input": f"file:{stream}", "output": f"file:{out}", "mode": "threaded",
            }},
        )
        assert resp.status_code == 201
        sid = resp.json()["session_id"]
        assert sid in client.get("/v1/sessions").json()
        info = client.get(f"/v1/sessions/{sid}").json()
        assert info["state"] in ("running", "finished")
        import time

        deadline = time.time() + 10
        while time.time() < deadline:
            info = client.get(f"/v1/sessions/{sid}").json()
            if info["state"] != "running":
                break
            time.sleep(0.1)
        final = client.delete(f"/v1/sessions/{sid}").json()
        assert final["state"] in ("finished", "stopped")
        assert client.get(f"/v1/sessions/{sid}").status_code == 404
        assert out.exists()

    def test_step_mode_sessions_rejected(self, client):
        resp = client.post(
            "/v1/sessions", json={"config": {"input": "synthetic:30:1", "mode": "step"}}
        )
        assert resp.status_code == 422
