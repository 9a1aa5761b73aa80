"""Endpoint contract: happy paths, statelessness, structured failures."""

from __future__ import annotations

import numpy as np
import pytest
from fastapi.testclient import TestClient

from zescount_server.app import create_app, load_models, load_settings
from zescount_server.envelope import decode_array, make_envelope
from zescount_server.stub import OBJECT_MASS, StubModels, build_scene

IMAGE = {"id": "img-1", "width": 64, "height": 64}


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def post(client, capability, payload, request_id=None):
    return client.post(
        f"/{capability}", json=make_envelope(capability, payload, request_id)
    )


class TestCapabilities:
    def test_contract(self, client):
        doc = client.get("/capabilities").json()
        assert doc == {
            "similarity": True,
            "detection": True,
            "segmentation": True,
            "features": True,
            "density": True,
            "feature_channels": 256,
            "shareable": False,
        }


class TestHappyPaths:
    def test_similarity(self, client):
        resp = post(client, "similarity", {"image": IMAGE, "prompt": "bottle"}, "r-1")
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["request_id"] == "r-1"
        arr = decode_array(doc["payload"]["map"])
        assert arr.shape == (64, 64)
        assert arr.min() >= 0.0 and arr.max() <= 1.0

    def test_detect_and_threshold(self, client):
        payload = {"image": IMAGE, "prompt": "bottle", "threshold": 0.15}
        rows = post(client, "detect", payload).json()["payload"]["detections"]
        assert rows
        for row in rows:
            x0, y0, x1, y1 = row["box"]
            assert 0 <= x0 < x1 <= 64 and 0 <= y0 < y1 <= 64
            assert row["confidence"] >= 0.15
        # a threshold above every confidence empties the list
        payload["threshold"] = 0.99
        assert post(client, "detect", payload).json()["payload"]["detections"] == []

    def test_segment_object_and_background(self, client):
        scene = build_scene("img-1", 64, 64)
        cx, cy = (int(v) for v in scene.centers[0])
        doc = post(client, "segment", {"image": IMAGE, "point": [cx, cy]}).json()
        mask = decode_array(doc["payload"]["mask"])
        assert mask.dtype == np.bool_ and mask.shape == (64, 64)
        assert mask[cy, cx] and mask.sum() > 1
        # background seed floods nothing but stays a nonempty mask
        bg = post(client, "segment", {"image": IMAGE, "point": [0, 0]}).json()
        assert decode_array(bg["payload"]["mask"]).sum() == 1

    def test_features_grid(self, client):
        doc = post(client, "features", {"image": IMAGE}).json()
        feats = decode_array(doc["payload"]["features"])
        assert feats.shape == (256, 16, 16)
        assert np.isfinite(feats).all()

    def test_density_mass(self, client):
        doc = post(client, "density", {"image": IMAGE, "exemplars": []}).json()
        density = decode_array(doc["payload"]["map"])
        assert density.shape == (64, 64)
        assert density.min() >= 0.0
        k = len(build_scene("img-1", 64, 64).centers)
        assert density.sum() == pytest.approx(k * OBJECT_MASS, rel=1e-9)

    def test_identical_requests_identical_bytes(self, client):
        env = make_envelope("similarity", {"image": IMAGE, "prompt": "cat"}, "r-same")
        first = client.post("/similarity", json=env)
        second = client.post("/similarity", json=env)
        assert first.content == second.content


class TestFailures:
    def test_non_json_body(self, client):
        resp = client.post("/detect", content=b"{nope", headers={"content-type": "application/json"})
        assert resp.status_code == 400
        doc = resp.json()
        assert "not JSON" in doc["error"] and doc["request_id"] is None

    def test_malformed_envelope_echoes_request_id(self, client):
        resp = client.post(
            "/segment", json={"request_id": "r-7", "capability": "segment", "payload": []}
        )
        assert resp.status_code == 400
        doc = resp.json()
        assert doc["request_id"] == "r-7" and "payload" in doc["error"]

    def test_capability_endpoint_mismatch(self, client):
        resp = client.post(
            "/detect", json=make_envelope("similarity", {"image": IMAGE, "prompt": "x"}, "r-8")
        )
        assert resp.status_code == 400
        doc = resp.json()
        assert doc["request_id"] == "r-8" and "does not match endpoint" in doc["error"]

    def test_out_of_bounds_point(self, client):
        resp = post(client, "segment", {"image": IMAGE, "point": [64, 10]}, "r-9")
        assert resp.status_code == 400
        doc = resp.json()
        assert doc["request_id"] == "r-9" and "outside" in doc["error"]

    def test_bad_image_doc(self, client):
        resp = post(client, "features", {"image": {"id": "", "width": 64, "height": 64}})
        assert resp.status_code == 400
        resp = post(client, "features", {"image": {"id": "x", "width": 0, "height": 64}})
        assert resp.status_code == 400

    def test_bad_threshold(self, client):
        resp = post(client, "detect", {"image": IMAGE, "prompt": "a", "threshold": 1.5})
        assert resp.status_code == 400

    def test_bad_exemplar_box(self, client):
        payload = {"image": IMAGE, "exemplars": [{"box": [10, 10, 9, 20], "stage": "dae", "score": 1.0}]}
        resp = post(client, "density", payload)
        assert resp.status_code == 400


class TestConfiguration:
    def test_settings_precedence(self, tmp_path):
        cfg = tmp_path / "server.json"
        cfg.write_text('{"port": 7001, "model_dir": "stub"}')
        s = load_settings(["--config", str(cfg)], env={})
        assert s.port == 7001 and s.model_dir == "stub"
        s = load_settings(["--config", str(cfg)], env={"ZES_PORT": "7002"})
        assert s.port == 7002  # env beats the file
        s = load_settings(["--config", str(cfg), "--port", "7003"], env={"ZES_PORT": "7002"})
        assert s.port == 7003  # flags beat everything

    def test_env_model_dir(self):
        s = load_settings([], env={"ZES_MODEL_DIR": "stub", "ZES_PORT": "8910"})
        assert s.model_dir == "stub" and s.port == 8910

    def test_bad_port_rejected(self):
        with pytest.raises(SystemExit, match="ZES_PORT"):
            load_settings([], env={"ZES_PORT": "eighty"})
        with pytest.raises(SystemExit, match="port"):
            load_settings(["--port", "70000"], env={})

    def test_stub_models_load(self):
        assert isinstance(load_models(None), StubModels)
        assert isinstance(load_models("stub"), StubModels)

    def test_unresolvable_models_abort_startup(self, tmp_path):
        with pytest.raises(SystemExit, match="cannot load models"):
            load_models(str(tmp_path / "weights"))
