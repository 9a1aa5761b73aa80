"""Remote backend client against a minimal in-process wire server."""

from __future__ import annotations

import json
import threading
from dataclasses import asdict
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from zescount.errors import BackendError, ContractError
from zescount.pipeline import run_pipeline
from zescount.remote import RemoteBackend
from zescount.synthetic import SceneParams, SyntheticBackend, generate_scene
from zescount.types import BBox, ClassPrompt, Exemplar, ImageRef, Point, Stage
from zescount.wire import check_envelope, encode_array

PROMPT = ClassPrompt("0")


def _scene_backend():
    params = SceneParams(
        width=96, height=96, n_objects=6, semi_axis_range=(6.0, 8.0),
    )
    return SyntheticBackend(generate_scene(params, seed=13))


class WireHandler(BaseHTTPRequestHandler):
    """Adapts one synthetic backend to the wire protocol for tests."""

    inner = None  # set by the fixture

    def log_message(self, *args):  # keep pytest output clean
        pass

    def _send(self, code: int, doc: dict) -> None:
        body = json.dumps(doc).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path != "/capabilities":
            self._send(404, {"error": f"no route {self.path}"})
            return
        caps = asdict(self.inner.capabilities())
        self._send(200, caps)

    def do_POST(self):
        length = int(self.headers.get("Content-Length", "0"))
        try:
            doc = json.loads(self.rfile.read(length))
            request_id, capability, payload = check_envelope(doc)
        except (ValueError, ContractError) as exc:
            self._send(400, {"error": str(exc)})
            return
        try:
            image_doc = payload["image"]
            image = ImageRef(image_doc["id"], image_doc["width"], image_doc["height"])
            if capability == "similarity":
                arr = self.inner.text_similarity(image, ClassPrompt(payload["prompt"]))
                out = {"map": encode_array(arr)}
            elif capability == "detect":
                dets = self.inner.detect(
                    image, ClassPrompt(payload["prompt"]), payload["threshold"]
                )
                out = {
                    "detections": [
                        {"box": list(d.box.as_tuple()), "confidence": d.confidence}
                        for d in dets
                    ]
                }
            elif capability == "segment":
                x, y = payload["point"]
                out = {"mask": encode_array(self.inner.segment_point(image, Point(x, y)))}
            elif capability == "features":
                out = {"features": encode_array(self.inner.feature_map(image))}
            else:
                exemplars = [
                    Exemplar(BBox(*e["box"]), Stage(e["stage"]), e["score"])
                    for e in payload["exemplars"]
                ]
                out = {"map": encode_array(self.inner.count_density(image, exemplars))}
        except Exception as exc:  # noqa: BLE001 - surface as a wire error
            self._send(400, {"error": str(exc), "request_id": request_id})
            return
        self._send(200, {"request_id": request_id, "capability": capability, "payload": out})


@pytest.fixture(scope="module")
def server():
    inner = _scene_backend()
    WireHandler.inner = inner
    httpd = ThreadingHTTPServer(("127.0.0.1", 0), WireHandler)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{httpd.server_address[1]}"
    yield url, inner
    httpd.shutdown()
    thread.join()


class TestCapabilities:
    def test_reported_over_wire(self, server):
        url, inner = server
        remote = RemoteBackend(url)
        assert remote.capabilities() == inner.capabilities()


class TestArrayCapabilities:
    def test_similarity_bit_exact(self, server):
        url, inner = server
        remote = RemoteBackend(url)
        local = inner.text_similarity(inner.image, PROMPT)
        assert np.array_equal(remote.text_similarity(inner.image, PROMPT), local)

    def test_detect_matches(self, server):
        url, inner = server
        remote = RemoteBackend(url)
        assert remote.detect(inner.image, PROMPT, 0.15) == inner.detect(inner.image, PROMPT, 0.15)

    def test_segment_matches(self, server):
        url, inner = server
        remote = RemoteBackend(url)
        obj = inner.scene.objects[0]
        point = Point(round(obj.cx), round(obj.cy))
        assert np.array_equal(
            remote.segment_point(inner.image, point),
            inner.segment_point(inner.image, point),
        )

    def test_features_and_density_match(self, server):
        url, inner = server
        remote = RemoteBackend(url)
        assert np.array_equal(remote.feature_map(inner.image), inner.feature_map(inner.image))
        ex = Exemplar(inner.render.boxes[0], Stage.DAE, 0.9)
        assert np.array_equal(
            remote.count_density(inner.image, [ex]),
            inner.count_density(inner.image, [ex]),
        )


class TestPipelineOverWire:
    def test_remote_run_matches_local(self, server):
        url, inner = server
        remote = RemoteBackend(url)
        local_result = run_pipeline(inner.image, "0", inner)
        remote_result = run_pipeline(inner.image, "0", remote)
        assert remote_result.final_count == local_result.final_count
        assert remote_result.exemplars == local_result.exemplars


class TestFailureModes:
    def test_unreachable_host(self):
        remote = RemoteBackend("http://127.0.0.1:1", timeout=0.5)
        with pytest.raises(BackendError, match="cannot reach"):
            remote.capabilities()
        with pytest.raises(BackendError, match="cannot reach"):
            remote.text_similarity(ImageRef("x", 8, 8), PROMPT)

    def test_server_error_carries_detail(self, server):
        url, _ = server
        remote = RemoteBackend(url)
        # the handler rejects an unknown image id with a 400
        with pytest.raises(BackendError, match="unknown image"):
            remote.text_similarity(ImageRef("nope", 8, 8), PROMPT)

    def test_bad_url_scheme_rejected(self):
        with pytest.raises(ContractError, match="http"):
            RemoteBackend("ftp://files.example")
