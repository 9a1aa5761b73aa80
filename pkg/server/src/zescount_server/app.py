"""The HTTP service: five capability endpoints plus /capabilities.

Every response body is canonical JSON (sorted keys, compact separators),
so identical requests produce identical bytes and golden fixtures can be
compared byte for byte. Protocol violations return a structured 4xx that
echoes the request id whenever one could be parsed from the body.
"""

from __future__ import annotations

import argparse
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request, Response

from .envelope import CAPABILITIES, EnvelopeError, check_envelope, encode_array
from .stub import StubModels

MAX_IMAGE_SIDE = 4096


class _BadRequest(Exception):
    def __init__(self, detail: str, request_id: str | None = None):
        super().__init__(detail)
        self.detail = detail
        self.request_id = request_id


def _canonical(doc: dict, status: int = 200) -> Response:
    body = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return Response(content=body, status_code=status, media_type="application/json")


def _parse_image(payload: dict) -> tuple[str, int, int]:
    image = payload.get("image")
    if not isinstance(image, dict):
        raise _BadRequest("payload.image must be an object")
    image_id = image.get("id")
    width = image.get("width")
    height = image.get("height")
    if not isinstance(image_id, str) or not image_id:
        raise _BadRequest("image.id must be a nonempty string")
    for name, value in (("width", width), ("height", height)):
        if not isinstance(value, int) or isinstance(value, bool):
            raise _BadRequest(f"image.{name} must be an integer")
        if not 1 <= value <= MAX_IMAGE_SIDE:
            raise _BadRequest(f"image.{name} must be in [1, {MAX_IMAGE_SIDE}]")
    return image_id, width, height


def _parse_prompt(payload: dict) -> str:
    prompt = payload.get("prompt")
    if not isinstance(prompt, str) or not prompt:
        raise _BadRequest("payload.prompt must be a nonempty string")
    return prompt


def _parse_threshold(payload: dict) -> float:
    threshold = payload.get("threshold")
    if isinstance(threshold, bool) or not isinstance(threshold, (int, float)):
        raise _BadRequest("payload.threshold must be a number")
    threshold = float(threshold)
    if not math.isfinite(threshold) or not 0.0 <= threshold <= 1.0:
        raise _BadRequest(f"payload.threshold {threshold} outside [0, 1]")
    return threshold


def _parse_point(payload: dict, width: int, height: int) -> tuple[int, int]:
    point = payload.get("point")
    if (
        not isinstance(point, list) or len(point) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in point)
    ):
        raise _BadRequest("payload.point must be [x, y] integers")
    x, y = point
    if not (0 <= x < width and 0 <= y < height):
        raise _BadRequest(f"point ({x}, {y}) is outside the {width}x{height} image")
    return x, y


def _parse_exemplars(payload: dict, width: int, height: int) -> list[dict]:
    exemplars = payload.get("exemplars")
    if not isinstance(exemplars, list):
        raise _BadRequest("payload.exemplars must be a list")
    for row in exemplars:
        if not isinstance(row, dict):
            raise _BadRequest("each exemplar must be an object")
        box = row.get("box")
        if (
            not isinstance(box, list) or len(box) != 4
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in box)
        ):
            raise _BadRequest("exemplar.box must be [x0, y0, x1, y1] integers")
        x0, y0, x1, y1 = box
        if not (0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height):
            raise _BadRequest(f"exemplar box {box} is outside the {width}x{height} image")
    return exemplars


def _handle(models: StubModels, endpoint: str, body: bytes) -> Response:
    request_id: str | None = None
    try:
        try:
            doc = json.loads(body)
        except ValueError as exc:
            raise _BadRequest(f"request body is not JSON: {exc}") from exc
        if isinstance(doc, dict) and isinstance(doc.get("request_id"), str):
            request_id = doc["request_id"]
        try:
            request_id, capability, payload = check_envelope(doc)
        except EnvelopeError as exc:
            raise _BadRequest(str(exc), request_id) from exc
        if capability != endpoint:
            raise _BadRequest(
                f"envelope capability {capability!r} does not match endpoint /{endpoint}",
                request_id,
            )

        image_id, width, height = _parse_image(payload)
        if endpoint == "similarity":
            prompt = _parse_prompt(payload)
            out = {"map": encode_array(models.similarity(image_id, width, height, prompt))}
        elif endpoint == "detect":
            prompt = _parse_prompt(payload)
            threshold = _parse_threshold(payload)
            out = {"detections": models.detect(image_id, width, height, prompt, threshold)}
        elif endpoint == "segment":
            x, y = _parse_point(payload, width, height)
            out = {"mask": encode_array(models.segment(image_id, width, height, x, y))}
        elif endpoint == "features":
            out = {"features": encode_array(models.features(image_id, width, height))}
        else:
            exemplars = _parse_exemplars(payload, width, height)
            out = {"map": encode_array(models.density(image_id, width, height, exemplars))}
    except _BadRequest as exc:
        rid = exc.request_id if exc.request_id is not None else request_id
        return _canonical({"error": exc.detail, "request_id": rid}, status=400)
    return _canonical({"request_id": request_id, "capability": endpoint, "payload": out})


def create_app(models: StubModels | None = None) -> FastAPI:
    models = models if models is not None else StubModels()
    app = FastAPI(title="zescount-server", docs_url=None, redoc_url=None)

    @app.get("/capabilities")
    async def capabilities() -> Response:
        return _canonical(models.capabilities())

    def register(endpoint: str) -> None:
        async def handler(request: Request) -> Response:
            return _handle(models, endpoint, await request.body())

        app.add_api_route(f"/{endpoint}", handler, methods=["POST"], name=endpoint)

    for endpoint in CAPABILITIES:
        register(endpoint)
    return app


# -- configuration and entry point -------------------------------------------

@dataclass(frozen=True)
class Settings:
    model_dir: str | None = None
    port: int = 8901
    host: str = "127.0.0.1"


def load_settings(argv: list[str] | None = None, env: dict | None = None) -> Settings:
    """Merge defaults < config file < environment < CLI flags."""

    env = os.environ if env is None else env
    parser = argparse.ArgumentParser(prog="zescount-server")
    parser.add_argument("--config", type=Path, help="JSON config file")
    parser.add_argument("--model-dir", help="model weights directory, or 'stub'")
    parser.add_argument("--port", type=int)
    parser.add_argument("--host")
    args = parser.parse_args(argv)

    model_dir: str | None = None
    port = 8901
    host = "127.0.0.1"
    if args.config is not None:
        try:
            doc = json.loads(args.config.read_text())
        except (OSError, ValueError) as exc:
            raise SystemExit(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise SystemExit(f"config {args.config} must hold a JSON object")
        model_dir = doc.get("model_dir", model_dir)
        port = doc.get("port", port)
        host = doc.get("host", host)
    if "ZES_MODEL_DIR" in env:
        model_dir = env["ZES_MODEL_DIR"]
    if "ZES_PORT" in env:
        try:
            port = int(env["ZES_PORT"])
        except ValueError as exc:
            raise SystemExit(f"ZES_PORT must be an integer: {env['ZES_PORT']!r}") from exc
    if args.model_dir is not None:
        model_dir = args.model_dir
    if args.port is not None:
        port = args.port
    if args.host is not None:
        host = args.host
    if not isinstance(port, int) or isinstance(port, bool) or not 0 <= port <= 65535:
        raise SystemExit(f"port must be an integer in [0, 65535], got {port!r}")
    return Settings(model_dir=model_dir, port=port, host=str(host))


def load_models(model_dir: str | None) -> StubModels:
    """Resolve the configured models; unresolvable weights abort startup."""

    if model_dir in (None, "", "stub"):
        return StubModels()
    raise SystemExit(
        f"cannot load models from {model_dir!r}: this build ships only the "
        "deterministic stub (leave ZES_MODEL_DIR unset or set it to 'stub')"
    )


def main(argv: list[str] | None = None) -> int:
    import uvicorn

    settings = load_settings(argv)
    models = load_models(settings.model_dir)
    app = create_app(models)
    uvicorn.run(app, host=settings.host, port=settings.port, log_level="warning")
    return 0
