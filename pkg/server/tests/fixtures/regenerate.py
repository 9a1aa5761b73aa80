"""Regenerate the committed golden response fixtures from the stub.

Run from the server directory: python3 tests/fixtures/regenerate.py
Only rerun this when the wire schema or the stub itself intentionally
changes; the golden tests exist to catch *unintentional* drift.
"""

from __future__ import annotations

from pathlib import Path

from fastapi.testclient import TestClient

from zescount_server.app import create_app
from zescount_server.envelope import make_envelope

HERE = Path(__file__).resolve().parent
IMAGE = {"id": "golden-image", "width": 64, "height": 64}

REQUESTS = {
    "similarity_64x64.bin": (
        "similarity", {"image": IMAGE, "prompt": "bottle"}, "golden-sim"
    ),
    "detect_64x64.bin": (
        "detect", {"image": IMAGE, "prompt": "bottle", "threshold": 0.15}, "golden-det"
    ),
    "density_64x64.bin": (
        "density",
        {"image": IMAGE, "exemplars": [{"box": [4, 4, 16, 16], "stage": "dae", "score": 1.0}]},
        "golden-den",
    ),
}


def main() -> None:
    client = TestClient(create_app())
    for name, (capability, payload, request_id) in REQUESTS.items():
        resp = client.post(
            f"/{capability}", json=make_envelope(capability, payload, request_id)
        )
        assert resp.status_code == 200, (name, resp.status_code, resp.content[:200])
        (HERE / name).write_bytes(resp.content)
        print(f"wrote {name}: {len(resp.content)} bytes")
    caps = client.get("/capabilities")
    assert caps.status_code == 200
    (HERE / "capabilities.bin").write_bytes(caps.content)
    print(f"wrote capabilities.bin: {len(caps.content)} bytes")


if __name__ == "__main__":
    main()
