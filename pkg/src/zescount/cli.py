"""Command line front end: scene generation, runs, benchmarks, ablations.

Exit codes: 0 success, 2 configuration problem, 3 backend failure,
4 file I/O failure. All randomness flows from the --seed argument.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .artifacts import emit_artifacts
from .errors import ArtifactIOError, BackendError, ConfigError, ZesError
from .pipeline import ablate, evaluate, execute_pipeline, result_to_json
from .remote import RemoteBackend
from .synthetic import (
    SceneParams,
    SyntheticBackend,
    generate_scene,
    load_scene,
    parse_prompt_class,
    save_scene,
)
from .types import ClassPrompt, ImageRef, PipelineConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zescount",
        description="Zero-shot exemplar selection counting over synthetic or remote perception backends.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a suite of synthetic scenes")
    gen.add_argument("--n-scenes", type=int, default=1)
    gen.add_argument("--objects", type=int, default=12)
    gen.add_argument("--merge-rate", type=float, default=0.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--width", type=int, default=256)
    gen.add_argument("--height", type=int, default=256)
    gen.add_argument("--axes", type=float, nargs=2, default=(6.0, 8.0),
                     metavar=("LO", "HI"), help="semi-axis range in pixels")
    gen.add_argument("--max-overlap", type=float, default=0.3)
    gen.add_argument("--out", type=Path, required=True, help="output directory")

    run = sub.add_parser("run", help="run the pipeline on one scene or image")
    run.add_argument("--scene", type=Path, help="synthetic scene JSON")
    run.add_argument("--image", type=Path, help="raster image (remote backend only)")
    run.add_argument("--prompt", default="0")
    run.add_argument("--backend", default="synthetic",
                     help="'synthetic' or 'remote:http://host:port'")
    run.add_argument("--config", type=Path, help="pipeline config JSON")
    run.add_argument("--emit", type=Path, help="directory for overlay/heatmap/result artifacts")

    bench = sub.add_parser("bench", help="evaluate a scene suite, write a metrics CSV")
    bench.add_argument("--scenes", type=Path, required=True, help="directory of scene JSON files")
    bench.add_argument("--prompt", default="0")
    bench.add_argument("--config", type=Path)
    bench.add_argument("--backend", default="synthetic")
    bench.add_argument("--out", type=Path, required=True, help="metrics CSV path")

    abl = sub.add_parser("ablate", help="stage and prompt-budget sweeps over a scene suite")
    abl.add_argument("--scenes", type=Path, required=True)
    abl.add_argument("--prompt", default="0")
    abl.add_argument("--config", type=Path)
    abl.add_argument("--out", type=Path, required=True, help="ablation CSV path")

    return parser


def _load_config(path: Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig().validate()
    try:
        text = path.read_text()
    except OSError as exc:
        raise ArtifactIOError(f"cannot read config {path}: {exc}") from exc
    return PipelineConfig.from_json(text)


def _scene_files(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise ArtifactIOError(f"scene directory {directory} does not exist")
    files = sorted(directory.glob("scene_*.json"))
    if not files:
        raise ConfigError(f"no scene_*.json files under {directory}")
    return files


def _make_backend(spec: str, scene_path: Path | None, image_path: Path | None):
    """Backend plus the image handle the pipeline should run on."""

    if spec == "synthetic":
        if image_path is not None:
            raise ConfigError("the synthetic backend runs on --scene files, not --image")
        if scene_path is None:
            raise ConfigError("--scene is required with the synthetic backend")
        backend = SyntheticBackend(load_scene(scene_path))
        return backend, backend.image
    if spec.startswith("remote:"):
        url = spec[len("remote:"):]
        backend = RemoteBackend(url)
        if (scene_path is None) == (image_path is None):
            raise ConfigError("remote backend needs exactly one of --scene or --image")
        if scene_path is not None:
            scene = load_scene(scene_path)
            return backend, scene.image_ref()
        try:
            from PIL import Image

            with Image.open(image_path) as img:
                width, height = img.size
        except OSError as exc:
            raise ArtifactIOError(f"cannot read image {image_path}: {exc}") from exc
        return backend, ImageRef(id=str(image_path), width=width, height=height)
    raise ConfigError(f"unknown backend {spec!r}; use 'synthetic' or 'remote:URL'")


def _ground_truth(scene, prompt: str) -> float:
    class_id = parse_prompt_class(ClassPrompt(prompt))
    return float(sum(1 for o in scene.objects if o.class_id == class_id))


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise ArtifactIOError(f"cannot write {path}: {exc}") from exc


def cmd_gen(args) -> int:
    params = SceneParams(
        width=args.width,
        height=args.height,
        n_objects=args.objects,
        semi_axis_range=(args.axes[0], args.axes[1]),
        merge_rate=args.merge_rate,
        max_overlap=args.max_overlap,
    )
    try:
        args.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ArtifactIOError(f"cannot create {args.out}: {exc}") from exc
    for i in range(args.n_scenes):
        scene = generate_scene(params, args.seed + i)
        path = args.out / f"scene_{i:03d}.json"
        save_scene(scene, path)
        print(path)
    return 0


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    backend, image = _make_backend(args.backend, args.scene, args.image)
    run = execute_pipeline(image, args.prompt, backend, cfg)
    if args.emit is not None:
        paths = emit_artifacts(run.result, run.similarity, run.density, args.emit)
        for name in sorted(paths):
            print(f"{name}: {paths[name]}", file=sys.stderr)
    print(result_to_json(run.result))
    return 0


def _suite_cases(args):
    cfg = _load_config(args.config)
    cases = []
    for path in _scene_files(args.scenes):
        scene = load_scene(path)
        backend = SyntheticBackend(scene, image_id=path.stem)
        cases.append((backend.image, args.prompt, backend, _ground_truth(scene, args.prompt)))
    return cfg, cases


def cmd_bench(args) -> int:
    if args.backend != "synthetic":
        raise ConfigError("bench needs ground truth, which only synthetic scenes carry")
    cfg, cases = _suite_cases(args)
    pairs = []
    for image, prompt, backend, gt in cases:
        result = execute_pipeline(image, prompt, backend, cfg).result
        pairs.append((image.id, result.final_count, gt))
    report = evaluate(pairs)
    rows = [[r.image_id, r.predicted, r.ground_truth, r.abs_error] for r in report.rows]
    rows.append(["summary", report.mae, report.rmse, ""])
    _write_csv(args.out, ["image_id", "predicted", "ground_truth", "abs_error"], rows)
    print(f"MAE={report.mae} RMSE={report.rmse} n={len(report.rows)}")
    for name in ("low", "mid", "high"):
        if name in report.terciles:
            g = report.terciles[name]
            print(f"{name}: n={g.count} MAE={g.mae} RMSE={g.rmse}")
    return 0


def cmd_ablate(args) -> int:
    cfg, cases = _suite_cases(args)
    table = ablate(cases, cfg)
    rows = [[row.label, row.mae, row.rmse] for row in table]
    _write_csv(args.out, ["label", "mae", "rmse"], rows)
    for row in table:
        print(f"{row.label}: MAE={row.mae} RMSE={row.rmse}")
    return 0


_COMMANDS = {
    "gen": cmd_gen,
    "run": cmd_run,
    "bench": cmd_bench,
    "ablate": cmd_ablate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 3
    except ArtifactIOError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4
    except ZesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
