"""Three-stage exemplar selection pipeline and its evaluation harness.

Stage order is fixed: detection-anchored, then density-guided, then
feature-consensus. Every stage that fails falls back without aborting the
run (raw detection box, duplicated previous exemplar), so a completed run
always carries three exemplars unless the detector finds nothing at all,
in which case the count is zero by construction.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .backend import PerceptionBackend, check_capabilities
from .dae import ScoredMask, relax_peaks, score_boxes, sses_select
from .dge import (
    GgesScore,
    exemplar_similarity_map,
    filter_single_instance,
    gges_select,
    p2p_prompts,
    prompts_to_candidates,
)
from .errors import BackendError, BoundsError, ConfigError, StageUnavailable
from .fce import FresScore, fres_select
from .maps import local_peaks, percentile_threshold
from .types import (
    BBox,
    ClassPrompt,
    Detection,
    Exemplar,
    ImageRef,
    PipelineConfig,
    Stage,
    mask_to_bbox,
)

# fallback markers recorded in stage diagnostics
FLAG_EMPTY = "empty"                      # no detections, no similarity peaks
FLAG_NO_DETECTIONS = "no_detections"      # no detections despite peaks
FLAG_DAE_RAW = "dae_raw_detection"        # mask refinement failed, raw box kept
FLAG_DGE_DUPLICATE = "dge_duplicate"      # no single-instance candidates
FLAG_DGE_DEGRADED = "dge_degraded"        # featurizer down, entropy term pinned
FLAG_FCE_FALLBACK = "fce_fallback"        # consensus failed, previous box kept


@dataclass
class StageDiagnostics:
    """What one stage saw and decided; fields unused by a stage stay None."""

    stage: str
    candidate_count: int = 0
    fallback: str | None = None
    winner_score: float | None = None
    final_percentile: float | None = None  # detection-anchored stage only
    pseudo_count: float | None = None      # density-guided stage: KDE mode
    majority_size: int | None = None       # feature-consensus stage only
    seconds: float = 0.0


@dataclass
class PipelineResult:
    """Serializable outcome of one pipeline run."""

    image_id: str
    prompt: str
    final_count: float
    empty: bool
    exemplars: list[Exemplar]
    diagnostics: dict[str, StageDiagnostics]
    timings: dict[str, float]


@dataclass
class PipelineRun:
    """A result plus the working state ablations and artifacts reuse."""

    result: PipelineResult
    config: PipelineConfig
    similarity: np.ndarray = field(repr=False)
    density: np.ndarray | None = field(repr=False)
    detections: list[Detection] = field(default_factory=list)
    dae_candidates: list[ScoredMask] = field(default_factory=list)
    dge_candidates: list[GgesScore] = field(default_factory=list)
    fce_candidates: list[FresScore] = field(default_factory=list)


def _check_similarity(sim: np.ndarray, image: ImageRef) -> np.ndarray:
    if sim.shape != (image.height, image.width):
        raise BackendError(
            f"similarity shape {sim.shape} does not match image {image.width}x{image.height}"
        )
    if not np.all(np.isfinite(sim)):
        raise BackendError("similarity map contains non-finite values")
    if float(sim.min()) < -1e-9 or float(sim.max()) > 1.0 + 1e-9:
        raise BackendError("similarity values escape [0, 1]")
    return sim


def _checked_features(backend: PerceptionBackend, image: ImageRef) -> np.ndarray | None:
    """Feature map, or None when the featurizer is down (degraded mode).

    A delivered map that violates the resolution contract is a hard error:
    grids must be at least ceil(dim / 4) on each axis.
    """

    try:
        features = backend.feature_map(image)
    except BackendError:
        return None
    if features.ndim != 3:
        raise BackendError(f"feature map must be (C, gh, gw), got {features.shape}")
    _, gh, gw = features.shape
    if gh < math.ceil(image.height / 4) or gw < math.ceil(image.width / 4):
        raise BackendError(
            f"feature grid {gh}x{gw} below contract for {image.width}x{image.height}"
        )
    return features


def execute_pipeline(
    image: ImageRef,
    prompt: ClassPrompt | str,
    backend: PerceptionBackend,
    cfg: PipelineConfig | None = None,
) -> PipelineRun:
    """Run all three stages and count; returns the result with working state."""

    cfg = (cfg or PipelineConfig()).validate()
    if isinstance(prompt, str):
        prompt = ClassPrompt(prompt)
    check_capabilities(backend.capabilities())

    timings: dict[str, float] = {}
    diagnostics: dict[str, StageDiagnostics] = {}
    t_total = time.perf_counter()

    t0 = time.perf_counter()
    similarity = _check_similarity(
        np.asarray(backend.text_similarity(image, prompt), dtype=np.float64), image
    )
    detections = backend.detect(image, prompt, cfg.detection_threshold)
    for det in detections:
        try:
            det.box.check_inside(image.width, image.height)
        except BoundsError as exc:
            raise BackendError(f"detector returned an out-of-bounds box: {exc}") from exc

    if not detections:
        # nothing to anchor on: count zero, but distinguish a genuinely empty
        # image from a detector miss over a live similarity map
        tau = percentile_threshold(similarity, cfg.percentile_start)
        flag = FLAG_NO_DETECTIONS if local_peaks(similarity, tau, cfg.peak_window) else FLAG_EMPTY
        timings["dae"] = time.perf_counter() - t0
        timings["total"] = time.perf_counter() - t_total
        diagnostics["dae"] = StageDiagnostics(
            stage="dae", fallback=flag, seconds=timings["dae"]
        )
        result = PipelineResult(
            image_id=image.id,
            prompt=prompt.text,
            final_count=0.0,
            empty=True,
            exemplars=[],
            diagnostics=diagnostics,
            timings=timings,
        )
        return PipelineRun(
            result=result, config=cfg, similarity=similarity, density=None,
            detections=[],
        )

    # -- detection-anchored stage -------------------------------------------
    scored_boxes = score_boxes(detections, similarity, cfg)
    coarse = scored_boxes[0]
    dae_candidates: list[ScoredMask] = []
    try:
        peaks, final_p = relax_peaks(similarity, coarse.detection.box, cfg)
        dae_ex, dae_candidates = sses_select(
            image, peaks, similarity, backend.segment_point, cfg
        )
        dae_diag = StageDiagnostics(
            stage="dae",
            candidate_count=len(dae_candidates),
            winner_score=dae_ex.score,
            final_percentile=final_p,
        )
    except StageUnavailable:
        dae_ex = Exemplar(coarse.detection.box, Stage.DAE, coarse.score)
        dae_diag = StageDiagnostics(
            stage="dae", fallback=FLAG_DAE_RAW, winner_score=coarse.score
        )
    dae_diag.seconds = time.perf_counter() - t0
    timings["dae"] = dae_diag.seconds
    diagnostics["dae"] = dae_diag

    # -- density-guided stage -------------------------------------------------
    t0 = time.perf_counter()
    features = _checked_features(backend, image)
    dge_candidates: list[GgesScore] = []
    dge_density = np.asarray(backend.count_density(image, [dae_ex]), dtype=np.float64)
    prompts = p2p_prompts(dge_density, detections, cfg)
    candidates = prompts_to_candidates(image, prompts, dge_density, backend.segment_point)
    singles = filter_single_instance(candidates, cfg)
    if singles:
        degraded = features is None
        sim_map = None
        if not degraded:
            sim_map = exemplar_similarity_map(features, dae_ex.box, image.width, image.height)
        dge_ex, dge_candidates, kde = gges_select(singles, sim_map, cfg)
        dge_diag = StageDiagnostics(
            stage="dge",
            candidate_count=len(singles),
            fallback=FLAG_DGE_DEGRADED if degraded else None,
            winner_score=dge_ex.score,
            pseudo_count=kde.mode,
        )
    else:
        dge_ex = Exemplar(dae_ex.box, dae_ex.stage, dae_ex.score)
        dge_diag = StageDiagnostics(stage="dge", fallback=FLAG_DGE_DUPLICATE)
    dge_diag.seconds = time.perf_counter() - t0
    timings["dge"] = dge_diag.seconds
    diagnostics["dge"] = dge_diag

    # -- feature-consensus stage ----------------------------------------------
    t0 = time.perf_counter()
    fce_candidates: list[FresScore] = []
    try:
        if features is None:
            raise StageUnavailable("fce", "feature map unavailable")
        fce_density = np.asarray(backend.count_density(image, [dge_ex]), dtype=np.float64)
        fce_prompts = p2p_prompts(fce_density, detections, cfg)
        fce_cands = prompts_to_candidates(
            image, fce_prompts, fce_density, backend.segment_point
        )
        fce_singles = filter_single_instance(fce_cands, cfg)
        if not fce_singles:
            raise StageUnavailable("fce", "no single-instance candidates")
        fce_ex, fce_candidates, cluster = fres_select(
            [c.box for c in fce_singles], features, image.width, image.height
        )
        fce_diag = StageDiagnostics(
            stage="fce",
            candidate_count=len(fce_singles),
            winner_score=fce_ex.score,
            majority_size=cluster.majority_size,
        )
    except StageUnavailable:
        fce_ex = Exemplar(dge_ex.box, dge_ex.stage, dge_ex.score)
        fce_diag = StageDiagnostics(stage="fce", fallback=FLAG_FCE_FALLBACK)
    fce_diag.seconds = time.perf_counter() - t0
    timings["fce"] = fce_diag.seconds
    diagnostics["fce"] = fce_diag

    # -- final count ------------------------------------------------------------
    t0 = time.perf_counter()
    exemplars = [dae_ex, dge_ex, fce_ex]
    if cfg.average_exemplar_densities:
        maps = [
            np.asarray(backend.count_density(image, [ex]), dtype=np.float64)
            for ex in exemplars
        ]
        density = np.mean(maps, axis=0)
    else:
        density = np.asarray(backend.count_density(image, exemplars), dtype=np.float64)
    final_count = float(density.sum())
    timings["count"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_total

    result = PipelineResult(
        image_id=image.id,
        prompt=prompt.text,
        final_count=final_count,
        empty=False,
        exemplars=exemplars,
        diagnostics=diagnostics,
        timings=timings,
    )
    return PipelineRun(
        result=result,
        config=cfg,
        similarity=similarity,
        density=density,
        detections=detections,
        dae_candidates=dae_candidates,
        dge_candidates=dge_candidates,
        fce_candidates=fce_candidates,
    )


def run_pipeline(
    image: ImageRef,
    prompt: ClassPrompt | str,
    backend: PerceptionBackend,
    cfg: PipelineConfig | None = None,
) -> PipelineResult:
    return execute_pipeline(image, prompt, backend, cfg).result


# ---------------------------------------------------------------------------
# result serialization
# ---------------------------------------------------------------------------

def result_to_dict(result: PipelineResult) -> dict:
    return {
        "image_id": result.image_id,
        "prompt": result.prompt,
        "final_count": result.final_count,
        "empty": result.empty,
        "exemplars": [
            {"box": list(ex.box.as_tuple()), "stage": str(ex.stage), "score": ex.score}
            for ex in result.exemplars
        ],
        "diagnostics": {
            name: {
                "stage": diag.stage,
                "candidate_count": diag.candidate_count,
                "fallback": diag.fallback,
                "winner_score": diag.winner_score,
                "final_percentile": diag.final_percentile,
                "pseudo_count": diag.pseudo_count,
                "majority_size": diag.majority_size,
                "seconds": diag.seconds,
            }
            for name, diag in result.diagnostics.items()
        },
        "timings": dict(result.timings),
    }


def result_from_dict(doc: dict) -> PipelineResult:
    try:
        exemplars = [
            Exemplar(BBox(*ex["box"]), Stage(ex["stage"]), float(ex["score"]))
            for ex in doc["exemplars"]
        ]
        diagnostics = {
            name: StageDiagnostics(**diag) for name, diag in doc["diagnostics"].items()
        }
        return PipelineResult(
            image_id=doc["image_id"],
            prompt=doc["prompt"],
            final_count=float(doc["final_count"]),
            empty=bool(doc["empty"]),
            exemplars=exemplars,
            diagnostics=diagnostics,
            timings={k: float(v) for k, v in doc["timings"].items()},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed result document: {exc}") from exc


def result_to_json(result: PipelineResult) -> str:
    return json.dumps(result_to_dict(result), indent=2, sort_keys=True)


def result_from_json(text: str) -> PipelineResult:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"result is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("result document must be a JSON object")
    return result_from_dict(doc)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalRow:
    image_id: str
    predicted: float
    ground_truth: float

    @property
    def abs_error(self) -> float:
        return abs(self.predicted - self.ground_truth)


@dataclass(frozen=True)
class GroupStats:
    count: int
    mae: float
    rmse: float


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[EvalRow, ...]
    mae: float
    rmse: float
    terciles: dict[str, GroupStats]


def _stats(rows: Sequence[EvalRow]) -> GroupStats:
    errors = np.array([r.abs_error for r in rows], dtype=np.float64)
    return GroupStats(
        count=len(rows),
        mae=float(errors.mean()),
        rmse=float(np.sqrt(np.mean(errors * errors))),
    )


def evaluate(pairs: Sequence[tuple[str, float, float]]) -> EvalReport:
    """Aggregate count errors, overall and per ground-truth tercile.

    Terciles are split on ground-truth count with a stable sort, so images
    with equal counts stay in input order at the boundaries.
    """

    if not pairs:
        raise ConfigError("cannot evaluate an empty suite")
    rows = tuple(EvalRow(i, float(p), float(g)) for i, p, g in pairs)
    overall = _stats(rows)
    order = np.argsort([r.ground_truth for r in rows], kind="stable")
    n = len(rows)
    cuts = (n // 3, (2 * n) // 3)
    groups = {
        "low": [rows[i] for i in order[: cuts[0]]],
        "mid": [rows[i] for i in order[cuts[0]: cuts[1]]],
        "high": [rows[i] for i in order[cuts[1]:]],
    }
    terciles = {name: _stats(members) for name, members in groups.items() if members}
    return EvalReport(rows=rows, mae=overall.mae, rmse=overall.rmse, terciles=terciles)


# ---------------------------------------------------------------------------
# ablation
# ---------------------------------------------------------------------------

ABLATION_LABELS = (
    "dae", "dae+dge", "full",
    "dae_top3", "dge_top3", "fce_top3",
    "k=4", "k=8", "k=16",
)


@dataclass(frozen=True)
class AblationRow:
    label: str
    mae: float
    rmse: float
    predictions: tuple[float, ...]


def _count_with(backend, image: ImageRef, exemplars: Sequence[Exemplar]) -> float:
    return float(np.asarray(backend.count_density(image, list(exemplars))).sum())


def _top3_dae(run: PipelineRun) -> list[Exemplar]:
    ranked = sorted(run.dae_candidates, key=lambda sm: -sm.score)[:3]
    return [Exemplar(mask_to_bbox(sm.mask), Stage.DAE, sm.score) for sm in ranked]


def _top3_dge(run: PipelineRun) -> list[Exemplar]:
    ranked = sorted(run.dge_candidates, key=lambda gs: -gs.score)[:3]
    return [Exemplar(gs.candidate.box, Stage.DGE, gs.score) for gs in ranked]


def _top3_fce(run: PipelineRun) -> list[Exemplar]:
    majority = [fs for fs in run.fce_candidates if fs.in_majority]
    ranked = sorted(majority, key=lambda fs: -fs.cosine)[:3]
    return [Exemplar(fs.box, Stage.FCE, fs.cosine) for fs in ranked]


def ablate(
    cases: Iterable[tuple[ImageRef, str, PerceptionBackend, float]],
    cfg: PipelineConfig | None = None,
) -> list[AblationRow]:
    """Stage and prompt-budget ablations over a fixed suite.

    Single-run configurations (stage prefixes and per-stage top-3 sets) are
    derived from one full pipeline execution per image; the prompt-budget
    rows rerun the pipeline with k_peaks swept over {4, 8, 16}. Cases may
    be a lazy iterable; each backend is released once its image is done.
    """

    cfg = (cfg or PipelineConfig()).validate()
    predictions: dict[str, list[float]] = {label: [] for label in ABLATION_LABELS}
    truths: list[float] = []
    for image, prompt, backend, gt in cases:
        truths.append(float(gt))
        run = execute_pipeline(image, prompt, backend, cfg)
        if run.result.empty:
            for label in ABLATION_LABELS:
                predictions[label].append(0.0)
            continue
        dae_ex, dge_ex, fce_ex = run.result.exemplars
        predictions["dae"].append(_count_with(backend, image, [dae_ex]))
        predictions["dae+dge"].append(_count_with(backend, image, [dae_ex, dge_ex]))
        predictions["full"].append(run.result.final_count)
        for label, picks in (
            ("dae_top3", _top3_dae(run)),
            ("dge_top3", _top3_dge(run)),
            ("fce_top3", _top3_fce(run)),
        ):
            fallback = {"dae_top3": dae_ex, "dge_top3": dge_ex, "fce_top3": fce_ex}[label]
            exemplars = picks or [fallback]
            predictions[label].append(_count_with(backend, image, exemplars))
        for k in (4, 8, 16):
            sweep = replace(cfg, k_peaks=k)
            predictions[f"k={k}"].append(
                execute_pipeline(image, prompt, backend, sweep).result.final_count
            )

    rows = []
    gt = np.array(truths, dtype=np.float64)
    for label in ABLATION_LABELS:
        pred = np.array(predictions[label], dtype=np.float64)
        err = np.abs(pred - gt)
        rows.append(
            AblationRow(
                label=label,
                mae=float(err.mean()),
                rmse=float(np.sqrt(np.mean(err * err))),
                predictions=tuple(float(p) for p in pred),
            )
        )
    return rows
