"""Acceptance gate: one criterion per test, one printed pass/fail line each.

Every criterion is checked against an independent oracle or a frozen
analytic value at its stated tolerance, and the heavyweight suites carry
their stated wall-clock budgets.
"""

from __future__ import annotations

import math
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np

from zescount.cli import main as cli_main
from zescount.dae import relax_peaks, score_boxes, sses_select
from zescount.dge import CandidateBox, filter_single_instance, gges_select
from zescount.fce import cluster_two, fres_select
from zescount.maps import kde_fit, normalized_entropy, percentile_threshold, roi_count
from zescount.pipeline import ablate, run_pipeline
from zescount.synthetic import SceneParams, SyntheticBackend, generate_scene
from zescount.types import (
    BBox,
    ClassPrompt,
    Exemplar,
    ImageRef,
    PipelineConfig,
    Point,
    Stage,
)

CFG = PipelineConfig().validate()
PROMPT = ClassPrompt("0")


@contextmanager
def criterion(capsys, label):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        with capsys.disabled():
            print(f"[FAIL] {label} ({time.perf_counter() - t0:.1f}s)")
        raise
    with capsys.disabled():
        print(f"[PASS] {label} ({time.perf_counter() - t0:.1f}s)")


def scene_backend(seed, n, merge=0.0, max_overlap=0.3, axes=(5.0, 9.0)):
    params = SceneParams(
        n_objects=n, merge_rate=merge, semi_axis_range=axes,
        max_overlap=max_overlap,
    )
    return SyntheticBackend(generate_scene(params, seed), image_id=f"scene-{seed:03d}")


def fixed_suite():
    """The 100-scene end-to-end suite: seeds 0-99, counts 5-50, three merge levels."""

    for seed in range(100):
        n = 5 + (seed * 45) // 99
        merge = (0.0, 0.5, 0.8)[seed % 3]
        yield scene_backend(seed, n, merge), float(n)


# -- criterion 1: map formula suite ------------------------------------------

def test_c1_formula_suite(capsys):
    with criterion(capsys, "criterion 1: map formulas (entropy, percentile, roi, kde mode)"):
        t0 = time.perf_counter()

        # analytic entropy values on 32 bins
        full = BBox(0, 0, 8, 4)
        constant = np.full((4, 8), 0.3)
        assert abs(normalized_entropy(constant, full, 32) - 0.0) <= 1e-9
        one_per_bin = np.array([(i + 0.5) / 32 for i in range(32)]).reshape(4, 8)
        assert abs(normalized_entropy(one_per_bin, full, 32) - 1.0) <= 1e-9
        two_levels = np.array([0.2] * 16 + [0.9] * 16).reshape(4, 8)
        expected = math.log(2.0) / math.log(32.0)
        assert abs(normalized_entropy(two_levels, full, 32) - expected) <= 1e-9

        # nearest-rank percentile against a full-sort oracle, exact
        rng = np.random.default_rng(11)
        for _ in range(1000):
            size = int(rng.integers(1, 301))
            w = int(rng.integers(1, size + 1))
            h = (size + w - 1) // w
            values = rng.random((h, w))
            if rng.random() < 0.3:
                values = np.round(values, 1)  # force ties
            p = float(rng.uniform(0.0, 100.0))
            flat = np.sort(values.ravel())
            k = max(1, math.ceil(Fraction(p) * flat.size / 100))
            assert percentile_threshold(values, p) == flat[k - 1]

        # region sums against direct slicing, bit-exact
        for _ in range(300):
            h, w = int(rng.integers(2, 40)), int(rng.integers(2, 40))
            values = rng.random((h, w))
            x0 = int(rng.integers(0, w - 1))
            y0 = int(rng.integers(0, h - 1))
            box = BBox(x0, y0, int(rng.integers(x0 + 1, w + 1)), int(rng.integers(y0 + 1, h + 1)))
            assert roi_count(values, box) == float(values[box.y0:box.y1, box.x0:box.x1].sum())

        # kde mode against a 10,000-point dense-grid oracle
        for trial in range(200):
            kind = trial % 4
            n = int(rng.integers(2, 41))
            if kind == 0:
                samples = rng.uniform(0.0, 4.0, n)
            elif kind == 1:
                samples = rng.normal(1.2, 0.15, n)
            elif kind == 2:
                half = n // 2
                samples = np.concatenate(
                    [rng.normal(1.0, 0.1, half), rng.normal(1.6, 0.1, n - half)]
                )
            else:
                samples = np.array([float(rng.uniform(0.5, 2.5))])  # singleton
            est = kde_fit(samples)
            lo, hi = float(samples.min()), float(samples.max())
            grid = np.linspace(lo - 3.0 * est.bandwidth, hi + 3.0 * est.bandwidth, 10_000)
            z = (grid[:, None] - samples[None, :]) / est.bandwidth
            dens = np.exp(-0.5 * z * z).sum(axis=1)
            oracle_mode = float(grid[int(np.argmax(dens))])
            cell = (grid[-1] - grid[0]) / (10_000 - 1)
            assert abs(est.mode - oracle_mode) <= 2.0 * cell + 1e-12

        assert time.perf_counter() - t0 < 10.0


# -- criterion 2: score recomputation and tie determinism ---------------------

def test_c2_scores_bit_exact_and_ties_deterministic(capsys):
    with criterion(capsys, "criterion 2: stage scores recompute bit-exactly; ties deterministic"):
        backend = scene_backend(7, 20)
        sim = backend.text_similarity(backend.image, PROMPT)
        detections = backend.detect(backend.image, PROMPT, CFG.detection_threshold)

        scored = score_boxes(detections, sim, CFG)
        assert scored
        for s in scored:
            recomputed = CFG.alpha * s.detection.confidence + (1.0 - CFG.alpha) * (1.0 - s.entropy)
            assert recomputed == s.score

        peaks, _ = relax_peaks(sim, scored[0].detection.box, CFG)
        dae_ex, masks = sses_select(backend.image, peaks, sim, backend.segment_point, CFG)
        assert masks
        for m in masks:
            assert CFG.w_sim * m.similarity + CFG.w_ent * (1.0 - m.entropy) == m.score

        density = backend.count_density(backend.image, [dae_ex])
        singles = []
        for i, box in enumerate(backend.render.boxes):
            singles.append(
                CandidateBox(
                    box=box, roi=roi_count(density, box),
                    source=Point(box.x0, box.y0), mask=backend.render.masks[i],
                )
            )
        singles = filter_single_instance(singles, CFG)
        assert singles
        _, gges_scores, _ = gges_select(singles, None, CFG)
        for g in gges_scores:
            assert CFG.alpha * g.closeness + (1.0 - CFG.alpha) * (1.0 - g.entropy) == g.score

        # tie rule determinism, 100 repeated runs per selector
        box_orders = set()
        for _ in range(100):
            order = tuple(
                s.detection.box.as_tuple()
                for s in score_boxes(detections, np.full_like(sim, 0.5), CFG)
            )
            box_orders.add(order)
        assert len(box_orders) == 1

        def bump_map(cx):
            out = np.zeros((64, 64))
            yy, xx = np.mgrid[0:64, 0:64]
            out += np.exp(-(((xx - cx) ** 2 + (yy - 32) ** 2) / 50.0))
            return out

        tie_sim = np.maximum(bump_map(16), bump_map(48))

        def disk_segmenter(image, point):
            yy, xx = np.mgrid[0:64, 0:64]
            return ((xx - point.x) ** 2 + (yy - point.y) ** 2) <= 36

        sses_winners = set()
        fake_image = ImageRef("tie", 64, 64)
        for _ in range(100):
            ex, _ = sses_select(
                fake_image, [Point(16, 32), Point(48, 32)], tie_sim, disk_segmenter, CFG
            )
            sses_winners.add(ex.box.as_tuple())
        assert len(sses_winners) == 1

        tied = [
            CandidateBox(box=BBox(0, 0, 4, 4), roi=1.3, source=Point(1, 1),
                         mask=np.ones((8, 8), dtype=bool)),
            CandidateBox(box=BBox(4, 4, 8, 8), roi=1.3, source=Point(5, 5),
                         mask=np.zeros((8, 8), dtype=bool) | True),
        ]
        gges_winners = set()
        for _ in range(100):
            ex, _, _ = gges_select(tied, None, CFG)
            gges_winners.add(ex.box.as_tuple())
        assert gges_winners == {(0, 0, 4, 4)}

        vec = np.zeros(6)
        vec[0] = 1.0
        feats = np.tile(vec[:, None, None], (1, 1, 3)).astype(np.float64)
        fres_boxes = [BBox(0, 0, 4, 4), BBox(4, 0, 8, 4), BBox(8, 0, 12, 4)]
        fres_winners = set()
        for _ in range(100):
            ex, _, _ = fres_select(fres_boxes, feats, 12, 4)
            fres_winners.add(ex.box.as_tuple())
        assert fres_winners == {(0, 0, 4, 4)}


# -- criterion 3: mask refinement returns true object boxes -------------------

def test_c3_mask_refinement_recovers_object_boxes(capsys):
    with criterion(capsys, "criterion 3: refinement yields single-object boxes under merging"):
        t0 = time.perf_counter()

        def dae_box(backend):
            sim = backend.text_similarity(backend.image, PROMPT)
            dets = backend.detect(backend.image, PROMPT, CFG.detection_threshold)
            scored = score_boxes(dets, sim, CFG)
            coarse = scored[0]
            peaks, _ = relax_peaks(sim, coarse.detection.box, CFG)
            ex, _ = sses_select(backend.image, peaks, sim, backend.segment_point, CFG)
            return ex.box, coarse.detection.box

        hits = 0
        for seed in range(50):
            backend = scene_backend(seed, 8 + seed % 8, merge=0.8)
            box, _ = dae_box(backend)
            if box in backend.render.boxes:
                hits += 1
        assert hits >= 45  # >= 90% of merged scenes

        for seed in range(50):
            backend = scene_backend(seed, 8 + seed % 8, merge=0.0)
            box, detector_box = dae_box(backend)
            assert box == detector_box  # verifies, does not alter

        assert time.perf_counter() - t0 < 60.0


# -- criterion 4: single-instance filter --------------------------------------

def test_c4_single_instance_filter_zero_violations(capsys):
    with criterion(capsys, "criterion 4: single-instance filter keeps singles, rejects pairs"):
        for seed in range(100):
            n = 4 + seed % 12
            # narrow size band keeps every true box inside the filter window
            backend = scene_backend(seed, n, max_overlap=0.1, axes=(6.0, 8.0))
            render = backend.render
            density = backend.count_density(
                backend.image, [Exemplar(render.boxes[0], Stage.DAE, 1.0)]
            )

            candidates = []
            n_singles = len(render.boxes)
            for i, box in enumerate(render.boxes):
                candidates.append(
                    CandidateBox(box=box, roi=roi_count(density, box),
                                 source=Point(box.x0, box.y0), mask=render.masks[i])
                )

            centers = np.array([[o.cx, o.cy] for o in backend.scene.objects])
            pair_rois = []
            for i in range(n):
                d2 = np.sum((centers - centers[i]) ** 2, axis=1)
                d2[i] = np.inf
                j = int(np.argmin(d2))
                pair_box = render.boxes[i].enclosing(render.boxes[j])
                roi = roi_count(density, pair_box)
                pair_rois.append(roi)
                mask = render.masks[i] | render.masks[j]
                candidates.append(
                    CandidateBox(box=pair_box, roi=roi,
                                 source=Point(pair_box.x0, pair_box.y0), mask=mask)
                )

            # oracle premise: a two-object box always carries mass >= 1.9
            assert min(pair_rois) >= 1.9

            kept = filter_single_instance(candidates, CFG)
            assert len(kept) == n_singles
            assert all(c is candidates[i] for i, c in enumerate(kept))


# -- criterion 5: clustering quality and consensus majority -------------------

def _split_objective_oracle(D: np.ndarray, labels: np.ndarray) -> float:
    total = 0.0
    for side in (0, 1):
        rows = D[labels == side]
        if len(rows):
            total += float(np.linalg.norm(rows.sum(axis=0)))
    return total


def _exhaustive_optimum(D: np.ndarray) -> float:
    n = len(D)
    masks = np.arange(2 ** (n - 1), dtype=np.uint64)
    bits = ((masks[:, None] >> np.arange(n, dtype=np.uint64)) & 1).astype(np.float64)
    s1 = bits @ D
    s0 = D.sum(axis=0)[None, :] - s1
    norms = np.linalg.norm(s0, axis=1) + np.linalg.norm(s1, axis=1)
    # the all-in-one-side split is mask 0 with ||sum|| + ||0||
    return float(norms.max())


def test_c5_clustering_near_optimal_and_majority_consensus(capsys):
    with criterion(capsys, "criterion 5: two-way split near-optimal; winner always in majority"):
        rng = np.random.default_rng(99)
        for trial in range(500):
            n = int(rng.integers(2, 13))
            dim = (3, 6, 16)[trial % 3]
            regime = trial % 2
            if regime == 0:
                D = rng.standard_normal((n, dim))
            else:
                centers = rng.standard_normal((2, dim))
                assign = rng.integers(0, 2, n)
                D = centers[assign] + 0.15 * rng.standard_normal((n, dim))
            D = D / np.linalg.norm(D, axis=1, keepdims=True)

            result = cluster_two(D)
            achieved = _split_objective_oracle(D, result.assignments)
            optimum = _exhaustive_optimum(D)
            assert achieved >= 0.95 * optimum - 1e-9

            feats = np.ascontiguousarray(D.T[:, None, :])  # (dim, 1, n) cell grid
            boxes = [BBox(4 * i, 0, 4 * i + 4, 4) for i in range(n)]
            ex, scores, _ = fres_select(boxes, feats, 4 * n, 4)
            winner = next(s for s in scores if s.box == ex.box)
            assert winner.in_majority


# -- criterion 6: end-to-end counting on the fixed suite ----------------------

def test_c6_end_to_end_counting(capsys):
    with criterion(capsys, "criterion 6: end-to-end counting on the 100-scene suite"):
        t0 = time.perf_counter()
        abs_errors = []
        within = 0
        for backend, gt in fixed_suite():
            result = run_pipeline(backend.image, "0", backend, CFG)
            err = abs(result.final_count - gt)
            abs_errors.append(err)
            if err / gt <= 0.10:
                within += 1
        assert within >= 90
        assert float(np.mean(abs_errors)) <= 2.0
        assert time.perf_counter() - t0 < 300.0


# -- criterion 7: ablation error ordering -------------------------------------

def test_c7_ablation_error_ordering(capsys):
    with criterion(capsys, "criterion 7: ablation error ordering across stage subsets"):
        cases = ((b.image, "0", b, gt) for b, gt in fixed_suite())
        table = ablate(cases, CFG)
        mae = {row.label: row.mae for row in table}
        assert mae["full"] <= mae["dae+dge"] + 1e-12
        assert mae["dae+dge"] <= mae["dae"] + 1e-12
        best_top3 = min(mae["dae_top3"], mae["dge_top3"], mae["fce_top3"])
        assert mae["full"] <= best_top3 + 1e-12


# -- criterion 8: determinism of the metrics CSV ------------------------------

def test_c8_metrics_csv_deterministic(capsys, tmp_path):
    with criterion(capsys, "criterion 8: repeated benchmark runs are bit-identical"):
        suite = tmp_path / "suite"
        assert cli_main([
            "gen", "--n-scenes", "10", "--objects", "9", "--seed", "123",
            "--out", str(suite),
        ]) == 0
        first = tmp_path / "first.csv"
        second = tmp_path / "second.csv"
        assert cli_main(["bench", "--scenes", str(suite), "--out", str(first)]) == 0
        assert cli_main(["bench", "--scenes", str(suite), "--out", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()
