"""Heatmap palette, exemplar overlay, and on-disk result round-trip."""

from __future__ import annotations

import numpy as np
import pytest
from PIL import Image

from zescount.artifacts import (
    HEAT_LUT,
    STAGE_COLORS,
    emit_artifacts,
    load_result,
    render_heatmap,
    render_overlay,
)
from zescount.errors import ArtifactIOError
from zescount.pipeline import PipelineResult, run_pipeline
from zescount.synthetic import SceneParams, SyntheticBackend, generate_scene
from zescount.types import ClassPrompt

PROMPT = ClassPrompt("0")


def small_run(seed=4, n=6):
    params = SceneParams(
        width=96, height=96, n_objects=n, semi_axis_range=(6.0, 8.0),
    )
    backend = SyntheticBackend(generate_scene(params, seed))
    result = run_pipeline(backend.image, "0", backend)
    return backend, result


class TestPalette:
    def test_shape_and_dtype(self):
        assert HEAT_LUT.shape == (256, 3)
        assert HEAT_LUT.dtype == np.uint8

    def test_endpoints_frozen(self):
        assert tuple(HEAT_LUT[0]) == (0, 0, 4)
        assert tuple(HEAT_LUT[255]) == (252, 255, 164)

    def test_immutable(self):
        with pytest.raises(ValueError):
            HEAT_LUT[0] = (1, 2, 3)


class TestRenderHeatmap:
    def test_extremes_hit_palette_ends(self):
        grad = np.linspace(0.0, 1.0, 64).reshape(8, 8)
        rgb = render_heatmap(grad)
        assert rgb.shape == (8, 8, 3)
        assert tuple(rgb[0, 0]) == tuple(HEAT_LUT[0])
        assert tuple(rgb[-1, -1]) == tuple(HEAT_LUT[255])

    def test_constant_map_uses_midpoint(self):
        rgb = render_heatmap(np.full((5, 5), 3.7))
        assert np.all(rgb == HEAT_LUT[128])  # 0.5 normalized, rounded

    def test_scale_invariant(self):
        base = np.random.default_rng(0).random((16, 16))
        assert np.array_equal(render_heatmap(base), render_heatmap(base * 40.0 + 7.0))


class TestRenderOverlay:
    def test_boxes_painted_with_stage_colors(self):
        backend, result = small_run()
        sim = backend.text_similarity(backend.image, PROMPT)
        rgb = render_overlay(sim, result)
        assert rgb.shape == (96, 96, 3)
        for ex in result.exemplars:
            assert tuple(rgb[ex.box.y0, ex.box.x0]) == STAGE_COLORS[ex.stage]

    def test_no_exemplars_is_plain_grayscale(self):
        sim = np.zeros((12, 12))
        sim[6, 6] = 1.0
        empty = PipelineResult(
            image_id="x", prompt="0", final_count=0.0, empty=True,
            exemplars=[], diagnostics={}, timings={},
        )
        rgb = render_overlay(sim, empty)
        assert np.all(rgb[:, :, 0] == rgb[:, :, 1])
        assert np.all(rgb[:, :, 1] == rgb[:, :, 2])


class TestEmitArtifacts:
    def test_files_written_and_readable(self, tmp_path):
        backend, result = small_run()
        sim = backend.text_similarity(backend.image, PROMPT)
        density = backend.count_density(backend.image, result.exemplars)
        paths = emit_artifacts(result, sim, density, tmp_path / "out")
        assert set(paths) == {"similarity", "density", "overlay", "result"}
        for name in ("similarity", "density", "overlay"):
            with Image.open(paths[name]) as img:
                assert img.size == (96, 96)
                assert img.format == "PNG"

    def test_result_document_round_trips(self, tmp_path):
        backend, result = small_run(seed=9)
        sim = backend.text_similarity(backend.image, PROMPT)
        paths = emit_artifacts(result, sim, None, tmp_path)
        assert load_result(paths["result"]) == result

    def test_density_omitted_when_absent(self, tmp_path):
        backend, result = small_run()
        sim = backend.text_similarity(backend.image, PROMPT)
        paths = emit_artifacts(result, sim, None, tmp_path)
        assert "density" not in paths
        assert not (tmp_path / "density.png").exists()

    def test_unwritable_target_raises(self, tmp_path):
        blocker = tmp_path / "occupied"
        blocker.write_text("file, not dir")
        backend, result = small_run()
        sim = backend.text_similarity(backend.image, PROMPT)
        with pytest.raises(ArtifactIOError):
            emit_artifacts(result, sim, None, blocker / "nested")

    def test_missing_result_file(self, tmp_path):
        with pytest.raises(ArtifactIOError):
            load_result(tmp_path / "nowhere.json")
