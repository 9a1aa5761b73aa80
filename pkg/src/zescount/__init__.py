"""Zero-shot exemplar selection counting.

Given only a class name, the pipeline bootstraps counting exemplars in
three stages (detection-anchored, density-guided, feature-consensus)
against any backend implementing the five-capability perception
protocol, then integrates an exemplar-conditioned density map into the
final count.
"""

from __future__ import annotations

from .backend import BackendCapabilities, PerceptionBackend, check_capabilities
from .errors import (
    ArtifactIOError,
    BackendError,
    BoundsError,
    ConfigError,
    ContractError,
    EmptyRegionError,
    PlacementError,
    StageUnavailable,
    ZesError,
)
from .pipeline import (
    PipelineResult,
    StageDiagnostics,
    ablate,
    evaluate,
    execute_pipeline,
    run_pipeline,
)
from .remote import RemoteBackend
from .synthetic import SceneParams, SyntheticBackend, generate_scene, load_scene, save_scene
from .types import (
    BBox,
    ClassPrompt,
    Detection,
    Exemplar,
    ImageRef,
    PipelineConfig,
    Point,
    Stage,
)

__version__ = "0.1.0"

__all__ = [
    "ArtifactIOError",
    "BBox",
    "BackendCapabilities",
    "BackendError",
    "BoundsError",
    "ClassPrompt",
    "ConfigError",
    "ContractError",
    "Detection",
    "EmptyRegionError",
    "Exemplar",
    "ImageRef",
    "PerceptionBackend",
    "PipelineConfig",
    "PipelineResult",
    "PlacementError",
    "Point",
    "RemoteBackend",
    "SceneParams",
    "Stage",
    "StageDiagnostics",
    "StageUnavailable",
    "SyntheticBackend",
    "ZesError",
    "ablate",
    "check_capabilities",
    "evaluate",
    "execute_pipeline",
    "generate_scene",
    "load_scene",
    "run_pipeline",
    "save_scene",
    "__version__",
]
