"""Exception vocabulary shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
BackendError -> 3, ArtifactIOError -> 4. Everything else is a bug.
"""

from __future__ import annotations


class ZesError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ZesError):
    """Invalid configuration value or malformed config/scene document."""


class ContractError(ZesError):
    """An internal data contract was violated (bad norm, bad bounds, bad shape)."""


class BoundsError(ContractError):
    """A box or point does not fit inside the map it is applied to."""


class EmptyRegionError(ContractError):
    """An operation that needs at least one pixel/member received none."""


class BackendError(ZesError):
    """A perception capability failed or returned garbage."""


class PlacementError(ZesError):
    """Scene generation could not place the requested objects."""


class ArtifactIOError(ZesError):
    """Reading or writing a scene/result/artifact file failed."""


class StageUnavailable(ZesError):
    """A selection stage could not produce an exemplar; caller applies the fallback ladder."""

    def __init__(self, stage: str, reason: str):
        super().__init__(f"{stage}: {reason}")
        self.stage = stage
        self.reason = reason
