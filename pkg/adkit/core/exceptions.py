"""Exception hierarchy.

Every error raised on purpose by adkit derives from ``AdkitError`` and carries
the process exit code the command line maps it to.
"""

from typing import Iterable, List, Optional


class AdkitError(Exception):
    """Base class for all adkit errors."""

    exit_code: int = 1

    def __init__(self, detail: str) -> None:
        super().__init__(detail)
        self.detail = detail


class PreconditionError(AdkitError, ValueError):
    """An operation was called with arguments violating its precondition."""


class ShapeError(PreconditionError):
    """Tensor shapes are incompatible."""


class ConfigError(AdkitError):
    """The run configuration is missing or invalid."""

    exit_code = 2


class DataError(AdkitError):
    """A dataset, image or mask cannot be read."""

    exit_code = 3


class ManifestError(DataError):
    """A dataset tree is inconsistent, e.g. anomalous samples without masks."""

    def __init__(self, detail: str, paths: Optional[Iterable[str]] = None) -> None:
        self.paths: List[str] = list(paths or [])
        if self.paths:
            detail = f"{detail}: " + ", ".join(self.paths)
        super().__init__(detail)


class CheckpointNotFoundError(AdkitError):
    """A checkpoint or memory-bank file does not exist."""

    exit_code = 4


class CheckpointError(AdkitError):
    """A tensor container is corrupt or does not match the expected layout."""

    exit_code = 4

    def __init__(self, detail: str, offset: Optional[int] = None) -> None:
        self.offset = offset
        if offset is not None:
            detail = f"{detail} (at byte offset {offset})"
        super().__init__(detail)


class WeightsLoadError(AdkitError):
    """Pretrained backbone weights cannot be loaded."""

    exit_code = 4
