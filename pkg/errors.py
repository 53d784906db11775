"""
Exception hierarchy shared by the GEMRank stages.

Every stage raises a subclass of GemRankError so the command line entry point can
report which stage failed without catching unrelated bugs.
"""


class GemRankError(Exception):
    """Base class for all errors raised by the toolkit."""


class ConfigError(GemRankError, ValueError):
    """Invalid configuration value, key or file."""


class RatingParseError(GemRankError, ValueError):
    """A line of the rating log could not be parsed."""

    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class SplitError(GemRankError):
    """The train/test split could not be produced."""


class TrainingError(GemRankError):
    """An optimizer produced non-finite parameters or loss."""

    def __init__(self, message: str, epoch: int, candidate: int | None = None):
        self.epoch = epoch
        self.candidate = candidate
        where = f"epoch {epoch}" if candidate is None else f"epoch {epoch}, hidden={candidate}"
        super().__init__(f"{message} ({where})")


class DimensionMismatchError(GemRankError, ValueError):
    """Vectors or matrices have incompatible shapes."""


class BasisMismatchError(GemRankError, ValueError):
    """An embedding model was built over a different basic entity than requested."""


class ArtifactError(GemRankError):
    """A persisted artifact is missing or malformed."""


class UnknownUserError(GemRankError, KeyError):
    """A user id does not occur in the indexed rating log."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""
