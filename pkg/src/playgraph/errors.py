"""Exception types shared across the package."""


class PlayGraphError(Exception):
    """Base class for all package errors."""


class ShapeError(PlayGraphError, ValueError):
    """Operand shapes are incompatible. Message names both shapes."""


class ContractViolationError(PlayGraphError, ValueError):
    """A documented precondition was violated by the caller."""


class DataError(PlayGraphError, ValueError):
    """Malformed or invalid game-state data (bad record, wrong counts)."""


class UndefinedMetricError(PlayGraphError, ValueError):
    """Metric is undefined for this input (e.g. single-class AUC)."""


class SchemaMismatchError(PlayGraphError, ValueError):
    """Feature schema drift between a checkpoint and supplied inputs."""


class CheckpointFormatError(PlayGraphError, ValueError):
    """Checkpoint file is corrupt, truncated, or has a wrong version."""


class NonFiniteLossError(PlayGraphError, RuntimeError):
    """Training or evaluation produced a NaN/Inf loss."""


class TrainingDivergedError(NonFiniteLossError):
    """Training loss went non-finite; carries the last good parameters."""

    def __init__(self, message, params=None, history=None):
        super().__init__(message)
        self.params = params
        self.history = history


class MissingConfigError(PlayGraphError, ValueError):
    """A required configuration value (e.g. bombsite coordinates) is absent."""
