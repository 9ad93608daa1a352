"""Exception types shared across the package."""


class UnsupportedParameterError(ValueError):
    """A parameter value outside the supported set (e.g. an unimplemented smoothness)."""


class UnsupportedDimensionError(ValueError):
    """Requested dimension exceeds the embedded generator tables."""


class InsufficientDataError(ValueError):
    """Not enough levels or samples to perform the requested fit."""


class SolverDivergenceError(RuntimeError):
    """Multigrid failed to reach tolerance within the cycle cap.

    Carries the residual history so the failure can be diagnosed instead of
    silently biasing an estimator.
    """

    def __init__(self, message, residual_history=None, context=None):
        super().__init__(message)
        self.residual_history = list(residual_history) if residual_history is not None else []
        self.context = dict(context) if context else {}


class MaxLevelExceededError(RuntimeError):
    """Estimator needed more levels than allowed; carries the partial result."""

    def __init__(self, message, partial_result=None):
        super().__init__(message)
        self.partial_result = partial_result


class ConfigError(ValueError):
    """Invalid experiment configuration; message includes the offending line."""
