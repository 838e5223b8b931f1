"""Exception hierarchy shared by every stage of the pipeline."""


class ScrAuthError(Exception):
    """Base class for all pipeline failures."""


class ParameterError(ScrAuthError, ValueError):
    """An argument violates a documented precondition."""


class ConfigurationError(ScrAuthError):
    """A model or pipeline configuration cannot be realized."""


class ClippingError(ScrAuthError):
    """A rendered waveform would leave the [-1, 1] range."""


class GenerationError(ScrAuthError):
    """Random population generation could not satisfy its constraints."""


class PilotNotFoundError(ScrAuthError):
    """No pilot correlation peak crossed the detection threshold."""


class TruncationError(ScrAuthError):
    """A recording ended before all requested frames were available.

    The frames that could be cut are kept on ``frames`` so callers can decide
    whether a partial burst is usable.
    """

    def __init__(self, message, frames):
        super().__init__(message)
        self.frames = frames


class SolverError(ScrAuthError):
    """The one-class QP solver stopped before reaching its KKT tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
