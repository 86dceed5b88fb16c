"""Exception types shared across the package."""


class LumiguideError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(LumiguideError, ValueError):
    """A scalar or configuration value is outside its documented domain."""


class ShapeError(LumiguideError, ValueError):
    """An array argument has the wrong shape or channel count."""


class FormatError(LumiguideError, ValueError):
    """A file could not be parsed. Carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class SamplingDivergence(LumiguideError, ArithmeticError):
    """A sampler produced non-finite values. Carries the failing step index."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step
