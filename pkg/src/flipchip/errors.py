"""Exception hierarchy shared by all flipchip modules."""


class FlipChipError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(FlipChipError, ValueError):
    """An argument lies outside the mathematical or physical domain."""


class NoSignChangeError(FlipChipError):
    """A bracketing root search was given an interval without a sign change."""


class ConvergenceError(FlipChipError):
    """An iterative method hit its iteration cap."""


class RankDeficiencyError(FlipChipError):
    """A least-squares problem has a degenerate design matrix."""


class NoResonanceError(FlipChipError):
    """No resonance could be located (frequency bracket or S11 trace)."""


class InputFormatError(FlipChipError, ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingBaselineError(FlipChipError, ValueError):
    """A design comparison lacks the zero-etch reference columns."""
