"""Exception types raised across the package."""


class TlsNoiseError(Exception):
    """Base class for all package errors."""


class ValidationError(TlsNoiseError, ValueError):
    """An input violates a documented invariant."""


class ZeroDistance(ValidationError):
    """A dipole sits on (or within 1e-9 nm of) a qubit site."""


class DegenerateLayer(ValidationError):
    """A layer has zero measure where a positive one is required."""


class DegenerateSpectrum(TlsNoiseError):
    """An auto-spectrum vanishes, so the normalized cross-spectrum is undefined."""


class EmptyRange(ValidationError):
    pass


class GridCoverage(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class InvalidRange(ValidationError):
    pass


class NoBracket(TlsNoiseError):
    """The root-finding interval does not bracket a sign change."""


class QuadratureFailure(TlsNoiseError):
    pass


class AllRejected(TlsNoiseError):
    """Every hypothesis has zero likelihood; no posterior exists."""


class ParseError(ValidationError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonPositiveSigma(ParseError):
    pass


class UnsortedFrequencies(ParseError):
    pass
