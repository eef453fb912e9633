"""Exception types raised by the toolkit."""


class TVTVError(Exception):
    """Base class for all toolkit errors."""


class ShapeMismatchError(TVTVError, ValueError):
    """Array or image dimensions disagree with an operator or partner image."""


class InvalidParameterError(TVTVError, ValueError):
    """A parameter is outside its admissible range."""


class GramSingularError(TVTVError, ArithmeticError):
    """The measurement Gram operator A A^H could not be inverted (CG stagnated)."""


class CGFailureError(TVTVError, ArithmeticError):
    """Conjugate gradient did not reach the requested tolerance."""


class MalformedHeaderError(TVTVError, ValueError):
    """A JSON header is unreadable or lacks required fields."""


class DTypeMismatchError(TVTVError, ValueError):
    """A header declares a dtype or layout this reader does not handle."""


class TruncatedPayloadError(TVTVError, ValueError):
    """A raw payload ends inside a value."""


class PayloadSizeError(TVTVError, ValueError):
    """A raw payload holds a whole number of values, but not as many as the header declares."""


class MaskMismatchError(TVTVError, ValueError):
    """A measurement file was produced with a different sampling mask."""
