"""Exception types raised across the package.

Every error derives from :class:`LevelBandError`, so callers that only want
to distinguish "our" failures from programming bugs can catch that one.
"""


class LevelBandError(Exception):
    """Base class for all package errors."""


# field
class UnknownField(LevelBandError, KeyError):
    pass


class BadParamArity(LevelBandError, ValueError):
    pass


class GridTooSmall(LevelBandError, ValueError):
    pass


class NonFiniteSample(LevelBandError, ValueError):
    pass


class OutsideWindow(LevelBandError, ValueError):
    """A point outside the field's window was queried (no extrapolation)."""


# exprlang
class ExprSyntaxError(LevelBandError, ValueError):
    """Malformed expression text; ``offset`` is the byte offset of the culprit."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class UnknownFunction(ExprSyntaxError):
    pass


class UnknownVariable(ExprSyntaxError):
    pass


class DomainFault(LevelBandError, ArithmeticError):
    """The expression is not C^2 (or not defined) at a point."""

    def __init__(self, message, subexpr=None, point=None):
        where = ""
        if subexpr is not None:
            where += f" in `{subexpr}`"
        if point is not None:
            where += f" at ({point[0]:.12g}, {point[1]:.12g})"
        super().__init__(message + where)
        self.subexpr = subexpr
        self.point = point


# diffgeo
class NearCriticalPoint(LevelBandError, ArithmeticError):
    def __init__(self, grad_norm, point=None):
        msg = f"|grad f| = {grad_norm:.3g} is below the tolerance"
        if point is not None:
            msg += f" at ({point[0]:.12g}, {point[1]:.12g})"
        super().__init__(msg)
        self.grad_norm = grad_norm
        self.point = point


class NonUnitDirection(LevelBandError, ValueError):
    pass


# contour
class AmbiguousSaddleCell(LevelBandError, ArithmeticError):
    pass


class InconsistentSigma(LevelBandError, ArithmeticError):
    pass


class OpenContour(LevelBandError, ValueError):
    pass


# band
class BandEmpty(LevelBandError, ValueError):
    pass


class NonCompactLevel(LevelBandError, ArithmeticError):
    pass


class SigmaUnknown(LevelBandError, ValueError):
    pass
