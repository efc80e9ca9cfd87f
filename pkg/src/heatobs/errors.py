"""Exception hierarchy and report flag names."""

# flag strings surfaced in reports
OK = "OK"
REGULARIZED = "REGULARIZED"
PERIODIZATION_RISK = "PERIODIZATION_RISK"
OVERFLOW = "OVERFLOW"
NOT_CONVERGED = "NotConverged"
INTERPRETED = "INTERPRETED"
VACUOUS = "VacuousInput"


class HeatObsError(Exception):
    """Base class for all library errors."""


class InvalidGrid(HeatObsError, ValueError):
    pass


class NonFiniteInput(HeatObsError, ValueError):
    pass


class GridMismatch(HeatObsError, ValueError):
    pass


class OrderTooHigh(HeatObsError, ValueError):
    pass


class ScaleTooFine(HeatObsError, ValueError):
    pass


class ScaleTooCoarse(HeatObsError, ValueError):
    pass


class InvalidTime(HeatObsError, ValueError):
    pass


class BandLimitTooLarge(HeatObsError, ValueError):
    pass


class EmptyObservationSet(HeatObsError, ValueError):
    pass


class ZeroInput(HeatObsError, ValueError):
    pass


class CubesDontTile(HeatObsError, ValueError):
    pass


class TooFewNodes(HeatObsError, ValueError):
    pass


class ObservationVanishes(HeatObsError, ValueError):
    pass


class InvalidLambda(HeatObsError, ValueError):
    pass


class InvalidThickness(HeatObsError, ValueError):
    pass


class InvalidTheta(HeatObsError, ValueError):
    pass


class InvalidRadii(HeatObsError, ValueError):
    pass


class BoundNotApplicable(HeatObsError, ValueError):
    pass


class OutOfDomain(HeatObsError, ValueError):
    pass


class PreconditionFailed(HeatObsError, ValueError):
    """Raised when an audit input violates a stated hypothesis.

    The message names the violated clause.
    """


class ConfigError(HeatObsError, ValueError):
    pass


class NotConverged(HeatObsError, RuntimeError):
    """Iterative solver hit its cap; ``diagnostics`` holds the last state."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConstantEffectivelyInfinite(HeatObsError, ArithmeticError):
    """Smallest eigenvalue fell below the resolvable floor.

    ``estimate`` carries the eigen estimate so sweeps can still report it.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate
