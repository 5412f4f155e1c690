"""Exception and warning types raised by wprox."""


class WProxError(Exception):
    """Base class for all wprox errors."""


class DimensionMismatch(WProxError, ValueError):
    pass


class NegativeWeight(WProxError, ValueError):
    pass


class WeightSumOutOfTolerance(WProxError, ValueError):
    pass


class ProjectionFailure(WProxError, ValueError):
    """A metric projection returned a point outside its target set."""


class SolverFailure(WProxError, RuntimeError):
    """The transport LP did not reach a certified optimum."""


class TOutOfRange(WProxError, ValueError):
    pass


class PlanNotOptimal(WProxError, ValueError):
    pass


class MarginalViolation(WProxError, ValueError):
    pass


class AsymmetricKernel(WProxError, ValueError):
    pass


class DeclaredBoundViolated(WProxError, ValueError):
    pass


class NonFiniteObjective(WProxError, FloatingPointError):
    pass


class NoFixedPointWitness(WProxError, ValueError):
    pass


class NoCommonFixedPoint(WProxError, ValueError):
    pass


class FixedPointWitnessError(WProxError, ValueError):
    """A declared fixed point is moved by its operator."""


class MembershipCheckFailed(WProxError, ValueError):
    pass


class MissingLipschitzBound(WProxError, ValueError):
    pass


class InnerSolverStall(UserWarning):
    """The prox solver hit its iteration cap before meeting its tolerance.

    Emitted as a warning; the best iterate is still returned, flagged as
    not certified.
    """


class ZeroWeightRow(UserWarning):
    """Source atoms with zero mass were skipped during disintegration."""
