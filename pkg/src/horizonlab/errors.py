"""Exception hierarchy for horizonlab.

Every error raised deliberately by the package derives from HorizonLabError,
so callers (service handlers, CLI) can map failures to exit codes and HTTP
statuses uniformly.
"""


class HorizonLabError(Exception):
    """Base class for all horizonlab errors."""


class ParameterError(HorizonLabError):
    """A parameter value violates a documented precondition."""


class MetricConfigError(HorizonLabError):
    """A metric configuration (TOML or expression) failed to parse or validate.

    Carries an optional source position for expression syntax errors.
    """

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class MetricDomainError(HorizonLabError):
    """The metric was evaluated at a point outside its validity domain."""


class SeedError(HorizonLabError):
    """The seed point does not lie inside the ergoregion."""


class NonStarShapedError(HorizonLabError):
    """Ray tracing found zero or multiple boundary crossings; re-seed."""


class RootToleranceError(HorizonLabError):
    """A 1-D root was bracketed but could not be resolved to tolerance."""


class KernelRankError(HorizonLabError):
    """The spatial block did not have the expected rank deficiency on the surface."""


class TangencyError(HorizonLabError):
    """Null geodesic launch at a characteristic point: no transversal branch."""


class NoNullCovectorError(HorizonLabError):
    """No real null covector exists for the requested data (negative discriminant)."""


class StepFailureError(HorizonLabError):
    """The adaptive integrator could not take an acceptable step."""


class BracketError(HorizonLabError):
    """A bracketing interval is invalid or does not straddle the target."""


class CoverageError(HorizonLabError):
    """Level-curve coverage of the strip grid is insufficient; refine launches."""
