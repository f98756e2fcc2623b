"""Exception types shared across the package."""


class SmnregError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(SmnregError, ValueError):
    """Inputs violate a documented precondition (shape, positivity, SPD)."""


class RankDeficiencyError(InvalidParameterError):
    """A design matrix (or augmented design) lacks full column rank."""


class NumericalError(SmnregError, RuntimeError):
    """A numerical routine failed or lost the accuracy it promises."""


class QuadratureError(NumericalError):
    """Numerical integration diverged or missed the requested tolerance."""


class SamplingError(NumericalError):
    """A conditional draw is impossible, e.g. a non-integrable tilted density."""
