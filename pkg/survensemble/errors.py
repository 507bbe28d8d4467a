"""Exception hierarchy shared by every survensemble module."""


class SurvivalError(ValueError):
    """Base class for all survensemble errors."""


class ConfigError(SurvivalError):
    pass


# data model
class NonFiniteValue(SurvivalError):
    pass


class NegativeTime(SurvivalError):
    pass


class DimensionMismatch(SurvivalError):
    pass


class AllCensored(SurvivalError):
    pass


# scoring
class NoEligiblePairs(SurvivalError):
    pass


class ZeroCensoringProbability(SurvivalError):
    """A required censoring-survival evaluation is 0, so the horizon is beyond the identifiable range."""


# fitters
class NonConvergence(SurvivalError):
    pass


class SeparationDetected(SurvivalError):
    """Coefficients diverge because the partial likelihood is monotone."""


class NonPositiveTime(SurvivalError):
    pass


class SingularDesign(SurvivalError):
    pass


class NonFiniteLoss(SurvivalError):
    """Training loss became NaN or infinite, usually because the learning rate is too high."""


class DegenerateSplit(UserWarning):
    """No split improved the boosting criterion; the stage tree is a stump."""


# ensemble
class GridMismatch(SurvivalError):
    pass


class NonFiniteGradient(SurvivalError):
    pass


class DivergedObjective(SurvivalError):
    """Objective trace increased for too many consecutive iterations."""


# simulate / bench
class InsufficientFeatures(SurvivalError):
    pass


class MissingColumn(SurvivalError):
    pass


class ParseFailure(SurvivalError):
    pass


class TooSmall(SurvivalError):
    pass


class IoFailure(SurvivalError):
    pass
