"""Exception and warning types raised across the package."""


class CheeseError(Exception):
    """Base class for every error raised by cheesetower."""


# geometry
class BudgetExhausted(CheeseError):
    pass


class TransversalityUnachievable(CheeseError):
    pass


class DegenerateArrangement(CheeseError):
    pass


# surface towers
class MissingDictionary(CheeseError):
    pass


class ZeroFreeCertificationFailed(CheeseError):
    pass


class ZeroOnRegion(CheeseError):
    pass


class NoAdmissibleCut(CheeseError):
    pass


class NoRegularValue(CheeseError):
    pass


class SingularityProximity(CheeseError):
    pass


class StepCollapse(CheeseError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ZeroOfF(CheeseError):
    pass


class TracingDivergence(CheeseError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


# quadrature
class PoleProximity(CheeseError):
    pass


class NonconvergenceWarning(RuntimeWarning):
    pass


class IllConditionedWarning(RuntimeWarning):
    pass


# serialization
class FormatVersionError(CheeseError):
    pass
