"""Exception hierarchy shared by all solvers."""


class DefectError(Exception):
    """Base class for every error raised by this package."""


class EventNotReached(DefectError):
    pass


class DomainError(DefectError):
    pass


class NonMonotone(DefectError):
    pass


class OrderTooLow(DefectError):
    pass


class RootIsolationFailure(DefectError):
    pass


class GridTooCoarse(DefectError):
    pass


class NoBracket(DefectError):
    pass


class Blowup(DefectError):
    pass


class NewtonDiverged(DefectError):
    pass


class SingularJacobian(DefectError):
    pass


class ContinuationStall(DefectError):
    def __init__(self, message, last_good_L=None):
        super().__init__(message)
        self.last_good_L = last_good_L


class BranchCrossing(DefectError):
    pass


class ShapeMismatch(DefectError):
    pass


class FitAmbiguous(DefectError):
    pass


class InsufficientFamily(DefectError):
    pass


class ConfigInvalid(DefectError):
    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = list(errors or [])
