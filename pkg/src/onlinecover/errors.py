"""Exception types shared across the package."""


class OnlineCoverError(Exception):
    """Base class for every error raised by this package."""


class InvalidInstance(OnlineCoverError, ValueError):
    pass


class NormOutOfRange(InvalidInstance):
    pass


class AllMachinesDiscarded(OnlineCoverError):
    pass


class ConstraintViolation(OnlineCoverError, ValueError):
    pass


class ZeroGradientOnActiveCoordinate(OnlineCoverError, ArithmeticError):
    pass


class NonTermination(OnlineCoverError, RuntimeError):
    pass


class InfeasibleReference(OnlineCoverError, ValueError):
    pass


class SolverNotMonotone(OnlineCoverError, RuntimeError):
    pass


class StallDetected(OnlineCoverError, RuntimeError):
    pass


class PrefixUndefined(OnlineCoverError, RuntimeError):
    pass


class InvariantBreach(OnlineCoverError, AssertionError):
    """A proven invariant of one of the online algorithms failed at runtime."""


class TooLarge(OnlineCoverError, ValueError):
    pass
