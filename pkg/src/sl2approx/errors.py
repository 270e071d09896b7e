"""Exception types shared across the package."""


class PrecisionInsufficient(ArithmeticError):
    """A comparison could not be certified at the current working precision."""


class DivisionNearZero(PrecisionInsufficient):
    """The divisor's error ball contains zero."""


class IndexOutOfRange(IndexError):
    pass


class NotCoprime(ValueError):
    pass


class UnsupportedRing(ValueError):
    pass


class InsufficientData(ValueError):
    pass


class EnumerationBudgetExceeded(RuntimeError):
    pass
