"""Exception types raised across the library."""


class RotquantError(Exception):
    """Base class for every error raised by rotquant."""


class InvalidDimension(RotquantError, ValueError):
    pass


class InvalidValue(RotquantError, ValueError):
    pass


class InvalidConfig(RotquantError, ValueError):
    pass


class MalformedPayload(RotquantError, ValueError):
    pass


class Unsupported(RotquantError, ValueError):
    pass


class DegenerateScale(RotquantError, ArithmeticError):
    """The unbiased scale is undefined because <z, c> <= 0."""


class ConvergenceFailure(RotquantError, RuntimeError):
    """An iterative routine stopped before meeting its tolerance.

    Attributes:
        last: The last iterate produced before giving up.
        residual: The convergence measure at the last iterate.
    """

    def __init__(self, message, last=None, residual=None):
        super().__init__(message)
        self.last = last
        self.residual = residual
