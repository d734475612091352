"""Exception types raised by ellipsoid_lab."""


class EllipsoidLabError(Exception):
    pass


class NotPositiveDefinite(EllipsoidLabError, ArithmeticError):
    def __init__(self, pivot_index, pivot=None):
        self.pivot_index = int(pivot_index)
        self.pivot = pivot
        msg = f"matrix is not positive definite (pivot {self.pivot_index}"
        if pivot is not None:
            msg += f" = {pivot:.3e}"
        super().__init__(msg + ")")


class NotConverged(EllipsoidLabError, ArithmeticError):
    def __init__(self, iterations, residual=None):
        self.iterations = int(iterations)
        self.residual = residual
        super().__init__(f"eigensolver did not converge after {self.iterations} iterations")


class DimensionTooSmall(EllipsoidLabError, ValueError):
    pass


class GramDegenerate(EllipsoidLabError, ArithmeticError):
    """The Gram system could not be solved; a construction failure, not a crash."""


class InstanceTooLarge(EllipsoidLabError, ValueError):
    pass


class ShapeMismatch(EllipsoidLabError, ValueError):
    pass


class NotUnitVector(EllipsoidLabError, ValueError):
    pass


class ConfigInvalid(EllipsoidLabError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"invalid config field {field!r}: {message}")


class UnknownDimension(EllipsoidLabError, KeyError):
    pass
