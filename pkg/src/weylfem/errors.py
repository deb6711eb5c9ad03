"""Exception hierarchy shared by all modules."""


class WeylFemError(Exception):
    """Base class for every error raised by the package."""


class InvalidArgumentError(WeylFemError, ValueError):
    pass


class InvalidMeshError(WeylFemError, ValueError):
    pass


class CoefficientError(WeylFemError, ValueError):
    pass


class ConsistencyError(WeylFemError, ValueError):
    """Neumann right-hand side not orthogonal to constants."""


class IterationLimitError(WeylFemError, RuntimeError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class FactorizationError(WeylFemError, ArithmeticError):
    pass


class ResolutionError(WeylFemError, ValueError):
    """Quadrature too coarse for the frequency of the integrand."""


class DimensionError(WeylFemError, ValueError):
    pass
