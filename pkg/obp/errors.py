class ObpError(Exception):
    """Base class for errors raised by the backpropagation engine."""


class DimensionMismatchError(ObpError, ValueError):
    pass


class QubitRangeError(ObpError, ValueError):
    pass


class BudgetError(ObpError, ValueError):
    pass


class CircuitError(ObpError, ValueError):
    pass


class OracleSizeError(ObpError, ValueError):
    pass


class ConfigError(ObpError, ValueError):
    pass


class ClusterStateError(ObpError, RuntimeError):
    pass


class CoefficientError(ObpError, ValueError):
    pass
