"""Exception hierarchy shared by all modules.

The CLI maps each family onto an exit code, so raise the most specific
class available.
"""


class HermvarError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(HermvarError, ValueError):
    """Invalid parameters or configuration (bad index, H outside (0, 1), ...)."""


class DomainError(ConfigError):
    """An argument lies outside the domain of the quantity being evaluated."""


class ParameterRangeError(HermvarError, ValueError):
    """Parameters are valid but outside the range where the quantity exists.

    Example: the series defining the limit variance diverges.
    """


class MissingDerivativeError(ConfigError):
    """A weight function does not supply a derivative of the requested order."""


class GrowthError(ParameterRangeError):
    """A Gaussian moment of a weight function came out non-finite."""


class FactorizationError(HermvarError, ArithmeticError):
    """Cholesky factorization of a covariance matrix failed."""


class EmbeddingError(HermvarError, ArithmeticError):
    """The circulant embedding has a significantly negative eigenvalue."""
