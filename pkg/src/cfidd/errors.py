"""Exception and warning types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid parameters or configuration entries."""


class NumericError(ArithmeticError):
    """A numerical factorization or inversion could not be carried out."""


class ContractError(ValueError):
    """Array shapes or dimensions passed between stages do not agree."""


class SingularFilterWarning(RuntimeWarning):
    """A filter covariance was singular and a pseudo-inverse was used instead."""
