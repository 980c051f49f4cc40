"""Link-level simulation of iterative detection and decoding in uplink cell-free massive MIMO."""

from cfidd.errors import ConfigurationError, ContractError, NumericError, SingularFilterWarning

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ContractError",
    "NumericError",
    "SingularFilterWarning",
    "__version__",
]
