"""Exception hierarchy shared by every poolkit module.

The CLI maps these onto exit codes: contract/shape/config errors -> 1,
I/O and file-format errors -> 2, numeric failures -> 3.
"""


class PoolkitError(Exception):
    """Base class for all poolkit errors."""


class ShapeError(PoolkitError):
    """Operands have incompatible dimensions."""


class ContractError(PoolkitError):
    """A precondition on arguments was violated."""


class ConfigError(ContractError):
    """A run configuration is malformed or out of range."""


class NumericError(PoolkitError):
    """Non-finite values or numerically degenerate input."""


class DegenerateMassError(NumericError):
    """A row/column that must be normalized has zero l1 mass."""


class ConvergenceError(NumericError):
    """An iterative solver hit its iteration cap before converging."""


class FileFormatError(PoolkitError):
    """A tensor file does not conform to the supported format subset."""
