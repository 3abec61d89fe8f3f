"""Exception types shared across the package."""


class ContractError(ValueError):
    """An operation was called with inputs violating its stated precondition."""


class NotHyperbolicError(ContractError):
    """The time symbol is singular or its quadratic form is indefinite."""


class NormalizationError(ContractError):
    """beta-normalization failed (singular time symbol)."""


class UnsupportedDimensionError(ContractError):
    """Requested construction does not exist in this dimension."""


class BoundaryClosureError(RuntimeError):
    """The characteristic boundary closure is not uniquely solvable."""


class ConfigError(ValueError):
    """Malformed run configuration."""
