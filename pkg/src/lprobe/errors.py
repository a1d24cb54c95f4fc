"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Inconsistent or missing configuration (spec/parameter mismatch, bad keys)."""


class NumericalError(ArithmeticError):
    """A loss or derivative evaluated to a non-finite value."""


class DegenerateProjection(NumericalError):
    """A 1D projection is constant on the probe grid, so its normalized TV is undefined."""
