"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid parameters, rejected before any large allocation."""


class NumericalGuardError(RuntimeError):
    """A numerical guard tripped during a run (stability, NaN, size budget)."""


class StabilityError(NumericalGuardError):
    """Time step exceeds the declared stability bound of the continuum integrator."""
