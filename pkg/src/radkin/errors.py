"""Exception types shared across the package."""


class RadkinError(Exception):
    """Base class for all package errors."""


class DomainError(RadkinError, ValueError):
    """A point lies outside the domain on which a field is defined."""


class IntegrationError(RadkinError, RuntimeError):
    """A trajectory integration became unstable.

    ``last_lambda`` is the last proper time at which the state was valid.
    """

    def __init__(self, message, last_lambda):
        super().__init__(f"{message} (last valid lambda = {last_lambda:.6g})")
        self.last_lambda = last_lambda


class ConvergenceError(RadkinError, RuntimeError):
    """An iterative solve did not converge; carries the final residual and iterate."""

    def __init__(self, message, residual, iterate=None):
        super().__init__(f"{message} (final residual = {residual:.3e})")
        self.residual = residual
        self.iterate = iterate


class CFLError(RadkinError, RuntimeError):
    """A time step violates the CFL bound; ``suggested_dt`` satisfies it."""

    def __init__(self, dt, suggested_dt):
        super().__init__(f"dt = {dt:.4g} violates CFL bound; use dt <= {suggested_dt:.4g}")
        self.dt = dt
        self.suggested_dt = suggested_dt


class ConfigError(RadkinError, ValueError):
    """Configuration failed validation. ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))
