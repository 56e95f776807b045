"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Tensor extents or site counts do not match."""


class CapacityError(RuntimeError):
    """A dense representation would exceed the configured size cap."""


class StateError(RuntimeError):
    """A tensor-network state is not in the form an operation requires."""


class HermiticityError(ValueError):
    """An operator that should be Hermitian is not."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending path."""

    def __init__(self, message, field=None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class SolverError(RuntimeError):
    """A numerical solver failed.

    ``residual`` is the last update norm of an iterative solve and ``site``
    the tensor-train site being evolved, when known.
    """

    def __init__(self, message, residual=None, site=None):
        self.residual = residual
        self.site = site
        parts = [message]
        if site is not None:
            parts.append(f"site={site}")
        if residual is not None:
            parts.append(f"residual={residual:.3e}")
        super().__init__(" ".join(parts))

    def at_site(self, site):
        """Return a copy tagged with ``site``."""
        base = str(self).split(" site=")[0].split(" residual=")[0]
        return SolverError(base, residual=self.residual, site=site)
