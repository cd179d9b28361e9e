"""Exception types raised across the package."""


class EntlatError(Exception):
    """Base class for all package errors."""


class ConfigurationError(EntlatError, ValueError):
    """Invalid model parameters, geometry or run configuration."""


class DataLossError(EntlatError, ValueError):
    """A basis change would discard amplitude outside the target basis."""


class DimensionError(EntlatError, ValueError):
    """Operands live in incompatible bases or exceed a size cap."""


class PhysicalityError(EntlatError, ValueError):
    """A density matrix violates hermiticity, trace or positivity bounds."""


class FitError(EntlatError, ValueError):
    """A regression window holds too few usable points."""
