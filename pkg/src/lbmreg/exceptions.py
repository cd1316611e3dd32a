"""Exception hierarchy shared by all lbmreg modules."""


class LbmregError(Exception):
    """Base class for every error raised by lbmreg."""


class CapacityError(LbmregError):
    """A grid or binning would exceed the machine integer range."""


class DimensionError(LbmregError, ValueError):
    """Inputs disagree on the dimension of the design space."""


class DomainError(LbmregError, ValueError):
    """A query point or parameter lies outside its admissible range."""


class EmptyBinError(LbmregError):
    """A bin holds no design points (more bins than points on an axis)."""


class BoundaryError(DomainError):
    """A kernel query lies outside the interior region where weights are valid."""


class WindowError(LbmregError):
    """Too few points inside a local-polynomial window; widen the bandwidth."""


class ConditioningError(LbmregError):
    """The local-polynomial normal matrix is singular at the pivot threshold."""


class ConfigError(LbmregError):
    """An experiment configuration is malformed."""
