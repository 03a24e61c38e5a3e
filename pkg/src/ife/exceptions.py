"""Exception hierarchy shared across the package."""


class IfeError(Exception):
    """Base class for all errors raised by this package."""


class PanelDataError(IfeError):
    """Malformed input data: bad schema, incomplete grid, or an invalid treated block."""


class ConfigError(IfeError):
    """Invalid run or study configuration."""


class DegeneracyError(IfeError):
    """Numerical degeneracy: singular loading Gram matrix or unusable bootstrap draw."""


class SimulationError(IfeError):
    """Monte Carlo study failed, e.g. the replication failure rate exceeded its cap."""
