"""
Exception hierarchy for the mazyalab engine.

Every domain failure derives from MazyaLabError so the CLI can map them
to a single exit code.
"""


class MazyaLabError(Exception):
    """Base exception for all engine errors."""
    pass


class ConfigError(MazyaLabError):
    """Malformed or missing configuration."""
    pass


class KernelDomainError(MazyaLabError, ValueError):
    """Kernel evaluated outside its domain or built with invalid parameters."""
    pass


class BandUnresolvedError(MazyaLabError):
    """Grid cell size too coarse for the requested band range."""
    pass


class MemoryBoundError(MazyaLabError):
    """Extended output grid exceeds the configured cell bound."""
    pass


class DimensionMismatchError(MazyaLabError, ValueError):
    """Codomain, dimension or homogeneity degree mismatch between inputs."""
    pass


class GeometryError(MazyaLabError):
    """Test function geometry does not fit the grid."""
    pass


class ZeroFunctionError(MazyaLabError):
    """Operation needs a function with positive L1 norm."""
    pass


class ZeroMeanError(MazyaLabError):
    """Far-field quantity requested for a function without zero integral."""
    pass


class PhiHomogeneityError(MazyaLabError):
    """Custom functional fails the homogeneity check."""
    pass


class MisalignedGridError(MazyaLabError):
    """Dyadic cube boundaries do not fall on grid cell boundaries."""
    pass


class ExponentRangeError(MazyaLabError, ValueError):
    """Exponent outside the range supported by an M_p variant or check."""
    pass


class CoverVerificationError(MazyaLabError):
    """Three-lattice cover failed its exhaustive verification."""
    pass


class ProbeInconclusiveError(MazyaLabError):
    """Necessity probe requested for a cancelling functional."""
    pass


class SearchBudgetError(MazyaLabError):
    """Evaluation budget too small for the search simplex."""
    pass


class CancellationFailedError(MazyaLabError):
    """Functional does not cancel against the kernel profile."""
    pass
