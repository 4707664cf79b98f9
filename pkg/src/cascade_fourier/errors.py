"""
Exception hierarchy for cascade-fourier.

Library code raises these; the CLI turns them into exit code 1 with a
readable message on stderr.
"""


class CascadeError(Exception):
    """Base class for every error raised by cascade-fourier."""


class InvalidParams(CascadeError, ValueError):
    """Parameters violate the documented preconditions."""


class NotSubcritical(CascadeError):
    """The weight model fails tau'(1) > 0, so the cascade dies out almost surely."""


class DepthTooLarge(CascadeError):
    """Requested depth exceeds the memory guard on the number of cells."""


class BadLevel(CascadeError):
    """Level or cell index outside the realization."""


class AllMassZero(CascadeError):
    """Every cell of the realization carries zero mass."""


class DegenerateSpeed(CascadeError):
    """Raw curve speed drops below the admissible threshold."""


class CurvatureVanishes(CascadeError):
    """Raw curve has (numerically) zero curvature somewhere."""


class ToleranceUnachievable(CascadeError):
    """Panel doubling kept disagreeing beyond the requested tolerance."""


class DimensionMismatch(CascadeError):
    """Operation needs a realization of a different spatial dimension."""


class InvalidFrequency(CascadeError):
    """Frequency outside the admissible range of the statistic."""


class TooFewPoints(CascadeError):
    """A regression needs at least three points."""


class NonpositiveMagnitude(CascadeError):
    """A log-log fit received a zero or negative magnitude."""


class AllExtinct(CascadeError):
    """Every ensemble member had zero total mass."""


class CorruptMassFile(CascadeError):
    """Binary mass file fails its magic, version, size or checksum check."""
