"""Exception types shared across the package."""

from __future__ import annotations


class RankSegError(Exception):
    """Base class for all errors raised by this package."""


class ProbMapError(RankSegError):
    """A probability map failed container, dtype, shape, or range validation."""


class SimplexError(ProbMapError):
    """Per-pixel class probabilities do not sum to 1 within tolerance."""


class LabelMapError(RankSegError):
    """A label map failed dtype, range, or width validation."""


class ShapeMismatchError(RankSegError):
    """Two arrays that must share a shape do not."""


class PmfError(RankSegError):
    """A probability mass function failed nonnegativity or normalization checks."""


class DeconvolutionError(PmfError):
    """Removing one component from a count distribution was numerically unstable.

    Callers are expected to rebuild the leave-one-out distribution from scratch.
    """


class ExactCapError(RankSegError):
    """An exact rule was asked to run above its pixel-count cap.

    Use the blind or reciprocal-moment approximation for maps this large.
    """
