"""Exception types raised across the toolkit."""


class SparsePSError(Exception):
    """Base class for all domain errors in this package."""


class NormalizationError(SparsePSError):
    """A vector with zero (or non-finite) length cannot be normalized."""


class HemisphereError(SparsePSError):
    """A direction violates the upper-hemisphere constraint (z >= 0)."""


class DegenerateSamplesError(SparsePSError):
    """Pixel samples carry no usable signal (e.g. all irradiance zero)."""


class DegenerateLightingError(SparsePSError):
    """The light matrix does not span 3D (rank below 3)."""


class ShapeError(SparsePSError):
    """Array shapes or model dimensions do not match."""


class DivergenceError(SparsePSError):
    """Training produced a non-finite loss."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index
