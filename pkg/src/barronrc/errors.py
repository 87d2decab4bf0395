"""Exception types raised across the package."""


class UncertifiedSystemError(ValueError):
    """Raised when a state system has no unique-solution certificate."""


class DimensionMismatchError(ValueError):
    """Raised when array shapes disagree with declared dimensions."""


class SingularControllabilityError(ValueError):
    """Raised when the Kalman matrix is numerically singular.

    Attributes:
        sigma_min: Smallest singular value found.
        sigma_max: Largest singular value found.
    """

    def __init__(self, sigma_min: float, sigma_max: float):
        self.sigma_min = float(sigma_min)
        self.sigma_max = float(sigma_max)
        super().__init__(
            f"Kalman matrix is singular: sigma_min={sigma_min:.3e}, "
            f"sigma_max={sigma_max:.3e}"
        )


class UndefinedDensityError(ValueError):
    """Raised when a Radon-Nikodym derivative does not exist."""


class BoundHypothesisError(ValueError):
    """Raised when the hypotheses of a risk bound are not met."""
