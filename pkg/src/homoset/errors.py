"""Exception types raised across the package."""


class HomosetError(Exception):
    """Base class for all package errors."""


class DegenerateRoot(HomosetError):
    """A pencil's characteristic cubic has no unique non-degenerate double root."""


class NonInvertibleResult(HomosetError):
    """A matrix that must be invertible failed the scale-relative determinant test."""


class RankOneFailure(UserWarning):
    """Warning: a matrix expected to be rank one has a large rank-one residual."""


class DegenerateScene(HomosetError):
    """A plane passes through the first camera centre (w_i == 0)."""


class DegenerateRegion(HomosetError):
    """A sampling region has zero area."""


class RankDeficient(HomosetError):
    """The DLT design matrix has a null space of dimension greater than one."""


class PointAtInfinity(HomosetError):
    """Dehomogenisation hit a vanishing third coordinate."""


class LinAlgFailure(HomosetError):
    """Normal equations could not be solved at any damping level."""


class ConstraintStall(HomosetError):
    """The augmented Lagrangian stopped reducing the constraint violation."""


class MalformedInput(HomosetError, ValueError):
    """An input file does not follow the expected schema."""
