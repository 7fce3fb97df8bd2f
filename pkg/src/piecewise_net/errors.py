"""Exception types shared across the package."""


class OutOfDomainError(ValueError):
    """A point lies outside the outer boundary of the domain."""


class OnInterfaceError(ValueError):
    """A point lies on an interface where a one-sided quantity was requested."""


class DegenerateNormalError(ValueError):
    """The interface normal is undefined at the requested point (cusp or saddle)."""


class GeometryConfigError(ValueError):
    """A sampler could not produce points for the given geometry."""


class InvalidCategoryError(ValueError):
    """A category vector is not a canonical basis vector."""


class DegenerateLabelsError(ValueError):
    """Scalar labels are not pairwise distinct."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""
