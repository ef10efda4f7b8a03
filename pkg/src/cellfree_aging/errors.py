"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class InsufficientDataError(ValueError):
    """Too few samples for a statistically meaningful estimate."""


class ConfigError(ValueError):
    """Invalid or inconsistent scenario / experiment configuration."""


class InfeasiblePilotAssignment(ValueError):
    """Downlink pilots cannot satisfy the cross-orthogonality rule."""


class DegenerateAPError(ValueError):
    """An AP (or BS) has no estimated channel energy to allocate power over."""


class DimensionError(ValueError):
    """Array or trace dimensions do not match what the operation expects."""
