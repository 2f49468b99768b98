"""Exception types raised by the simulation and solver layers."""


class ConfigurationError(ValueError):
    """Invalid numerology, allocation, or experiment configuration."""


class ScenarioError(ValueError):
    """Inconsistent scenario geometry or channel description."""


class NoDetectionError(RuntimeError):
    """Range profile contains no usable peak."""


class UnderdeterminedError(ValueError):
    """Too few measurements for the number of unknowns."""


class InsufficientGeometryError(ValueError):
    """Not enough transmitters or receivers for the requested operation."""
