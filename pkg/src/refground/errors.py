"""Exception types shared across the engine."""


class GroundingError(Exception):
    """Base class for all engine errors."""


class SceneFormatError(GroundingError, ValueError):
    """Scene document is malformed or violates a scene invariant."""


class InfeasibleConfigError(GroundingError, ValueError):
    """Corpus config cannot produce a valid scene (e.g. too many objects)."""


class EmptyExpressionError(GroundingError, ValueError):
    """Input text normalizes to an empty token sequence."""


class UnknownRegionError(GroundingError, KeyError):
    """Referenced region id is not part of the scene."""


class UnknownViewpointError(GroundingError, KeyError):
    """Referenced viewpoint name is not part of the scene."""


class ProjectionError(GroundingError, ValueError):
    """A 3D point cannot be projected (behind the image plane)."""


class DialogStateError(GroundingError, RuntimeError):
    """Dialog operation applied in an invalid state."""


class ConfigError(GroundingError, ValueError):
    """Invalid engine or benchmark configuration."""
