"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operands act on different qubit counts."""


class InvalidSizeError(ValueError):
    """Requested problem size is outside the supported range."""


class ParameterError(ValueError):
    """An argument value is outside its valid domain."""


class GuardError(ValueError):
    """Requested computation exceeds a hard resource guard."""


class LayoutError(ValueError):
    """Gate sequence, parameter vector, and layout are inconsistent."""


class DegenerateRatioError(ValueError):
    """Approximation ratio is undefined because e_min == e_max."""


class TrainingAbortedError(RuntimeError):
    """An optimization run hit a non-finite gradient or similar fault."""


class ConfigError(ValueError):
    """Experiment configuration failed validation."""
