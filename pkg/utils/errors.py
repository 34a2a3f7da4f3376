"""
Exception hierarchy for the sloppy phase explorer
"""

from typing import Optional


class SloppyError(Exception):
    """Base class for every error raised by the toolkit"""


# Parameter space


class NonPositiveParameter(SloppyError):
    """A parameter value was not strictly positive where log coordinates are required"""

    def __init__(self, name: str, value: float):
        self.name = name
        self.value = value
        super().__init__(f"Parameter '{name}' must be > 0 (got {value!r})")


class DuplicateName(SloppyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Duplicate parameter name: '{name}'")


class AxisOutOfRange(SloppyError):
    def __init__(self, axis: int, size: int):
        self.axis = axis
        self.size = size
        super().__init__(f"Axis {axis} out of range for P={size}")


# Model execution


class ModelFailure(SloppyError):
    """Simulate raised or returned a malformed result"""

    def __init__(self, message: str, seed: Optional[int] = None):
        self.seed = seed
        super().__init__(message)


class NonFiniteOutput(ModelFailure):
    def __init__(self, seed: int, variable: str, step: int, value: float):
        self.variable = variable
        self.step = step
        self.value = value
        super().__init__(
            f"Non-finite output {value!r} for seed {seed}, variable '{variable}', step {step}",
            seed=seed,
        )


class LaunchFailure(ModelFailure):
    """External simulator could not be started or exited non-zero"""


class Timeout(ModelFailure):
    def __init__(self, seconds: float, seed: Optional[int] = None):
        self.seconds = seconds
        super().__init__(
            f"External simulator exceeded timeout of {seconds}s", seed=seed
        )


class ProtocolError(ModelFailure):
    """External simulator output violated the file protocol"""

    def __init__(self, detail: str, seed: Optional[int] = None):
        self.detail = detail
        super().__init__(f"Protocol error: {detail}", seed=seed)


class NonPositiveShifted(ModelFailure):
    """Output transform ln(x + c) met a value with x + c <= 0"""

    def __init__(self, x: float, c: float, seed: Optional[int] = None):
        self.x = x
        self.c = c
        super().__init__(f"ln(x + c) undefined for x={x!r}, c={c!r}", seed=seed)


# Losses


class ZeroNormalization(SloppyError):
    def __init__(self, seed_index: int, variable: str, normalization: str):
        self.seed_index = seed_index
        self.variable = variable
        self.normalization = normalization
        super().__init__(
            f"{normalization} normalization is zero for seed index {seed_index}, variable '{variable}'"
        )


class ZeroReference(SloppyError):
    def __init__(self, index: tuple):
        self.index = index
        super().__init__(f"Reference value is zero at (s, k, t)={index}")


class Divergent(SloppyError):
    """Loss is infinite (log-absolute loss at an exact zero difference)"""


class EmptySamples(SloppyError):
    pass


class EdgeMismatch(SloppyError):
    pass


# Spectral analysis


class NotSymmetric(SloppyError):
    def __init__(self, max_asymmetry: float):
        self.max_asymmetry = max_asymmetry
        super().__init__(f"Matrix is not symmetric (max |H - H^T| = {max_asymmetry:.3e})")


class NonPositiveEigenvalue(SloppyError):
    def __init__(self, value: float):
        self.value = value
        super().__init__(f"Eigenvalue must be > 0 (got {value!r})")


class DegenerateSpectrum(SloppyError):
    def __init__(self, lambda1: float):
        self.lambda1 = lambda1
        super().__init__(f"Leading eigenvalue must be > 0 (got {lambda1!r})")


class SeriesTooShort(SloppyError):
    def __init__(self, length: int, minimum: int):
        self.length = length
        self.minimum = minimum
        super().__init__(f"Series length {length} below minimum {minimum}")


# Front end


class ConfigError(SloppyError, ValueError):
    """Invalid run configuration; carries the dotted field path"""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class ValidationFailure(SloppyError):
    """A bundled validation study did not meet its threshold"""
