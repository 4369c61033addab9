"""Exception types raised across the package."""


class KinemotionError(Exception):
    """Base class for all package errors."""


class DegenerateStiefel(KinemotionError, ValueError):
    """A 6-vector cannot be orthonormalized into a rotation."""


class TopologyMismatch(KinemotionError, ValueError):
    """Pose data does not match the bone count of a skeleton."""


class ShapeMismatch(KinemotionError, ValueError):
    pass


class EmptyDataset(KinemotionError, ValueError):
    pass


class UnknownPreset(KinemotionError, KeyError):
    pass


class TooFewFrames(KinemotionError, ValueError):
    pass


class DimensionMismatch(KinemotionError, ValueError):
    pass


class ParseError(KinemotionError, ValueError):
    """Malformed CSV input; carries 1-based line and column numbers."""

    def __init__(self, message, line, column=None):
        self.line = line
        self.column = column
        where = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{where}: {message}")


class NonFiniteLoss(KinemotionError, FloatingPointError):
    """Training produced a NaN/Inf loss."""

    def __init__(self, iteration, value):
        self.iteration = iteration
        self.value = value
        super().__init__(f"non-finite loss {value!r} at iteration {iteration}")
