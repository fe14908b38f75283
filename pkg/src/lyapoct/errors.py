"""Exception hierarchy shared by every lyapoct module."""


class LyapOctError(Exception):
    """Base class for all library errors."""


class PlyError(LyapOctError, ValueError):
    """A PLY input could not be decoded.

    ``position`` is a byte offset for binary bodies and a 1-based line
    number for the header and ASCII bodies; ``unit`` says which.
    """

    def __init__(self, message, position=None, unit="byte"):
        self.position = position
        self.unit = unit
        if position is not None:
            message = f"{message} (at {unit} {position})"
        super().__init__(message)


class MalformedHeader(PlyError):
    pass


class TruncatedBody(PlyError):
    pass


class BadScalar(PlyError):
    pass


class EmptyCloud(LyapOctError, ValueError):
    pass


class DepthOutOfRange(LyapOctError, ValueError):
    pass


class EmptyTrace(LyapOctError, ValueError):
    pass


class EmptyCandidateSet(LyapOctError, ValueError):
    pass


class ConfigInvalid(LyapOctError, ValueError):
    pass


class RegimeInvalid(LyapOctError, ValueError):
    """The min/max depth arrival rates do not straddle the service rate."""

    def __init__(self, a_min, b_mean, a_max):
        self.a_min = a_min
        self.b_mean = b_mean
        self.a_max = a_max
        super().__init__(
            f"regime requires a_min < b < a_max, got a_min={a_min!r}, "
            f"b={b_mean!r}, a_max={a_max!r}"
        )
