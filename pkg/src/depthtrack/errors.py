"""Exception hierarchy shared by all depthtrack modules."""


class DepthTrackError(Exception):
    """Base class for every error raised by depthtrack."""


class InvalidArgumentError(DepthTrackError, ValueError):
    pass


class DegenerateInputError(DepthTrackError):
    """Input carries no usable signal (e.g. a textureless image pair)."""


class UnreliablePoseError(DepthTrackError):
    """Pose alignment converged with too little valid overlap."""

    def __init__(self, message, valid_fraction=None):
        super().__init__(message)
        self.valid_fraction = valid_fraction


class ParseError(DepthTrackError, ValueError):
    """Malformed file content.

    ``line`` is 1-based for text formats, ``offset`` is a byte offset for
    binary formats; whichever does not apply is ``None``.
    """

    def __init__(self, message, *, path=None, line=None, offset=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.path = path
        self.line = line
        self.offset = offset


class ConfigError(DepthTrackError, ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class TransitionError(DepthTrackError):
    """A track was asked to move along an edge outside its lifecycle graph."""
