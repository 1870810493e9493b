"""Exception types raised across the package."""


class BoolMFError(ValueError):
    """Base class for rejected inputs."""


class DimensionError(BoolMFError):
    """Operand shapes do not agree."""


class InvalidChannelError(BoolMFError):
    """A channel table is not a valid conditional distribution."""


class InstanceTooLargeError(BoolMFError):
    """An exhaustive computation was requested on an instance that is too big."""


class FormatError(BoolMFError):
    """A text file could not be parsed.

    ``lineno`` is 1-based, or ``None`` when the problem is not tied to a line.
    """

    def __init__(self, message, lineno=None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)
