"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
1 usage error, 2 data error, 3 numeric failure.
"""


class EdgeMlpError(Exception):
    exit_code = 2


# data / format errors
class UnknownMagic(EdgeMlpError):
    pass


class TruncatedPayload(EdgeMlpError):
    pass


class TrailingBytes(EdgeMlpError):
    pass


class MissingFile(EdgeMlpError, FileNotFoundError):
    pass


class LabelOutOfRange(EdgeMlpError, ValueError):
    pass


class DegenerateClass(EdgeMlpError, ValueError):
    pass


class BadMagic(EdgeMlpError):
    pass


class VersionUnsupported(EdgeMlpError):
    pass


class ChecksumMismatch(EdgeMlpError):
    pass


class ClassCountMismatch(EdgeMlpError, ValueError):
    pass


class BadImageShape(EdgeMlpError, ValueError):
    pass


# shape errors
class DimensionMismatch(EdgeMlpError, ValueError):
    exit_code = 3


class ShapeMismatch(DimensionMismatch):
    pass


class StaleCache(ShapeMismatch):
    pass


class BatchTooSmall(EdgeMlpError, ValueError):
    exit_code = 3


# numeric errors
class NonFiniteInput(EdgeMlpError, ValueError):
    exit_code = 3


class DomainError(EdgeMlpError, ValueError):
    exit_code = 3


class InvalidParameter(EdgeMlpError, ValueError):
    exit_code = 1


class OutOfOrderEpoch(EdgeMlpError, RuntimeError):
    exit_code = 3


class EmptyDataset(EdgeMlpError, ValueError):
    pass
