"""Exception hierarchy. Each class carries the process exit code used by the CLI."""


class ModalError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class InvalidInputError(ModalError, ValueError):
    exit_code = 2


class NoSignalError(ModalError, ValueError):
    exit_code = 3


class InsufficientDataError(ModalError, ValueError):
    exit_code = 4


class NonUniformSamplingError(ModalError, ValueError):
    exit_code = 5


class InvalidDataError(ModalError, ValueError):
    exit_code = 6


class OverTruncationError(ModalError, ValueError):
    exit_code = 7


class SingularEigenvalueError(ModalError, ValueError):
    exit_code = 8


class RankDeficiencyError(ModalError, ArithmeticError):
    exit_code = 9


class NotUnderdampedError(ModalError, ValueError):
    exit_code = 10


class UnsupportedDampingError(ModalError, ValueError):
    exit_code = 11


class IncompatibleRecordsError(ModalError, ValueError):
    exit_code = 12


class SegmentationError(ModalError, ValueError):
    exit_code = 13


class IllConditionedFitError(ModalError, ArithmeticError):
    exit_code = 14


class UndefinedMacError(ModalError, ValueError):
    exit_code = 15


class InvalidSweepError(ModalError, ValueError):
    exit_code = 16


class DecimationError(ModalError, ValueError):
    exit_code = 17


class PerturbationTooLargeError(ModalError, ValueError):
    exit_code = 18


class IncompatibleModesError(ModalError, ValueError):
    exit_code = 19


class UsageError(ModalError):
    exit_code = 64
