"""Exception hierarchy. Every class carries the CLI exit code for its group."""


class CodingError(Exception):
    exit_code = 1


# field / linear algebra
class FieldError(CodingError, ValueError):
    exit_code = 3


class NotPrimeError(FieldError):
    pass


class OutOfRangeError(FieldError):
    pass


class FieldMismatchError(FieldError):
    pass


class DivisionByZeroError(FieldError, ZeroDivisionError):
    pass


class LinalgError(CodingError, ValueError):
    exit_code = 8


class DimensionMismatchError(LinalgError):
    pass


class NotSquareError(LinalgError):
    pass


class SingularError(LinalgError):
    pass


class ScanBoundExceededError(LinalgError):
    pass


class NotAPermutationError(LinalgError):
    pass


# index machinery
class IndexOutOfRangeError(CodingError, IndexError):
    exit_code = 4


class BadDigitError(CodingError, ValueError):
    exit_code = 4


class BadPositionError(CodingError, ValueError):
    exit_code = 4


# code construction
class ConstructionError(CodingError, ValueError):
    exit_code = 4


class ResampleLimitExceededError(ConstructionError):
    pass


class FieldTooSmallError(ConstructionError):
    pass


class BadFieldForCubeRootsError(ConstructionError):
    pass


class FrameworkConditionViolatedError(ConstructionError):
    def __init__(self, condition: str, message: str | None = None):
        self.condition = condition
        super().__init__(message or f"framework condition violated: {condition}")


class NotSystematicError(ConstructionError):
    pass


class NoSolutionFoundError(ConstructionError):
    pass


class BadFieldError(ConstructionError):
    pass


class SerializationError(ConstructionError):
    pass


# encode / decode / repair
class WrongShareCountError(CodingError, ValueError):
    exit_code = 5


class BadNodeError(CodingError, ValueError):
    exit_code = 5


class PlanMismatchError(CodingError, ValueError):
    exit_code = 5


# simulated cluster
class ClusterError(CodingError):
    exit_code = 5


class FieldTooSmallForBytesError(ClusterError, ValueError):
    pass


class AlreadyFailedError(ClusterError):
    pass


class TooManyFailuresError(ClusterError):
    pass


class NodeAliveError(ClusterError):
    pass


class MissingSurvivorError(ClusterError):
    pass


class NotEnoughNodesError(ClusterError):
    pass


class IntegrityError(ClusterError):
    exit_code = 6


class ChecksumMismatchError(IntegrityError):
    pass


class CorruptChunkError(IntegrityError):
    pass
