"""Exception hierarchy.

Errors are grouped by the CLI exit code they map to: configuration
problems (2), data problems (3) and numerical failures (4).
"""


class IolvmError(Exception):
    exit_code = 1
    category = "error"


class ConfigError(IolvmError, ValueError):
    exit_code = 2
    category = "config"


class DataError(IolvmError, ValueError):
    exit_code = 3
    category = "data"


class NumericalError(IolvmError, ArithmeticError):
    exit_code = 4
    category = "numerical"


# graph construction / validation
class DuplicateNodeError(DataError):
    pass


class DuplicateEdgeError(DataError):
    pass


class DanglingEdgeError(DataError):
    pass


class SelfLoopError(DataError):
    pass


class LengthMismatchError(DataError):
    pass


class EmptyInputError(DataError):
    pass


# solvers
class NoPathExistsError(DataError):
    pass


class RequirementMismatchError(DataError):
    pass


class GraphTooLargeForExactError(ConfigError):
    pass


class GraphTooLargeForBruteForceError(ConfigError):
    pass


# neural
class DimensionMismatchError(DataError):
    pass


class ShapeMismatchError(DataError):
    pass


class StaleCacheError(IolvmError, RuntimeError):
    exit_code = 4


class CheckpointError(DataError):
    pass


# model / inference / metrics
class NonPositiveSigmaError(NumericalError):
    pass


class InfeasibleSampleError(DataError):
    pass


class InvalidTauError(ConfigError):
    pass


class NotNormalizedError(DataError):
    pass


class EmptyGroundTruthError(DataError):
    pass


# datasets
class ParseError(DataError):
    pass


class InfeasibleRecordError(DataError):
    pass


class GraphMismatchError(DataError):
    pass


class DisconnectedBeyondThresholdError(DataError):
    pass
