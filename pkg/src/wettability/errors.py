"""Exception hierarchy shared by every module of the package."""


class WettabilityError(Exception):
    """Base class for all package errors."""


class DataError(WettabilityError):
    """Input data violates a documented contract (CLI exit code 3)."""


# texture
class ImageTooSmall(DataError):
    pass


class DegenerateMap(DataError):
    """Energy map has a single value, so no threshold can split it."""


# preprocessing
class ConstantColumn(DataError):
    pass


class EmptyMatrix(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class OutOfRange(DataError):
    pass


# trees / networks
class EmptyData(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class KTooLarge(DataError):
    pass


class BatchTooSmall(DataError):
    pass


class EmptyBatch(DataError):
    pass


class StaleCache(WettabilityError):
    """Backward was called with a cache produced before a parameter update."""


class NoValidationData(DataError):
    pass


# evaluation
class EmptyVector(DataError):
    pass


class ConstantTarget(DataError):
    pass


class TooFewSamples(DataError):
    pass


# io
class MissingTarget(DataError):
    pass


class MalformedRow(DataError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyFile(DataError):
    pass


class UnsupportedFormat(DataError):
    pass


class CorruptHeader(DataError):
    pass


class TruncatedData(DataError):
    pass


class VersionMismatch(DataError):
    pass


class CorruptArtifact(DataError):
    pass
