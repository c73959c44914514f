"""Exception hierarchy shared by all pipeline stages."""


class EcgBenchError(Exception):
    """Base class for every error raised by ecgbench."""


class DataError(EcgBenchError, ValueError):
    """Input data cannot be processed (maps to CLI exit code 2)."""


# edf
class MalformedHeader(DataError):
    pass


class UnsupportedFeature(DataError):
    pass


class TruncatedPayload(DataError):
    pass


class AmplitudeOverflow(DataError):
    pass


# dsp
class InvalidBand(DataError):
    pass


class EvenTaps(DataError):
    pass


class SignalTooShort(DataError):
    pass


class NonIntegerFactor(DataError):
    pass


# segmentation / features
class WindowOutOfBounds(DataError):
    pass


class IncompleteCycle(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class EmptySubject(DataError):
    pass


# models
class SingleClass(DataError):
    pass


class NonFiniteFeature(DataError):
    pass


# evaluation
class InsufficientData(DataError):
    pass


class MissingDay(DataError):
    pass


class EmptyScores(DataError):
    pass


class ProtocolViolation(EcgBenchError, AssertionError):
    """A train/test split leaks attacker data or crosses the day partition."""
