"""Exception types raised across the package."""


class PvQuantError(Exception):
    """Base class for all package errors."""


class MissingQuantileLevel(PvQuantError, KeyError):
    pass


class StepOutOfRange(PvQuantError, IndexError):
    pass


class InvalidQuantile(PvQuantError, ValueError):
    pass


class DimensionMismatch(PvQuantError, ValueError):
    pass


class ShapeMismatch(DimensionMismatch):
    pass


class AlignmentError(DimensionMismatch):
    pass


class NonPositiveDelta(PvQuantError, ValueError):
    pass


class NonPositiveCapacity(PvQuantError, ValueError):
    pass


class EmptyEnsemble(PvQuantError, ValueError):
    pass


class EmptySampleSet(PvQuantError, ValueError):
    pass


class DivergenceDetected(PvQuantError, FloatingPointError):
    pass


class UntrainedModel(PvQuantError, RuntimeError):
    pass


class NonUniformInput(PvQuantError, ValueError):
    pass


class MissingWeatherIssue(PvQuantError, KeyError):
    pass


class MissingObservation(PvQuantError, KeyError):
    pass


class SpanTooShort(PvQuantError, ValueError):
    pass


class CheckpointGateMismatch(PvQuantError, ValueError):
    pass
