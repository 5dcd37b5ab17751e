"""Exception and warning types shared across the pipeline.

Validation errors (bad inputs, violated preconditions) derive from
:class:`ValidationError`; failures while computing derive from
:class:`PipelineFailure`. The CLI maps them to exit codes 1 and 2.
"""


class CityIdError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(CityIdError, ValueError):
    pass


class PipelineFailure(CityIdError, RuntimeError):
    pass


# audio_io
class UnsupportedEncoding(ValidationError):
    pass


class CorruptHeader(ValidationError):
    pass


class EmptyAudio(ValidationError):
    pass


class TooShort(ValidationError):
    pass


# features
class EmptyFrames(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class TooFewFrames(ValidationError):
    pass


# semantic
class MissingClass(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NumericalFailure(PipelineFailure):
    pass


# classify
class EmptyData(ValidationError):
    pass


class EmptyGroup(ValidationError):
    pass


class DivergedLoss(PipelineFailure):
    pass


# evaluation
class DegenerateLabels(ValidationError):
    pass


class SizeExceedsBasis(ValidationError):
    pass


# harness
class MissingColumn(ValidationError):
    pass


class BadClassId(ValidationError):
    pass


class BadFold(ValidationError):
    pass


class UnknownCity(ValidationError):
    pass


class InvalidSpec(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


class IoFailure(PipelineFailure):
    pass


class StageError(PipelineFailure):
    """Wraps an error raised inside a pipeline stage, naming the stage."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


# warnings
class CityIdWarning(UserWarning):
    pass


class ClampedSamples(CityIdWarning):
    pass


class RankDeficientBasis(CityIdWarning):
    pass


class SingleClassData(CityIdWarning):
    pass


class MissingFile(CityIdWarning):
    pass


class StaleCache(CityIdWarning):
    pass
