"""Exception hierarchy shared by every stage of the scaling pipeline."""

from typing import Any


class ScalingError(Exception):
    """Base error. ``code`` is the machine-readable name used in diagnostics."""

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_dict(self) -> dict[str, Any]:
        return {"code": self.code, "message": self.message, **self.details}


class ValidationError(ScalingError):
    """Input or configuration rejected before any result is produced."""


class MissingHeader(ValidationError):
    pass


class EmptySample(ValidationError):
    pass


class MixedMetrics(ValidationError):
    pass


class InvalidSpec(ValidationError):
    pass


class DuplicateGroupKey(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


class InvalidDf(ValidationError):
    pass


class InvalidStatistic(ValidationError):
    pass


class FitError(ValidationError):
    """A group of points cannot support a log-log fit."""


class TooFewPoints(FitError):
    pass


class NonPositiveValue(FitError):
    pass


class DegenerateInput(FitError):
    pass


class NonPositiveSize(ValidationError):
    pass


class GroupNotFitted(ValidationError):
    pass


class MalformedDataset(ValidationError):
    pass
