"""Exception hierarchy.

Everything raised for bad input derives from :class:`ValidationError`;
filesystem problems derive from :class:`IoFailure`. The CLI maps the two
families onto exit codes 1 and 2.
"""


class InfoSceneError(Exception):
    pass


class ValidationError(InfoSceneError, ValueError):
    pass


class IoFailure(InfoSceneError, OSError):
    pass


class MissingFile(IoFailure, FileNotFoundError):
    pass


class SchemaViolation(ValidationError):
    def __init__(self, line, field, message=""):
        self.line = line
        self.field = field
        text = f"line {line}: field {field!r}"
        if message:
            text += f": {message}"
        super().__init__(text)


class UnequalTrackLength(ValidationError):
    def __init__(self, ids, expected=None):
        self.ids = tuple(ids)
        msg = "tracks with unequal length: " + ", ".join(self.ids)
        if expected is not None:
            msg += f" (expected {expected} frames)"
        super().__init__(msg)


class InvalidDemonstration(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class NonFiniteSample(ValidationError):
    pass


class SignalTooShort(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class SeriesTooShort(ValidationError):
    pass


class UnknownEntity(ValidationError):
    pass


class WindowOutOfBounds(ValidationError):
    pass


class FrameOutOfBounds(ValidationError):
    pass


class GridMismatch(ValidationError):
    pass


class CoverageGap(ValidationError):
    pass


class NonFiniteInput(ValidationError):
    pass


class NonFiniteParameters(ValidationError):
    pass


class EmptyBatch(ValidationError):
    pass


class EmptyDataset(ValidationError):
    pass


class InconsistentSegments(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


class UnsupportedLetter(ValidationError):
    pass


class InvalidRate(ValidationError):
    pass
