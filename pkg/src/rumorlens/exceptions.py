"""Exception hierarchy.

Every error raised on bad data derives from :class:`RumorLensError`, which is
itself a :class:`ValueError`, so callers can catch either.
"""


class RumorLensError(ValueError):
    """Base class for all data and contract errors raised by this package."""


class DimensionMismatch(RumorLensError):
    pass


class NonFiniteComponent(RumorLensError):
    pass


class EmptyId(RumorLensError):
    pass


class InvalidLabel(RumorLensError):
    pass


class DuplicateId(RumorLensError):
    pass


class ZeroNorm(RumorLensError):
    pass


class EmptyMatrix(RumorLensError):
    pass


class InvalidImage(RumorLensError):
    pass


class ZeroWindow(RumorLensError):
    pass


class UnsortedInput(RumorLensError):
    pass


class InvalidTimedText(RumorLensError):
    pass


class TooManyTokens(RumorLensError):
    pass


class TargetTooSmall(RumorLensError):
    pass


class BudgetOverflow(RumorLensError):
    pass


class TooFewRecords(RumorLensError):
    pass


class NonPositiveLearningRate(RumorLensError):
    pass


class OutOfRangeDraw(RumorLensError):
    pass


class EmptyIndex(RumorLensError):
    pass


class EmptyIndexLayer(RumorLensError):
    pass


class EmptyCorpus(RumorLensError):
    pass


class InvalidParams(RumorLensError):
    pass


class MissingEventTag(RumorLensError):
    pass


class DegenerateLabels(RumorLensError):
    pass


class MalformedCurve(RumorLensError):
    pass


class ParseError(RumorLensError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class VersionMismatch(RumorLensError):
    pass


class CorruptIndex(RumorLensError):
    pass
