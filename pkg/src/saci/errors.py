"""Exception hierarchy shared by all saci modules."""


class SaciError(Exception):
    """Base class for every error raised by the toolkit."""


class DataError(SaciError):
    """Input data violates a precondition (bad file, bad record, bad shape)."""


class AnalysisError(SaciError):
    """The analysis cannot produce a result for well-formed input."""


class NonPositiveSpan(DataError):
    pass


class TooShort(DataError):
    pass


class ZeroVariance(AnalysisError):
    pass


class LagOutOfRange(DataError):
    pass


class CrossedBook(DataError):
    pass


class EmptySide(DataError):
    pass


class MissingCategory(DataError):
    pass


class LexiconError(DataError):
    pass


class NoCandidates(AnalysisError):
    pass


class MissingTermFrame(DataError):
    pass


class ZeroActual(DataError):
    pass


class EmptyOverlap(DataError):
    pass


class SpecInvalid(DataError):
    pass


class InputFormatError(DataError):
    """A malformed row in an ingestion file; carries the path and 1-based line number."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")
