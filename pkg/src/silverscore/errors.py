"""Exception hierarchy.

Every error raised on bad input derives from :class:`SilverScoreError`, so
the CLI can map the whole family to exit code 2.
"""


class SilverScoreError(Exception):
    pass


class ZeroRow(SilverScoreError, ValueError):
    pass


class DimMismatch(SilverScoreError, ValueError):
    pass


class EmptySentence(SilverScoreError, ValueError):
    pass


class DegenerateSample(SilverScoreError, ValueError):
    pass


class DegenerateRange(SilverScoreError, ValueError):
    pass


class TooSmall(SilverScoreError, ValueError):
    pass


class TooShort(SilverScoreError, ValueError):
    pass


class NotSquare(SilverScoreError, ValueError):
    pass


class MissingAnnotation(SilverScoreError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class FormatError(SilverScoreError):
    """Base for file-format problems. ``location`` is a byte offset or line number."""

    def __init__(self, message, path=None, location=None):
        self.path = path
        self.location = location
        where = ""
        if path is not None:
            where = str(path)
        if location is not None:
            where = f"{where}:{location}" if where else str(location)
        super().__init__(f"{where}: {message}" if where else message)


class BadMagic(FormatError):
    pass


class VersionMismatch(FormatError):
    pass


class CorruptRecord(FormatError):
    pass


class DimInconsistent(FormatError):
    pass


class DuplicateId(FormatError):
    pass


class ParseError(FormatError):
    pass


class BadIntensity(FormatError):
    pass


class IoFailure(SilverScoreError, OSError):
    pass


class NonFinite(SilverScoreError, ValueError):
    pass


class IdMismatch(SilverScoreError, ValueError):
    pass
