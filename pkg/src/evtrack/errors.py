"""Exception hierarchy shared by all evtrack modules."""


class EvtrackError(Exception):
    """Base class for all evtrack errors."""


class FormatError(EvtrackError):
    """A text file violates one of the evtrack file formats.

    Carries the offending 1-based line number when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MalformedLine(FormatError):
    pass


class OutOfBounds(FormatError):
    pass


class NonMonotonicTime(FormatError):
    pass


class PathOutOfBounds(EvtrackError):
    pass


class EmptyStream(EvtrackError):
    pass


class WeightFormatError(EvtrackError):
    """A binary weight file violates the EVTW format."""


class BadMagic(WeightFormatError):
    pass


class VersionMismatch(WeightFormatError):
    pass


class ChannelMismatch(WeightFormatError):
    pass


class TruncatedFile(WeightFormatError):
    pass


class UnknownTap(EvtrackError):
    pass


class SizeMismatch(EvtrackError):
    pass


class DegenerateDenominator(EvtrackError):
    pass


class TapMismatch(EvtrackError):
    pass


class EmptyInput(EvtrackError):
    pass


class IndexMismatch(EvtrackError):
    pass


class InitOutOfBounds(EvtrackError):
    pass
