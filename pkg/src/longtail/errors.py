"""Exception hierarchy shared across the toolkit.

Every error raised on purpose derives from :class:`LongtailError`, so the
CLI can map failures onto its exit codes without catching ``Exception``.
"""


class LongtailError(Exception):
    """Base class for all toolkit errors."""


class ArgumentError(LongtailError):
    """A scalar argument or option violates its precondition."""


class ShapeError(LongtailError):
    """Array dimensions or extents are inconsistent."""


class InputError(LongtailError):
    """Runtime model input is invalid (e.g. token index out of range)."""


class BuildError(LongtailError):
    """Model assembly failed; the message names the offending stage."""


class ParseError(LongtailError):
    """A file line could not be parsed; the message carries file:line."""


class FormatError(LongtailError):
    """A file is structurally inconsistent (dimensions, magic, tensors)."""


class DataError(LongtailError):
    """Dataset-level problem: unknown label, duplicate id, class too small."""


class NumericError(LongtailError):
    """Training produced a non-finite quantity."""
