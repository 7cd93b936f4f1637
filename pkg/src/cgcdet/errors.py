"""Exception types raised by cgcdet."""


class CGCError(ValueError):
    """Base class for all library errors."""


class InvalidDimensionError(CGCError):
    """A box side length is zero or negative."""


class InvalidValueError(CGCError):
    """A numeric field is NaN or infinite."""


class DegenerateGeometryError(CGCError):
    """Input points do not span a two-dimensional region."""


class InvalidInputError(CGCError):
    """A collection or configuration argument violates its contract."""


class DotaParseError(CGCError):
    """A DOTA annotation line could not be parsed.

    Attributes:
        lineno: 1-based line number of the offending line.
        source: file name or ``"<string>"``.
    """

    def __init__(self, message, lineno, source="<string>"):
        super().__init__(f"{source}:{lineno}: {message}")
        self.lineno = lineno
        self.source = source
