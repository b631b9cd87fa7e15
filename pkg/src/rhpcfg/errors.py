"""Exception types shared across the package."""


class GrammarDegenerateError(ValueError):
    """The start symbol cannot derive any terminal string."""


class UnderivableError(ValueError):
    """A sentence (or target length) has no derivation under the grammar."""


class FileFormatError(ValueError):
    """Malformed vocab / corpus / parameter file; carries a 1-based line number
    when one makes sense."""

    def __init__(self, message, line=None):
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)
        self.line = line


class EnumerationCapError(RuntimeError):
    """The closed-form tree count exceeds the enumeration cap."""
