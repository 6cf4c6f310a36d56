"""Exception types shared across capsim modules."""


class CapsimError(Exception):
    """Base class for all capsim errors."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:" if line is None else f"{path}:{line}:"
            where += " "
        super().__init__(f"{where}{message}")


class ParseError(CapsimError):
    """A file could not be parsed (syntax, missing header, bad field)."""


class ValidationError(CapsimError):
    """Data violated an invariant (negative capacity, duplicate config, ...)."""
