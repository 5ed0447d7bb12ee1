"""Exception types raised across the package."""


class KGError(Exception):
    """Base class for all package errors."""


class ParseError(KGError, ValueError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"line {line}: "
        super().__init__(where + message)


class UnknownSymbolError(KGError, LookupError):
    """An entity or relation name (or index) that the vocabulary/model does not know."""

    def __init__(self, symbol, kind="symbol", line=None):
        self.symbol = symbol
        self.kind = kind
        self.line = line
        msg = f"unknown {kind} {symbol!r}"
        if line is not None:
            msg = f"line {line}: " + msg
        super().__init__(msg)

    def __str__(self):
        return self.args[0]


class ConfigError(KGError, ValueError):
    pass


class NumericError(KGError, ArithmeticError):
    """Non-finite parameters detected."""
