from __future__ import annotations


class SmcError(Exception):
    """Base class for all errors raised by smartsmc."""


class ModelSyntaxError(SmcError):
    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class ModelSemanticError(SmcError):
    pass


class PropertySyntaxError(ModelSyntaxError):
    pass


class PropertyBindError(SmcError):
    pass


class ModelRangeError(SmcError):
    """An update drove a variable outside its declared domain."""


class InsufficientTraceError(SmcError):
    pass


class BudgetError(SmcError):
    pass


class OracleCapExceeded(SmcError):
    pass


class ConfigError(SmcError):
    pass
