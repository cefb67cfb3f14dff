class WdmTwinError(Exception):
    """Base class for package errors."""


class InvalidArgument(WdmTwinError, ValueError):
    pass


class DomainError(WdmTwinError, ArithmeticError):
    """An operation was evaluated outside its real domain."""

    def __init__(self, op, msg=""):
        self.op = op
        super().__init__(f"{op}: {msg}" if msg else op)


class ContractViolation(WdmTwinError):
    pass


class UnsupportedConfiguration(WdmTwinError):
    pass


class NotFound(WdmTwinError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "not found"


class NumericalFailure(WdmTwinError):
    """Raised when an iterative procedure diverges (NaN loss/cost)."""

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


class SchemaError(WdmTwinError):
    pass
