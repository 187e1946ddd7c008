"""Exception hierarchy shared across the toolkit."""


class FsmError(Exception):
    """Base class for all toolkit errors."""


class SemiringError(FsmError):
    """Weight outside the carrier, or an operation unsupported for the kind."""


class KindMismatchError(FsmError):
    """Two machines with different semiring kinds were combined."""


class ContractError(FsmError):
    """An operation precondition was violated."""


class ParseError(FsmError):
    """Malformed textual input.  Carries a line number when available."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SymbolError(FsmError):
    """A symbol could not be resolved against a symbol table."""


class DivergenceError(FsmError):
    """Path enumeration hit its bound with live epsilon cycles under REAL."""


class CapExceededError(FsmError):
    """Determinization exceeded its expansion cap (likely non-subsequentiable)."""


class NoPathError(FsmError):
    """A machine has no accepting path (empty language)."""
