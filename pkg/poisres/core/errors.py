from typing import Iterable, Optional


class PoisresError(Exception):
    """Base class for every error raised by poisres."""


class ExprSyntaxError(PoisresError):
    """
    Malformed expression text.

    offset is the byte offset into the source string where parsing stopped;
    expected describes what the parser was looking for.
    """

    def __init__(self, offset: int, expected: str, text: str = "") -> None:
        self.offset = offset
        self.expected = expected
        self.text = text
        super().__init__(f"syntax error at offset {offset}: expected {expected}")


class DomainError(PoisresError):
    """Evaluation left the domain of an operation (1/0, log(-1), ...)."""

    def __init__(self, subtree: object, reason: str) -> None:
        self.subtree = subtree
        self.reason = reason
        super().__init__(f"{reason} in {subtree}")


class UnknownVariableError(PoisresError):
    def __init__(self, names: Iterable[str], allowed: Iterable[str] = ()) -> None:
        self.names = tuple(sorted(names))
        self.allowed = tuple(allowed)
        msg = f"unknown variable(s): {', '.join(self.names)}"
        if self.allowed:
            msg += f" (chart coordinates: {', '.join(self.allowed)})"
        super().__init__(msg)


class DimensionError(PoisresError):
    pass


class ProblemError(PoisresError):
    """
    Invalid problem input.

    path locates the offending field ("target.brackets.x,y", "pieces[1].map").
    """

    def __init__(self, message: str, path: Optional[str] = None) -> None:
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class OutsideBoxWarning(UserWarning):
    """A point was evaluated outside its chart's declared box."""
