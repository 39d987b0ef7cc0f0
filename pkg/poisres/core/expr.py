"""
Expression trees over named real variables.

Every node is a frozen dataclass: trees are immutable, hashable and compare
structurally, so they can be shared freely between threads and used as
dictionary keys. Arithmetic operators on nodes build new trees
(``x * sin(x)``), numbers are coerced to Const.
"""

import math
import re
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Mapping, Union

import numpy as np

from .errors import DomainError, UnknownVariableError

IDENTIFIER = re.compile(r"[a-zA-Z][a-zA-Z0-9_]*\Z")

Number = Union[int, float]


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ()

    def children(self) -> tuple:
        return ()

    def __str__(self) -> str:
        return to_text(self)

    def __add__(self, other) -> "Expr":
        return Add(self, as_expr(other))

    def __radd__(self, other) -> "Expr":
        return Add(as_expr(other), self)

    def __sub__(self, other) -> "Expr":
        return Sub(self, as_expr(other))

    def __rsub__(self, other) -> "Expr":
        return Sub(as_expr(other), self)

    def __mul__(self, other) -> "Expr":
        return Mul(self, as_expr(other))

    def __rmul__(self, other) -> "Expr":
        return Mul(as_expr(other), self)

    def __truediv__(self, other) -> "Expr":
        return Div(self, as_expr(other))

    def __rtruediv__(self, other) -> "Expr":
        return Div(as_expr(other), self)

    def __neg__(self) -> "Expr":
        return Neg(self)

    def __pow__(self, exponent: int) -> "Expr":
        return Pow(self, exponent)


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def __post_init__(self) -> None:
        # + 0.0 folds -0.0 into 0.0
        object.__setattr__(self, "value", float(self.value) + 0.0)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def __post_init__(self) -> None:
        if not isinstance(self.name, str) or not IDENTIFIER.match(self.name):
            raise ValueError(f"invalid variable name: {self.name!r}")


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr

    def children(self) -> tuple:
        return (self.left, self.right)


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr

    def children(self) -> tuple:
        return (self.left, self.right)


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr

    def children(self) -> tuple:
        return (self.left, self.right)


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr

    def children(self) -> tuple:
        return (self.left, self.right)


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def children(self) -> tuple:
        return (self.arg,)


@dataclass(frozen=True)
class Pow(Expr):
    """Integer power. Non-integer powers are written with exp/log."""
    base: Expr
    exponent: int

    def __post_init__(self) -> None:
        if isinstance(self.exponent, bool) or not isinstance(self.exponent, (int, np.integer)):
            raise ValueError(f"Pow exponent must be an integer, got {self.exponent!r}")
        object.__setattr__(self, "exponent", int(self.exponent))

    def children(self) -> tuple:
        return (self.base,)


@dataclass(frozen=True)
class Unary(Expr):
    """Elementary function applied to one argument; subclasses set `name`."""
    arg: Expr

    name = ""

    def children(self) -> tuple:
        return (self.arg,)


class Sin(Unary):
    name = "sin"


class Cos(Unary):
    name = "cos"


class Exp(Unary):
    name = "exp"


class Log(Unary):
    name = "log"


class Sqrt(Unary):
    name = "sqrt"


FUNCTIONS: Dict[str, type] = {cls.name: cls for cls in (Sin, Cos, Exp, Log, Sqrt)}

ZERO = Const(0.0)
ONE = Const(1.0)

Env = Mapping[str, float]


def as_expr(value: Union[Expr, Number]) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)) and not isinstance(value, bool):
        return Const(float(value))
    raise TypeError(f"cannot use {value!r} as an expression")


def var(name: str) -> Var:
    return Var(name)


def is_const(e: Expr, value: float = None) -> bool:
    if not isinstance(e, Const):
        return False
    return value is None or e.value == value


# ----------------------------
# Structure
# ----------------------------

def free_variables(e: Expr) -> FrozenSet[str]:
    out = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.name)
        else:
            stack.extend(node.children())
    return frozenset(out)


def size(e: Expr) -> int:
    return 1 + sum(size(c) for c in e.children())


def rebuild(e: Expr, children: tuple) -> Expr:
    """Same node type as e over new children."""
    if isinstance(e, (Add, Sub, Mul, Div)):
        return type(e)(children[0], children[1])
    if isinstance(e, Pow):
        return Pow(children[0], e.exponent)
    if isinstance(e, (Neg, Unary)):
        return type(e)(children[0])
    return e


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Simultaneous substitution of variables by expressions."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    kids = e.children()
    if not kids:
        return e
    return rebuild(e, tuple(substitute(c, mapping) for c in kids))


# ----------------------------
# Printing
# ----------------------------

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_UNARY = 3
_PREC_POW = 4
_PREC_ATOM = 5


def _format_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _precedence(e: Expr) -> int:
    if isinstance(e, Const):
        return _PREC_UNARY if e.value < 0 else _PREC_ATOM
    if isinstance(e, (Var, Unary)):
        return _PREC_ATOM
    if isinstance(e, Pow):
        return _PREC_POW
    if isinstance(e, Neg):
        return _PREC_UNARY
    if isinstance(e, (Mul, Div)):
        return _PREC_MUL
    return _PREC_ADD


def _negative_form(e: Expr) -> bool:
    return isinstance(e, Neg) or (isinstance(e, Const) and e.value < 0)


_INFIX = {Add: " + ", Sub: " - ", Mul: "*", Div: "/"}


def to_text(e: Expr) -> str:
    """
    Render in the parser's grammar with minimal parentheses.

    parse(to_text(e)) == e for every tree that simplify leaves unchanged.
    """
    if isinstance(e, Const):
        return _format_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        return f"{e.name}({to_text(e.arg)})"
    if isinstance(e, Pow):
        base = to_text(e.base)
        if _precedence(e.base) < _PREC_ATOM:
            base = f"({base})"
        return f"{base}^{e.exponent}"
    if isinstance(e, Neg):
        inner = to_text(e.arg)
        # a bare literal after '-' would read back as a negative constant
        if _precedence(e.arg) < _PREC_UNARY or isinstance(e.arg, Const):
            inner = f"({inner})"
        return f"-{inner}"
    own = _precedence(e)
    left, right = e.children()
    ltxt = to_text(left)
    if _precedence(left) < own:
        ltxt = f"({ltxt})"
    rtxt = to_text(right)
    if _precedence(right) <= own or _negative_form(right):
        rtxt = f"({rtxt})"
    return f"{ltxt}{_INFIX[type(e)]}{rtxt}"


# ----------------------------
# Scalar evaluation
# ----------------------------

def _check_env(e: Expr, env: Env) -> None:
    missing = free_variables(e) - set(env)
    if missing:
        raise UnknownVariableError(missing, sorted(env))


def evaluate(e: Expr, env: Env) -> float:
    """
    IEEE double evaluation at one point.

    Raises DomainError naming the offending subtree for 1/0, log(x<=0),
    sqrt(x<0), 0^negative and overflow.
    """
    _check_env(e, env)
    return _eval(e, env)


def _finite(node: Expr, value: float) -> float:
    if not math.isfinite(value):
        raise DomainError(node, "overflow")
    return value


def _eval(e: Expr, env: Env) -> float:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return float(env[e.name])
    if isinstance(e, Add):
        return _finite(e, _eval(e.left, env) + _eval(e.right, env))
    if isinstance(e, Sub):
        return _finite(e, _eval(e.left, env) - _eval(e.right, env))
    if isinstance(e, Mul):
        return _finite(e, _eval(e.left, env) * _eval(e.right, env))
    if isinstance(e, Div):
        num = _eval(e.left, env)
        den = _eval(e.right, env)
        if den == 0.0:
            raise DomainError(e, "division by zero")
        return _finite(e, num / den)
    if isinstance(e, Neg):
        return -_eval(e.arg, env)
    if isinstance(e, Pow):
        base = _eval(e.base, env)
        if base == 0.0 and e.exponent < 0:
            raise DomainError(e, "zero to a negative power")
        try:
            return _finite(e, base ** e.exponent)
        except OverflowError:
            raise DomainError(e, "overflow") from None
    a = _eval(e.arg, env)
    if isinstance(e, Sin):
        return math.sin(a)
    if isinstance(e, Cos):
        return math.cos(a)
    if isinstance(e, Exp):
        try:
            return math.exp(a)
        except OverflowError:
            raise DomainError(e, "overflow") from None
    if isinstance(e, Log):
        if a <= 0.0:
            raise DomainError(e, "log of a non-positive number")
        return math.log(a)
    if isinstance(e, Sqrt):
        if a < 0.0:
            raise DomainError(e, "sqrt of a negative number")
        return math.sqrt(a)
    raise TypeError(f"unknown node {type(e).__name__}")


# ----------------------------
# Batch evaluation
# ----------------------------

_NUMPY_FUNCS: Dict[type, Callable[[np.ndarray], np.ndarray]] = {
    Sin: np.sin,
    Cos: np.cos,
    Exp: np.exp,
}


def evaluate_batch(e: Expr, env: Mapping[str, Union[np.ndarray, float]]) -> np.ndarray:
    """
    Vectorised evaluation over broadcastable arrays.

    Never raises on domain violations: undefined entries (and overflow)
    come back as NaN, and NaN propagates through every node above them.
    """
    _check_env(e, env)
    arrays = {k: np.asarray(v, dtype=float) for k, v in env.items()}
    shape = np.broadcast_shapes(*(a.shape for a in arrays.values())) if arrays else ()
    with np.errstate(all="ignore"):
        out = np.broadcast_to(_eval_batch(e, arrays), shape).astype(float)
    out[~np.isfinite(out)] = np.nan
    return out


def _eval_batch(e: Expr, env: Mapping[str, np.ndarray]) -> np.ndarray:
    if isinstance(e, Const):
        return np.asarray(e.value)
    if isinstance(e, Var):
        return env[e.name]
    if isinstance(e, Add):
        return _eval_batch(e.left, env) + _eval_batch(e.right, env)
    if isinstance(e, Sub):
        return _eval_batch(e.left, env) - _eval_batch(e.right, env)
    if isinstance(e, Mul):
        return _eval_batch(e.left, env) * _eval_batch(e.right, env)
    if isinstance(e, Div):
        num = _eval_batch(e.left, env)
        den = _eval_batch(e.right, env)
        return np.where(den == 0.0, np.nan, num / np.where(den == 0.0, 1.0, den))
    if isinstance(e, Neg):
        return -_eval_batch(e.arg, env)
    if isinstance(e, Pow):
        base = _eval_batch(e.base, env)
        if e.exponent < 0:
            safe = np.where(base == 0.0, 1.0, base)
            return np.where(base == 0.0, np.nan, safe ** e.exponent)
        return base ** e.exponent
    a = _eval_batch(e.arg, env)
    if isinstance(e, Log):
        return np.where(a > 0.0, np.log(np.where(a > 0.0, a, 1.0)), np.nan)
    if isinstance(e, Sqrt):
        return np.where(a >= 0.0, np.sqrt(np.where(a >= 0.0, a, 0.0)), np.nan)
    return _NUMPY_FUNCS[type(e)](a)
