"""
Symbolic differentiation and a bounded rewriter.

simplify is deliberately small: constant folding plus the identity rewrites
x+0, x*1, x*0, x^0, x^1, -(-x), 0/x, applied bottom-up to a fixpoint.
Semantic equality beyond that is the job of identity.equivalent.
"""

from functools import lru_cache

from .errors import DomainError
from .expr import (
    ONE,
    ZERO,
    Add,
    Const,
    Cos,
    Div,
    Exp,
    Expr,
    Log,
    Mul,
    Neg,
    Pow,
    Sin,
    Sqrt,
    Sub,
    Unary,
    Var,
    _eval,
    free_variables,
    is_const,
    rebuild,
)


@lru_cache(maxsize=65536)
def _depends_on(e: Expr, name: str) -> bool:
    return name in free_variables(e)


def differentiate(e: Expr, name: str) -> Expr:
    """Exact partial derivative d e / d name, simplified."""
    return simplify(_derive(e, name))


def _derive(e: Expr, name: str) -> Expr:
    if not _depends_on(e, name):
        return ZERO
    if isinstance(e, Var):
        return ONE
    if isinstance(e, Add):
        return Add(_derive(e.left, name), _derive(e.right, name))
    if isinstance(e, Sub):
        return Sub(_derive(e.left, name), _derive(e.right, name))
    if isinstance(e, Mul):
        return Add(
            Mul(_derive(e.left, name), e.right),
            Mul(e.left, _derive(e.right, name)),
        )
    if isinstance(e, Div):
        return Div(
            Sub(Mul(_derive(e.left, name), e.right), Mul(e.left, _derive(e.right, name))),
            Pow(e.right, 2),
        )
    if isinstance(e, Neg):
        return Neg(_derive(e.arg, name))
    if isinstance(e, Pow):
        if e.exponent == 0:
            return ZERO
        return Mul(Mul(Const(e.exponent), Pow(e.base, e.exponent - 1)), _derive(e.base, name))
    du = _derive(e.arg, name)
    if isinstance(e, Sin):
        return Mul(Cos(e.arg), du)
    if isinstance(e, Cos):
        return Mul(Neg(Sin(e.arg)), du)
    if isinstance(e, Exp):
        return Mul(e, du)
    if isinstance(e, Log):
        return Div(du, e.arg)
    if isinstance(e, Sqrt):
        return Div(du, Mul(Const(2.0), e))
    raise TypeError(f"unknown node {type(e).__name__}")


def simplify(e: Expr) -> Expr:
    """Bottom-up rewriting to a fixpoint; idempotent."""
    current = e
    while True:
        nxt = _simplify_pass(current)
        if nxt == current:
            return current
        current = nxt


def _simplify_pass(e: Expr) -> Expr:
    kids = e.children()
    if not kids:
        return e
    node = rebuild(e, tuple(_simplify_pass(c) for c in kids))
    return _rewrite(node)


def _fold(node: Expr) -> Expr:
    if all(isinstance(c, Const) for c in node.children()):
        try:
            return Const(_eval(node, {}))
        except DomainError:
            return node
    return node


def _rewrite(node: Expr) -> Expr:
    folded = _fold(node)
    if isinstance(folded, Const):
        return folded

    if isinstance(node, Add):
        if is_const(node.left, 0.0):
            return node.right
        if is_const(node.right, 0.0):
            return node.left
        return node

    if isinstance(node, Sub):
        if is_const(node.right, 0.0):
            return node.left
        if is_const(node.left, 0.0):
            return Neg(node.right)
        if node.left == node.right:
            return ZERO
        return node

    if isinstance(node, Mul):
        if is_const(node.left, 0.0) or is_const(node.right, 0.0):
            return ZERO
        if is_const(node.left, 1.0):
            return node.right
        if is_const(node.right, 1.0):
            return node.left
        if is_const(node.left, -1.0):
            return Neg(node.right)
        if is_const(node.right, -1.0):
            return Neg(node.left)
        return node

    if isinstance(node, Div):
        if is_const(node.left, 0.0) and not is_const(node.right, 0.0):
            return ZERO
        if is_const(node.right, 1.0):
            return node.left
        return node

    if isinstance(node, Neg):
        if isinstance(node.arg, Neg):
            return node.arg.arg
        return node

    if isinstance(node, Pow):
        if node.exponent == 0:
            return ONE
        if node.exponent == 1:
            return node.base
        return node

    if isinstance(node, Unary):
        return node

    return node
