"""
Recursive-descent parser for the expression grammar.

    expr     := term (('+'|'-') term)*
    term     := unary (('*'|'/') unary)*
    unary    := '-' unary | power
    power    := atom ('^' exponent)?
    exponent := '-'? integer ('^' exponent)?        (right-associative)
    atom     := number | ident | ident '(' expr ')' | '(' expr ')'

Functions: sin, cos, exp, log, sqrt. The identifier `pi` is a constant.
A '-' directly in front of a number literal that is not raised to a power
reads as a negative constant, so printed trees parse back unchanged.
"""

import math
import re
from dataclasses import dataclass
from typing import List

from .errors import ExprSyntaxError
from .expr import FUNCTIONS, Add, Const, Div, Expr, Mul, Neg, Pow, Sub, Var

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[a-zA-Z][a-zA-Z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)

# Integer powers beyond this magnitude are rejected at parse time.
MAX_EXPONENT = 1000

CONSTANTS = {"pi": math.pi}


@dataclass(frozen=True)
class Token:
    kind: str  # number | ident | op | end
    text: str
    offset: int  # byte offset into the source


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(_byte_offset(text, pos), "a number, identifier or operator", text)
        if m.lastgroup != "ws":
            tokens.append(Token(m.lastgroup, m.group(), _byte_offset(text, pos)))
        pos = m.end()
    tokens.append(Token("end", "", _byte_offset(text, len(text))))
    return tokens


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, ahead: int = 1) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "end":
            self.pos += 1
        return tok

    def fail(self, expected: str) -> ExprSyntaxError:
        return ExprSyntaxError(self.current.offset, expected, self.text)

    def at_op(self, symbol: str) -> bool:
        return self.current.kind == "op" and self.current.text == symbol

    def expect_op(self, symbol: str) -> None:
        if not self.at_op(symbol):
            raise self.fail(f"'{symbol}'")
        self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        if self.current.kind != "end":
            raise self.fail("an operator or end of input")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.at_op("+") or self.at_op("-"):
            op = self.advance().text
            right = self.term()
            left = Add(left, right) if op == "+" else Sub(left, right)
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.at_op("*") or self.at_op("/"):
            op = self.advance().text
            right = self.unary()
            left = Mul(left, right) if op == "*" else Div(left, right)
        return left

    def unary(self) -> Expr:
        if self.at_op("-"):
            self.advance()
            nxt = self.peek()
            if self.current.kind == "number" and not (nxt.kind == "op" and nxt.text == "^"):
                return Const(-float(self.advance().text))
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.at_op("^"):
            self.advance()
            return Pow(base, self.exponent())
        return base

    def exponent(self) -> int:
        sign = 1
        if self.at_op("-"):
            self.advance()
            sign = -1
        tok = self.current
        if tok.kind != "number" or not tok.text.isdigit():
            raise self.fail("an integer exponent")
        self.advance()
        too_big = f"an exponent of magnitude at most {MAX_EXPONENT}"
        if len(tok.text.lstrip("0")) > len(str(MAX_EXPONENT)):
            raise ExprSyntaxError(tok.offset, too_big, self.text)
        value = sign * int(tok.text)
        if abs(value) > MAX_EXPONENT:
            raise ExprSyntaxError(tok.offset, too_big, self.text)
        if self.at_op("^"):
            self.advance()
            inner_offset = self.current.offset
            inner = self.exponent()
            if inner < 0 and abs(value) != 1:
                raise ExprSyntaxError(inner_offset, "a non-negative nested exponent", self.text)
            # |value| >= 2, so 64 factors already pass the cap
            if abs(value) > 1 and abs(value) ** min(inner, 64) > MAX_EXPONENT:
                raise ExprSyntaxError(tok.offset, too_big, self.text)
            value = int(value ** inner)
        return value

    def atom(self) -> Expr:
        tok = self.current
        if tok.kind == "number":
            self.advance()
            return Const(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            if self.at_op("("):
                if tok.text not in FUNCTIONS:
                    raise ExprSyntaxError(tok.offset, f"one of {', '.join(sorted(FUNCTIONS))}", self.text)
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return FUNCTIONS[tok.text](arg)
            if tok.text in FUNCTIONS:
                raise self.fail(f"'(' after {tok.text}")
            if tok.text in CONSTANTS:
                return Const(CONSTANTS[tok.text])
            return Var(tok.text)
        if self.at_op("("):
            self.advance()
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise self.fail("a number, identifier or '('")


def parse(text: str) -> Expr:
    """Parse expression text; raises ExprSyntaxError with the byte offset."""
    return _Parser(text).parse()
