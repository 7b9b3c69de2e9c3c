"""Parser and evaluator for the chart expression language.

Grammar::

    chart  := "dim" INT NEWLINE def+
    def    := "Y" INT "=" expr
    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := NUMBER | VAR | "(" expr ")" | FUNC "(" expr ")" | "-" factor
    FUNC   := "sin" | "cos" | "exp"
    VAR    := ("x" | "y" | "X") INT

Indices are 1-based.  Unary minus is accepted as a convenience.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from ..errors import ChartSyntaxError, DomainError, IndexOutOfRange

FUNCS = ("sin", "cos", "exp")
VAR_KINDS = ("x", "y", "X")


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str
    index: int  # 1-based

    @property
    def name(self):
        return f"{self.kind}{self.index}"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def pretty(node, parent_prec=0, right_side=False):
    """Render an expression; output parses back to an equal tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({pretty(node.arg)})"
    if isinstance(node, Neg):
        if isinstance(node.operand, Num):
            return f"-({pretty(node.operand)})"
        return f"-{pretty(node.operand, 3)}"
    prec = _PREC[node.op]
    text = f"{pretty(node.left, prec)} {node.op} {pretty(node.right, prec, True)}"
    if prec < parent_prec or (right_side and prec == parent_prec):
        return f"({text})"
    return text


def variables(node):
    if isinstance(node, Var):
        return {node}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg,)):
        return variables(node.operand)
    if isinstance(node, Call):
        return variables(node.arg)
    return variables(node.left) | variables(node.right)


# ---------------------------------------------------------------------------
# lexer / parser

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<number>(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/()=])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text):
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ChartSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "newline":
            tokens.append(Token("newline", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


_VAR_RE = re.compile(r"^([xyX])(\d+)$")
_DEF_RE = re.compile(r"^Y(\d+)$")


class _Parser:
    def __init__(self, tokens, n=None):
        self.toks = tokens
        self.i = 0
        self.n = n

    @property
    def tok(self):
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return ChartSyntaxError(msg, tok.line, tok.col)

    def advance(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind, text=None):
        t = self.tok
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            got = t.text or t.kind
            raise self.error(f"expected {want!r}, got {got!r}")
        return self.advance()

    def skip_newlines(self):
        while self.tok.kind == "newline":
            self.advance()

    def chart(self):
        self.skip_newlines()
        t = self.expect("name", "dim")
        num = self.expect("number")
        if num.text not in ("1", "2"):
            raise self.error("dim must be 1 or 2", num)
        self.n = int(num.text)
        if self.tok.kind != "newline":
            raise self.error("expected newline after dim")
        defs = {}
        self.skip_newlines()
        while self.tok.kind != "eof":
            name = self.expect("name")
            m = _DEF_RE.match(name.text)
            if not m:
                raise self.error(f"expected a definition 'Y<i> = ...', got {name.text!r}", name)
            idx = int(m.group(1))
            if not 1 <= idx <= self.n:
                raise IndexOutOfRange(f"Y{idx} out of range for dim {self.n} (line {name.line})")
            if idx in defs:
                raise self.error(f"Y{idx} defined twice", name)
            self.expect("op", "=")
            defs[idx] = self.expr()
            if self.tok.kind not in ("newline", "eof"):
                raise self.error(f"unexpected {self.tok.text!r}")
            self.skip_newlines()
        missing = [i for i in range(1, self.n + 1) if i not in defs]
        if missing:
            raise ChartSyntaxError(f"missing definitions for {', '.join(f'Y{i}' for i in missing)}", t.line, t.col)
        return self.n, tuple(defs[i] for i in range(1, self.n + 1))

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        t = self.tok
        if t.kind == "number":
            self.advance()
            return Num(float(t.text))
        if t.kind == "op" and t.text == "(":
            self.advance()
            node = self.expr()
            self.expect("op", ")")
            return node
        if t.kind == "op" and t.text == "-":
            self.advance()
            if self.tok.kind == "number":
                return Num(-float(self.advance().text))
            return Neg(self.factor())
        if t.kind == "name":
            self.advance()
            if t.text in FUNCS:
                self.expect("op", "(")
                arg = self.expr()
                self.expect("op", ")")
                return Call(t.text, arg)
            m = _VAR_RE.match(t.text)
            if m:
                idx = int(m.group(2))
                if self.n is not None and not 1 <= idx <= self.n:
                    raise IndexOutOfRange(f"{t.text} out of range for dim {self.n} (line {t.line}, column {t.col})")
                return Var(m.group(1), idx)
            raise self.error(f"unknown name {t.text!r}", t)
        raise self.error(f"unexpected {t.text or t.kind!r}")


def parse_expr(text, n=None):
    """Parse a single expression (no ``dim`` header)."""
    p = _Parser([t for t in tokenize(text) if t.kind != "newline"], n)
    node = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r}")
    return node


# ---------------------------------------------------------------------------
# evaluation

def _sin(v):
    return v.sin() if isinstance(v, Jet) else np.sin(v)


def _cos(v):
    return v.cos() if isinstance(v, Jet) else np.cos(v)


def _exp(v):
    return v.exp() if isinstance(v, Jet) else np.exp(v)


_FUNC_IMPL = {"sin": _sin, "cos": _cos, "exp": _exp}
DIVISION_GUARD = 1e-14


def evaluate(node, env):
    """Evaluate with ``env`` mapping variable names to floats, arrays or Jets."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise IndexOutOfRange(f"variable {node.name} is not bound") from None
    if isinstance(node, Neg):
        return -evaluate(node.operand, env)
    if isinstance(node, Call):
        return _FUNC_IMPL[node.func](evaluate(node.arg, env))
    a = evaluate(node.left, env)
    b = evaluate(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    bval = b.val if isinstance(b, Jet) else b
    if np.any(np.abs(bval) < DIVISION_GUARD):
        raise DomainError("division by a denominator smaller than 1e-14")
    return a / b


class Jet:
    """Second-order forward-mode value with gradient and Hessian.

    ``val`` has shape ``(B,)``, ``grad`` ``(m, B)``, ``hess`` ``(m, m, B)`` or
    ``None`` when only first derivatives are propagated.
    """

    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad, hess=None):
        self.val = val
        self.grad = grad
        self.hess = hess

    @classmethod
    def variable(cls, val, index, m, order=2):
        val = np.asarray(val, dtype=float)
        grad = np.zeros((m,) + val.shape)
        grad[index] = 1.0
        hess = np.zeros((m, m) + val.shape) if order >= 2 else None
        return cls(val, grad, hess)

    def _lift(self, other):
        if isinstance(other, Jet):
            return other
        c = np.broadcast_to(np.asarray(other, dtype=float), self.val.shape)
        return Jet(c, np.zeros_like(self.grad), None if self.hess is None else np.zeros_like(self.hess))

    def __add__(self, other):
        o = self._lift(other)
        return Jet(self.val + o.val, self.grad + o.grad,
                   None if self.hess is None else self.hess + o.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.grad, None if self.hess is None else -self.hess)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = float(other)
            return Jet(self.val * c, self.grad * c, None if self.hess is None else self.hess * c)
        a, b = self, other
        grad = a.grad * b.val + a.val * b.grad
        hess = None
        if a.hess is not None:
            cross = a.grad[:, None] * b.grad[None, :]
            hess = a.hess * b.val + a.val * b.hess + cross + np.swapaxes(cross, 0, 1)
        return Jet(a.val * b.val, grad, hess)

    __rmul__ = __mul__

    def _chain(self, f0, f1, f2):
        grad = f1 * self.grad
        hess = None
        if self.hess is not None:
            hess = f1 * self.hess + f2 * (self.grad[:, None] * self.grad[None, :])
        return Jet(f0, grad, hess)

    def reciprocal(self):
        v = self.val
        return self._chain(1.0 / v, -1.0 / v ** 2, 2.0 / v ** 3)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / float(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * float(other)

    def sin(self):
        s, c = np.sin(self.val), np.cos(self.val)
        return self._chain(s, c, -s)

    def cos(self):
        s, c = np.sin(self.val), np.cos(self.val)
        return self._chain(c, -s, -c)

    def exp(self):
        e = np.exp(self.val)
        return self._chain(e, e, e)


# ---------------------------------------------------------------------------
# charts

@dataclass(frozen=True)
class ChartExpr:
    """Chart ``Y_i = Y_i(x, y, X)`` for ``i < n``."""

    n: int
    defs: tuple
    source: str = field(default="", compare=False)

    def var_names(self):
        return [f"{k}{i}" for k in VAR_KINDS for i in range(1, self.n + 1)]

    def to_text(self):
        lines = [f"dim {self.n}"]
        lines += [f"Y{i + 1} = {pretty(d)}" for i, d in enumerate(self.defs)]
        return "\n".join(lines) + "\n"

    def _env(self, x, y, X):
        env = {}
        for kind, arr in zip(VAR_KINDS, (x, y, X)):
            for i in range(self.n):
                env[f"{kind}{i + 1}"] = arr[i]
        return env

    def values(self, x, y, X):
        """Y for coordinates of shape ``(n,)`` or ``(n, B)``."""
        env = self._env(np.asarray(x, float), np.asarray(y, float), np.asarray(X, float))
        shape = np.shape(np.asarray(x))[1:]
        return np.array([np.broadcast_to(evaluate(d, env), shape) for d in self.defs], dtype=float)

    def jets(self, x, y, X, order=2):
        """Jets of each ``Y_i`` in the variables ``(x, y, X)`` flattened in that order.

        Inputs have shape ``(n, B)``; returns ``val (n, B)``, ``grad (n, 3n, B)``
        and ``hess (n, 3n, 3n, B)`` (``None`` for order 1).
        """
        n = self.n
        m = 3 * n
        arrs = [np.atleast_2d(np.asarray(a, float)) for a in (x, y, X)]
        env = {}
        for k, (kind, arr) in enumerate(zip(VAR_KINDS, arrs)):
            for i in range(n):
                env[f"{kind}{i + 1}"] = Jet.variable(arr[i], k * n + i, m, order)
        shape = arrs[0].shape[1:]
        vals, grads, hesses = [], [], []
        for d in self.defs:
            j = evaluate(d, env)
            if not isinstance(j, Jet):
                j = Jet(np.broadcast_to(np.asarray(j, float), shape), np.zeros((m,) + shape),
                        np.zeros((m, m) + shape) if order >= 2 else None)
            vals.append(np.broadcast_to(j.val, shape))
            grads.append(np.broadcast_to(j.grad, (m,) + shape))
            if order >= 2:
                hesses.append(np.broadcast_to(j.hess, (m, m) + shape))
        return np.array(vals), np.array(grads), (np.array(hesses) if order >= 2 else None)


def parse_chart(text):
    n, defs = _Parser(tokenize(text)).chart()
    return ChartExpr(n, defs, text)
