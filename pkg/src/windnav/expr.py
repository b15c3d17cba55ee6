"""Small expression language for scenario fields.

Grammar (precedence low to high)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := primary ('^' unary)?          # right associative
    primary := NUMBER | 'x' | 'y' | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Expressions are parsed into an immutable :class:`Node` tree which can be
evaluated directly, differentiated symbolically, or compiled into a Python
function for either scalar (``math``) or array (``numpy``) arguments.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Node",
    "ExpressionError",
    "ExpressionSyntaxError",
    "UnknownIdentifierError",
    "EvaluationError",
    "parse_expression",
    "evaluate",
    "differentiate",
    "compile_expr",
    "compile_many",
    "const",
    "var",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "power",
    "call",
    "to_source",
]

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "sqrt": 1, "tanh": 1, "abs": 1, "min": 2, "max": 2}
# only produced by differentiation, never accepted by the parser
_INTERNAL = {"sign": 1, "log": 1}


class ExpressionError(ValueError):
    pass


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExpressionSyntaxError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


class EvaluationError(ExpressionError):
    """Domain error while evaluating (sqrt of a negative, division by zero, ...)."""


@dataclass(frozen=True)
class Node:
    kind: str  # 'const' | 'var' | 'neg' | 'binop' | 'call'
    value: object = None  # float for const, name for var/call, operator for binop
    children: tuple["Node", ...] = ()

    def __str__(self) -> str:
        return to_source(self)


# --- constructors with light constant folding --------------------------------

def const(v: float) -> Node:
    return Node("const", float(v))


def var(name: str) -> Node:
    return Node("var", name)


def _is_const(n: Node, v: float | None = None) -> bool:
    return n.kind == "const" and (v is None or n.value == v)


def neg(a: Node) -> Node:
    if _is_const(a):
        return const(-a.value)
    if a.kind == "neg":
        return a.children[0]
    return Node("neg", None, (a,))


def add(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Node("binop", "+", (a, b))


def sub(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Node("binop", "-", (a, b))


def mul(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b):
        return const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Node("binop", "*", (a, b))


def div(a: Node, b: Node) -> Node:
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return const(a.value / b.value)
    if _is_const(a, 0.0):
        return const(0.0)
    if _is_const(b, 1.0):
        return a
    return Node("binop", "/", (a, b))


def power(a: Node, b: Node) -> Node:
    if _is_const(b, 1.0):
        return a
    if _is_const(b, 0.0):
        return const(1.0)
    return Node("binop", "^", (a, b))


def call(name: str, *args: Node) -> Node:
    return Node("call", name, tuple(args))


# --- parsing -----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(src)
    while pos < n:
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            start = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ExpressionSyntaxError(f"unexpected character {src[start]!r}", _byte_offset(src, start))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


def _byte_offset(src: str, char_index: int) -> int:
    return len(src[:char_index].encode("utf-8"))


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str, tok=None):
        tok = tok or self.peek()
        return ExpressionSyntaxError(message, _byte_offset(self.src, tok[2]))

    def expect(self, value: str):
        tok = self.take()
        if tok[1] != value or tok[0] != "op":
            raise self.error(f"expected {value!r}", tok)

    def parse(self) -> Node:
        node = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self) -> Node:
        left = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            right = self.term()
            left = Node("binop", op, (left, right))
        return left

    def term(self) -> Node:
        left = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            right = self.unary()
            left = Node("binop", op, (left, right))
        return left

    def unary(self) -> Node:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Node("neg", None, (self.unary(),))
        if tok[0] == "op" and tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Node("binop", "^", (base, self.unary()))
        return base

    def primary(self) -> Node:
        tok = self.take()
        kind, text, _ = tok
        if kind == "num":
            return const(float(text))
        if kind == "name":
            if text in ("x", "y"):
                return var(text)
            if text not in FUNCTIONS:
                raise UnknownIdentifierError(text, _byte_offset(self.src, tok[2]))
            self.expect("(")
            args = [self.expr()]
            while self.peek()[0] == "op" and self.peek()[1] == ",":
                self.take()
                args.append(self.expr())
            self.expect(")")
            if len(args) != FUNCTIONS[text]:
                raise ExpressionSyntaxError(
                    f"{text} takes {FUNCTIONS[text]} argument(s), got {len(args)}",
                    _byte_offset(self.src, tok[2]),
                )
            return Node("call", text, tuple(args))
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise self.error("unexpected end of expression", tok)
        raise self.error(f"unexpected token {text!r}", tok)


def parse_expression(src: str) -> Node:
    """Parse ``src`` into an expression tree.

    Raises :class:`ExpressionSyntaxError` (with a byte ``offset``) on malformed
    input and :class:`UnknownIdentifierError` for names outside ``x``, ``y`` and
    the supported functions.
    """
    if not isinstance(src, str) or not src.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    return _Parser(src).parse()


# --- direct evaluation ---------------------------------------------------------

def _sign(u):
    return 1.0 if u > 0 else (-1.0 if u < 0 else 0.0)


def _safe_pow(a, b):
    try:
        r = math.pow(a, b)
    except (ValueError, ZeroDivisionError) as exc:
        raise EvaluationError(f"invalid power {a}^{b}") from exc
    return r


def _safe_sqrt(a):
    if a < 0:
        raise EvaluationError(f"sqrt of negative value {a}")
    return math.sqrt(a)


def _safe_log(a):
    if a <= 0:
        raise EvaluationError(f"log of non-positive value {a}")
    return math.log(a)


def _safe_exp(a):
    try:
        return math.exp(a)
    except OverflowError as exc:
        raise EvaluationError("exp overflow") from exc


_SCALAR_FUNCS = {
    "sin": math.sin,
    "cos": math.cos,
    "exp": _safe_exp,
    "sqrt": _safe_sqrt,
    "tanh": math.tanh,
    "abs": abs,
    "min": min,
    "max": max,
    "sign": _sign,
    "log": _safe_log,
}


def evaluate(node: Node, x: float, y: float) -> float:
    """Tree-walking evaluation at a single point."""
    k = node.kind
    if k == "const":
        return node.value
    if k == "var":
        return x if node.value == "x" else y
    if k == "neg":
        return -evaluate(node.children[0], x, y)
    if k == "binop":
        a = evaluate(node.children[0], x, y)
        b = evaluate(node.children[1], x, y)
        op = node.value
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0.0:
                raise EvaluationError("division by zero")
            return a / b
        return _safe_pow(a, b)
    args = [evaluate(c, x, y) for c in node.children]
    return _SCALAR_FUNCS[node.value](*args)


# --- symbolic differentiation ---------------------------------------------------

def differentiate(node: Node, wrt: str) -> Node:
    """Symbolic partial derivative with respect to ``'x'`` or ``'y'``."""
    k = node.kind
    if k == "const":
        return const(0.0)
    if k == "var":
        return const(1.0 if node.value == wrt else 0.0)
    if k == "neg":
        return neg(differentiate(node.children[0], wrt))
    if k == "binop":
        a, b = node.children
        da, db = differentiate(a, wrt), differentiate(b, wrt)
        op = node.value
        if op == "+":
            return add(da, db)
        if op == "-":
            return sub(da, db)
        if op == "*":
            return add(mul(da, b), mul(a, db))
        if op == "/":
            return div(sub(mul(da, b), mul(a, db)), mul(b, b))
        # power
        if _is_const(db, 0.0):
            return mul(mul(b, power(a, sub(b, const(1.0)))), da)
        return mul(node, add(mul(db, call("log", a)), div(mul(b, da), a)))
    name = node.value
    if name in ("min", "max"):
        a, b = node.children
        da, db = differentiate(a, wrt), differentiate(b, wrt)
        s = call("sign", sub(a, b))
        half = const(0.5)
        if name == "min":
            return mul(half, sub(add(da, db), mul(s, sub(da, db))))
        return mul(half, add(add(da, db), mul(s, sub(da, db))))
    (a,) = node.children
    da = differentiate(a, wrt)
    if _is_const(da, 0.0):
        return const(0.0)
    if name == "sin":
        outer = call("cos", a)
    elif name == "cos":
        outer = neg(call("sin", a))
    elif name == "exp":
        outer = node
    elif name == "sqrt":
        outer = div(const(0.5), node)
    elif name == "tanh":
        outer = sub(const(1.0), mul(node, node))
    elif name == "abs":
        outer = call("sign", a)
    elif name == "log":
        outer = div(const(1.0), a)
    else:  # sign
        return const(0.0)
    return mul(outer, da)


# --- compilation -------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def to_source(node: Node) -> str:
    """Render back to the expression language (fully parenthesised where needed)."""
    return _render(node, lambda name: name, "^")


def _render(node: Node, fname: Callable[[str], str], pow_op: str) -> str:
    k = node.kind
    if k == "const":
        return repr(node.value) if node.value >= 0 else f"({node.value!r})"
    if k == "var":
        return node.value
    if k == "neg":
        return f"(-{_render(node.children[0], fname, pow_op)})"
    if k == "binop":
        a = _render(node.children[0], fname, pow_op)
        b = _render(node.children[1], fname, pow_op)
        if node.value == "^" and pow_op.endswith("("):
            return f"{pow_op}{a}, {b})"
        op = pow_op if node.value == "^" else node.value
        return f"({a} {op} {b})"
    args = ", ".join(_render(c, fname, pow_op) for c in node.children)
    return f"{fname(node.value)}({args})"


_NUMPY_NAMES = {
    "sin": "np.sin",
    "cos": "np.cos",
    "exp": "np.exp",
    "sqrt": "np.sqrt",
    "tanh": "np.tanh",
    "abs": "np.abs",
    "min": "np.minimum",
    "max": "np.maximum",
    "sign": "np.sign",
    "log": "np.log",
}
_MATH_NAMES = {name: f"_f_{name}" for name in _SCALAR_FUNCS}


def _ssa_source(nodes: Sequence[Node], backend: str) -> tuple[list[str], list[str]]:
    """Straight-line code with one temporary per distinct subexpression, so
    the repeated factors produced by differentiation are evaluated once."""
    if backend == "numpy":
        fname, pow_op = _NUMPY_NAMES.__getitem__, "**"
    else:
        fname, pow_op = _MATH_NAMES.__getitem__, "_f_pow("
    lines: list[str] = []
    by_text: dict[str, str] = {}
    by_id: dict[int, str] = {}

    def emit(n: Node) -> str:
        hit = by_id.get(id(n))
        if hit is not None:
            return hit
        k = n.kind
        if k == "const":
            return repr(n.value) if n.value >= 0 else f"({n.value!r})"
        if k == "var":
            return n.value
        args = [emit(c) for c in n.children]
        if k == "neg":
            text = f"(-{args[0]})"
        elif k == "binop":
            if n.value == "^" and pow_op.endswith("("):
                text = f"{pow_op}{args[0]}, {args[1]})"
            else:
                text = f"({args[0]} {pow_op if n.value == '^' else n.value} {args[1]})"
        else:
            text = f"{fname(n.value)}({', '.join(args)})"
        name = by_text.get(text)
        if name is None:
            name = by_text[text] = f"_t{len(by_text)}"
            lines.append(f"    {name} = {text}")
        by_id[id(n)] = name
        return name

    outs = [emit(n) for n in nodes]
    return lines, outs


def _namespace(backend: str) -> dict:
    if backend == "numpy":
        return {"np": np}
    ns = {f"_f_{k}": v for k, v in _SCALAR_FUNCS.items()}
    ns["_f_pow"] = _safe_pow
    return ns


def compile_many(nodes: Sequence[Node], backend: str = "math") -> Callable:
    """Compile several expressions into one function ``f(x, y) -> tuple``.

    The ``math`` backend raises :class:`EvaluationError` on domain errors; the
    ``numpy`` backend follows IEEE semantics (nan/inf) and broadcasts constants.
    """
    if backend not in ("math", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    lines, outs = _ssa_source(nodes, backend)
    src = "def _f(x, y):\n" + "".join(line + "\n" for line in lines) + f"    return ({', '.join(outs)},)\n"
    ns = _namespace(backend)
    exec(compile(src, "<windnav-expr>", "exec"), ns)
    raw = ns["_f"]
    if backend == "numpy":
        return raw

    def scalar(x, y):
        try:
            return raw(x, y)
        except ZeroDivisionError as exc:
            raise EvaluationError("division by zero") from exc
        except (ValueError, OverflowError) as exc:
            raise EvaluationError(str(exc)) from exc

    scalar.raw = raw
    return scalar


def compile_expr(node: Node, backend: str = "math") -> Callable:
    f = compile_many([node], backend)
    return lambda x, y: f(x, y)[0]
