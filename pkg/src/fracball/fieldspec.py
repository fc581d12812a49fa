"""A small expression language for scalar and vector fields on R^n.

Grammar (whitespace is ignored)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?            # right associative
    atom    := NUMBER | NAME | "|x|" | NAME "(" args ")" | "(" expr ")"
    args    := expr ("," expr)*

Names: coordinates ``x1 .. xn``, ``delta`` (= max(0, 1 - |x|)) and ``pi``.
Functions: exp, log, sqrt, abs, min, max, pow and ``inside(e)``, which
multiplies ``e`` by the indicator of the open unit ball.

The pretty printer parenthesises every compound node, so printing and
reparsing yields the same tree.
"""
import re
from dataclasses import dataclass

import numpy as np

from .errors import ArityError, DimensionMismatch, ParseError, UnknownIdentifier
from .quadrature import ScalarField, VectorField

FUNCTIONS = {
    "exp": 1,
    "log": 1,
    "sqrt": 1,
    "abs": 1,
    "inside": 1,
    "min": 2,
    "max": 2,
    "pow": 2,
}
CONSTANTS = {"pi": np.pi}
_COORD = re.compile(r"x([1-9][0-9]*)$")

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<norm>\|\s*x\s*\|)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


# -- syntax tree -----------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


def pretty(node):
    """Fully parenthesised text for a tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{pretty(node.arg)})"
    if isinstance(node, BinOp):
        return f"({pretty(node.left)} {node.op} {pretty(node.right)})"
    return f"{node.name}({', '.join(pretty(a) for a in node.args)})"


# -- lexer and parser --------------------------------------------------------

@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


def tokenize(text):
    toks, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text,
                             expected=("number", "name", "|x|", "operator"))
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


_ATOM_START = ("number", "name", "|x|", "(", "-")


class _Parser:
    def __init__(self, text, n):
        self.text = text
        self.n = n
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def _fail(self, expected):
        t = self.tok
        what = "end of input" if t.kind == "end" else repr(t.text)
        raise ParseError(f"unexpected {what}", t.pos, self.text, expected=expected)

    def _accept(self, *ops):
        t = self.tok
        if t.kind == "op" and t.text in ops:
            self.i += 1
            return t
        return None

    def parse(self):
        if self.tok.kind == "end":
            self._fail(_ATOM_START)
        node = self.expr()
        if self.tok.kind != "end":
            self._fail(("+", "-", "*", "/", "^", "end of input"))
        return node

    def expr(self):
        node = self.term()
        while (t := self._accept("+", "-")) is not None:
            node = BinOp(t.text, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while (t := self._accept("*", "/")) is not None:
            node = BinOp(t.text, node, self.unary())
        return node

    def unary(self):
        if self._accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self._accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.i += 1
            v = float(t.text)
            if not np.isfinite(v):
                raise ParseError(f"numeric literal {t.text} overflows", t.pos, self.text)
            return Num(v)
        if t.kind == "norm":
            self.i += 1
            return Var("|x|")
        if t.kind == "name":
            self.i += 1
            if self._accept("("):
                return self.call(t)
            return self.name(t)
        if self._accept("("):
            node = self.expr()
            if not self._accept(")"):
                self._fail((")",))
            return node
        self._fail(_ATOM_START)

    def name(self, t):
        if t.text == "delta":
            return Var("delta")
        if t.text in CONSTANTS:
            return Var(t.text)
        m = _COORD.match(t.text)
        if m:
            k = int(m.group(1))
            if k > self.n:
                raise UnknownIdentifier(
                    f"coordinate {t.text} does not exist in dimension {self.n}",
                    t.pos, self.text)
            return Var(t.text)
        if t.text in FUNCTIONS:
            raise ParseError(f"function {t.text} needs an argument list", t.pos + len(t.text),
                             self.text, expected=("(",))
        raise UnknownIdentifier(f"unknown identifier {t.text!r}", t.pos, self.text)

    def call(self, t):
        if t.text not in FUNCTIONS:
            raise UnknownIdentifier(f"unknown function {t.text!r}", t.pos, self.text)
        args = []
        if not self._accept(")"):
            args.append(self.expr())
            while self._accept(","):
                args.append(self.expr())
            if not self._accept(")"):
                self._fail((",", ")"))
        if len(args) != FUNCTIONS[t.text]:
            raise ArityError(
                f"{t.text} takes {FUNCTIONS[t.text]} argument(s), got {len(args)}",
                t.pos, self.text)
        return Call(t.text, tuple(args))


# -- evaluation --------------------------------------------------------------

def _norm(x):
    return np.sqrt(np.sum(x * x, axis=-1))


def _compile(node):
    if isinstance(node, Num):
        v = node.value
        return lambda x: np.full(x.shape[:-1], v)
    if isinstance(node, Var):
        if node.name == "|x|":
            return _norm
        if node.name == "delta":
            return lambda x: np.maximum(0.0, 1.0 - _norm(x))
        if node.name in CONSTANTS:
            v = CONSTANTS[node.name]
            return lambda x: np.full(x.shape[:-1], v)
        k = int(node.name[1:]) - 1
        return lambda x: x[..., k]
    if isinstance(node, Neg):
        f = _compile(node.arg)
        return lambda x: -f(x)
    if isinstance(node, BinOp):
        a, b = _compile(node.left), _compile(node.right)
        op = {"+": np.add, "-": np.subtract, "*": np.multiply,
              "/": np.divide, "^": np.power}[node.op]
        return lambda x: op(a(x), b(x))
    fs = [_compile(a) for a in node.args]
    if node.name == "inside":
        f = fs[0]
        return lambda x: np.where(np.sum(x * x, axis=-1) < 1.0, f(x), 0.0)
    fn = {"exp": np.exp, "log": np.log, "sqrt": np.sqrt, "abs": np.abs,
          "min": np.minimum, "max": np.maximum, "pow": np.power}[node.name]
    return lambda x: fn(*(f(x) for f in fs))


def _walk(node):
    yield node
    for child in getattr(node, "args", ()) if isinstance(node, Call) else ():
        yield from _walk(child)
    if isinstance(node, Neg):
        yield from _walk(node.arg)
    if isinstance(node, BinOp):
        yield from _walk(node.left)
        yield from _walk(node.right)


def _ball_supported(node):
    # structural test for "vanishes outside the open unit ball"
    if isinstance(node, Var):
        return node.name == "delta"
    if isinstance(node, Neg):
        return _ball_supported(node.arg)
    if isinstance(node, BinOp):
        if node.op == "*":
            return _ball_supported(node.left) or _ball_supported(node.right)
        if node.op in ("/", "^"):
            return _ball_supported(node.left)
        return _ball_supported(node.left) and _ball_supported(node.right)
    if isinstance(node, Call):
        if node.name == "inside":
            return True
        if node.name == "pow":
            return _ball_supported(node.args[0])
    return False


@dataclass(frozen=True)
class FieldExpr:
    """Parsed expression: source text, syntax tree and dimension."""

    text: str
    ast: object
    n: int

    def pretty(self):
        return pretty(self.ast)

    @property
    def radial(self):
        return not any(isinstance(v, Var) and _COORD.match(v.name) for v in _walk(self.ast))

    @property
    def support(self):
        return "ball" if _ball_supported(self.ast) else "global"

    @property
    def smoothness(self):
        rough = any(isinstance(c, Call) and c.name in ("abs", "min", "max")
                    for c in _walk(self.ast))
        return "C0" if rough else "smooth"

    @property
    def kinks(self):
        at_sphere = any(
            (isinstance(v, Var) and v.name == "delta")
            or (isinstance(v, Call) and v.name == "inside")
            for v in _walk(self.ast))
        return (1.0,) if at_sphere else ()

    def evaluator(self):
        return _compile(self.ast)

    def to_field(self):
        return ScalarField(self.evaluator(), self.n, self.support, self.smoothness,
                           self.radial, self.kinks, self.text)


def parse_expr(text, n):
    """Parse ``text`` for fields on R^n; raises ParseError, ArityError or
    UnknownIdentifier with a 0-based position."""
    if not isinstance(text, str):
        raise ParseError(f"field expression must be a string, got {type(text).__name__}", 0, str(text))
    return FieldExpr(text, _Parser(text, int(n)).parse(), int(n))


def parse_field(text, params):
    """ScalarField for an expression; ``inside(...)`` gives a ball-supported field.

    >>> from fracball.kernels import ProblemParams
    >>> float(parse_field("1 + x1^2", ProblemParams(n=2))(np.array([2.0, 0.0])))
    5.0
    """
    return parse_expr(text, params.n).to_field()


def parse_vector_field(texts, params):
    """Component-wise parse; the component count must equal params.n."""
    if isinstance(texts, str):
        texts = [texts]
    texts = list(texts)
    if len(texts) != params.n:
        raise DimensionMismatch(
            f"vector field in R^{params.n} needs {params.n} components, got {len(texts)}")
    return VectorField(tuple(parse_field(t, params) for t in texts))


__all__ = [
    "FieldExpr",
    "parse_expr",
    "parse_field",
    "parse_vector_field",
    "pretty",
    "tokenize",
]
