"""Symbolic scalar fields on chart coordinates.

Expressions are immutable trees built from constants, symbols, n-ary sums
and products, integer powers, quotients and the elementary functions
``sin``, ``cos``, ``exp`` and ``sqrt``.  The only rewriting performed at
construction time is constant folding, flattening of nested sums/products
and absorption of 0 and 1; there is no general simplifier.

Evaluation is vectorised: symbols may be bound to numpy arrays and the whole
tree is evaluated in one pass, sharing work between repeated subtrees.
"""

from __future__ import annotations

import math
import re
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "Expr",
    "Const",
    "Symbol",
    "Add",
    "Mul",
    "Pow",
    "Div",
    "Func",
    "ExprError",
    "ParseError",
    "UnknownSymbolError",
    "SingularEvaluationError",
    "UnboundParameterError",
    "Point",
    "const",
    "sym",
    "add",
    "mul",
    "neg",
    "sub",
    "div",
    "power",
    "sin",
    "cos",
    "exp",
    "sqrt",
    "parse_expr",
    "partial",
    "evaluate",
    "evaluate_at",
    "substitute",
    "as_expr",
    "ZERO",
    "ONE",
]

Number = Union[int, float]


class ExprError(Exception):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, source: str, position: int):
        self.source = source
        self.position = position
        super().__init__(f"{message} at position {position}: {source!r}")


class UnknownSymbolError(ParseError):
    def __init__(self, name: str, source: str, position: int):
        self.name = name
        super().__init__(f"unknown symbol {name!r}", source, position)


class SingularEvaluationError(ExprError, ArithmeticError):
    pass


class UnboundParameterError(ExprError, KeyError):
    def __str__(self):
        return f"unbound symbol(s): {', '.join(self.args[0])}"


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ("_key", "_hash", "_dcache", "_free")
    precedence = 4

    def __init__(self):
        self._key = None
        self._hash = None
        self._dcache = None
        self._free = None

    # structural identity -------------------------------------------------
    def key(self):
        if self._key is None:
            self._key = self._make_key()
        return self._key

    def _make_key(self):
        raise NotImplementedError

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.key())
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            if isinstance(other, (int, float)):
                return isinstance(self, Const) and self.value == other
            return NotImplemented
        return self.__hash__() == other.__hash__() and self.key() == other.key()

    def __ne__(self, other):
        result = self.__eq__(other)
        return result if result is NotImplemented else not result

    # arithmetic ----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)):
            raise TypeError("only integer exponents are supported")
        return power(self, int(n))

    # misc ----------------------------------------------------------------
    @property
    def free_symbols(self) -> frozenset:
        if self._free is None:
            self._free = self._make_free()
        return self._free

    def _make_free(self) -> frozenset:
        out = frozenset()
        for child in self.children():
            out = out | child.free_symbols
        return out

    def children(self) -> tuple:
        return ()

    @property
    def is_zero(self) -> bool:
        return isinstance(self, Const) and self.value == 0.0

    @property
    def is_one(self) -> bool:
        return isinstance(self, Const) and self.value == 1.0

    def __str__(self):
        return to_string(self)

    def __repr__(self):
        return f"Expr({to_string(self)!r})"

    def diff(self, name: str) -> "Expr":
        return partial(self, name)

    def __call__(self, **bindings):
        return evaluate(self, bindings)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: Number):
        super().__init__()
        self.value = float(value)

    def _make_key(self):
        return ("c", self.value)

    def _make_free(self):
        return frozenset()


class Symbol(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        super().__init__()
        self.name = name

    def _make_key(self):
        return ("s", self.name)

    def _make_free(self):
        return frozenset((self.name,))


class Add(Expr):
    __slots__ = ("terms",)
    precedence = 1

    def __init__(self, terms: Sequence[Expr]):
        super().__init__()
        self.terms = tuple(terms)

    def _make_key(self):
        return ("+",) + tuple(t.key() for t in self.terms)

    def children(self):
        return self.terms


class Mul(Expr):
    __slots__ = ("factors",)
    precedence = 2

    def __init__(self, factors: Sequence[Expr]):
        super().__init__()
        self.factors = tuple(factors)

    def _make_key(self):
        return ("*",) + tuple(f.key() for f in self.factors)

    def children(self):
        return self.factors


class Div(Expr):
    __slots__ = ("num", "den")
    precedence = 2

    def __init__(self, num: Expr, den: Expr):
        super().__init__()
        self.num = num
        self.den = den

    def _make_key(self):
        return ("/", self.num.key(), self.den.key())

    def children(self):
        return (self.num, self.den)


class Pow(Expr):
    __slots__ = ("base", "exponent")
    precedence = 3

    def __init__(self, base: Expr, exponent: int):
        super().__init__()
        self.base = base
        self.exponent = int(exponent)

    def _make_key(self):
        return ("^", self.base.key(), self.exponent)

    def children(self):
        return (self.base,)


_FUNCS = {
    "sin": (math.sin, np.sin),
    "cos": (math.cos, np.cos),
    "exp": (math.exp, np.exp),
    "sqrt": (math.sqrt, np.sqrt),
}


class Func(Expr):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expr):
        super().__init__()
        if name not in _FUNCS:
            raise ExprError(f"unknown function {name!r}")
        self.name = name
        self.arg = arg

    def _make_key(self):
        return ("f", self.name, self.arg.key())

    def children(self):
        return (self.arg,)


ZERO = Const(0.0)
ONE = Const(1.0)
_MINUS_ONE = Const(-1.0)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, np.integer, np.floating)):
        v = float(value)
        if v == 0.0:
            return ZERO
        if v == 1.0:
            return ONE
        return Const(v)
    if isinstance(value, str):
        return parse_expr(value)
    raise TypeError(f"cannot convert {type(value).__name__} to Expr")


def const(value: Number) -> Expr:
    return as_expr(float(value))


def sym(name: str) -> Symbol:
    return Symbol(name)


# smart constructors ------------------------------------------------------


def add(*terms) -> Expr:
    flat = []
    c = 0.0
    for t in terms:
        t = as_expr(t)
        if isinstance(t, Const):
            c += t.value
        elif isinstance(t, Add):
            for s in t.terms:
                if isinstance(s, Const):
                    c += s.value
                else:
                    flat.append(s)
        else:
            flat.append(t)
    # collect like terms: k*X + j*X -> (k+j)*X
    order, coef, body = [], {}, {}
    for t in flat:
        k = 1.0
        if isinstance(t, Mul) and isinstance(t.factors[0], Const):
            k = t.factors[0].value
            rest = t.factors[1:]
            t = rest[0] if len(rest) == 1 else Mul(rest)
        key = t.key()
        if key not in coef:
            order.append(key)
            coef[key] = 0.0
            body[key] = t
        coef[key] += k
    flat = [mul(coef[key], body[key]) for key in order if coef[key] != 0.0]
    if c != 0.0:
        flat.insert(0, as_expr(c))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Add(flat)


def mul(*factors) -> Expr:
    flat = []
    c = 1.0
    for f in factors:
        f = as_expr(f)
        if isinstance(f, Const):
            c *= f.value
        elif isinstance(f, Mul):
            for g in f.factors:
                if isinstance(g, Const):
                    c *= g.value
                else:
                    flat.append(g)
        else:
            flat.append(f)
        if c == 0.0:
            return ZERO
    if not flat:
        return as_expr(c)
    if c != 1.0:
        flat.insert(0, as_expr(c))
    if len(flat) == 1:
        return flat[0]
    return Mul(flat)


def neg(e) -> Expr:
    return mul(_MINUS_ONE, e)


def sub(a, b) -> Expr:
    return add(a, neg(b))


def div(a, b) -> Expr:
    a, b = as_expr(a), as_expr(b)
    if isinstance(b, Const):
        if b.value == 0.0:
            raise SingularEvaluationError("division by constant zero")
        return mul(1.0 / b.value, a)
    if a.is_zero:
        return ZERO
    return Div(a, b)


def power(base, n: int) -> Expr:
    base = as_expr(base)
    n = int(n)
    if n == 0:
        return ONE
    if n == 1:
        return base
    if isinstance(base, Const):
        if base.value == 0.0 and n < 0:
            raise SingularEvaluationError("zero to a negative power")
        return as_expr(base.value ** n)
    return Pow(base, n)


def _func(name: str, arg) -> Expr:
    arg = as_expr(arg)
    if isinstance(arg, Const):
        if name == "sqrt" and arg.value < 0:
            raise SingularEvaluationError("sqrt of a negative constant")
        try:
            return as_expr(_FUNCS[name][0](arg.value))
        except OverflowError:
            raise SingularEvaluationError(f"{name} overflows at {arg.value!r}") from None
    return Func(name, arg)


def sin(x) -> Expr:
    return _func("sin", x)


def cos(x) -> Expr:
    return _func("cos", x)


def exp(x) -> Expr:
    return _func("exp", x)


def sqrt(x) -> Expr:
    return _func("sqrt", x)


# differentiation ---------------------------------------------------------


def partial(e: Expr, name: str) -> Expr:
    """Exact derivative of ``e`` with respect to the symbol ``name``."""
    e = as_expr(e)
    if name not in e.free_symbols:
        return ZERO
    cache = e._dcache
    if cache is None:
        cache = e._dcache = {}
    hit = cache.get(name)
    if hit is not None:
        return hit
    out = _partial(e, name)
    cache[name] = out
    return out


def _partial(e: Expr, v: str) -> Expr:
    if isinstance(e, Symbol):
        return ONE if e.name == v else ZERO
    if isinstance(e, Add):
        return add(*(partial(t, v) for t in e.terms))
    if isinstance(e, Mul):
        terms = []
        fs = e.factors
        for i, f in enumerate(fs):
            df = partial(f, v)
            if df.is_zero:
                continue
            terms.append(mul(*fs[:i], df, *fs[i + 1:]))
        return add(*terms)
    if isinstance(e, Div):
        dn, dd = partial(e.num, v), partial(e.den, v)
        top = sub(mul(dn, e.den), mul(e.num, dd))
        return div(top, power(e.den, 2))
    if isinstance(e, Pow):
        return mul(e.exponent, power(e.base, e.exponent - 1), partial(e.base, v))
    if isinstance(e, Func):
        da = partial(e.arg, v)
        if e.name == "sin":
            return mul(cos(e.arg), da)
        if e.name == "cos":
            return neg(mul(sin(e.arg), da))
        if e.name == "exp":
            return mul(e, da)
        if e.name == "sqrt":
            return div(da, mul(2.0, e))
    raise ExprError(f"cannot differentiate {type(e).__name__}")


# substitution ------------------------------------------------------------


def substitute(e: Expr, mapping: Mapping[str, object]) -> Expr:
    """Replace symbols by expressions (or numbers); rebuilds with folding."""
    mapping = {k: as_expr(v) for k, v in mapping.items()}
    memo: dict = {}

    def go(x: Expr) -> Expr:
        if not (x.free_symbols & mapping.keys()):
            return x
        hit = memo.get(id(x))
        if hit is not None:
            return hit[1]
        if isinstance(x, Symbol):
            out = mapping[x.name]
        elif isinstance(x, Add):
            out = add(*(go(t) for t in x.terms))
        elif isinstance(x, Mul):
            out = mul(*(go(f) for f in x.factors))
        elif isinstance(x, Div):
            out = div(go(x.num), go(x.den))
        elif isinstance(x, Pow):
            out = power(go(x.base), x.exponent)
        elif isinstance(x, Func):
            out = _func(x.name, go(x.arg))
        else:
            out = x
        memo[id(x)] = (x, out)
        return out

    return go(as_expr(e))


# evaluation --------------------------------------------------------------


def evaluate(e: Expr, env: Mapping[str, object]):
    """Evaluate ``e`` with symbols bound by ``env``.

    Values in ``env`` may be floats or numpy arrays (broadcast together).
    Raises :class:`UnboundParameterError` for free symbols missing from
    ``env`` and :class:`SingularEvaluationError` on division by zero,
    zero to a negative power or the square root of a negative number.
    """
    e = as_expr(e)
    missing = e.free_symbols - env.keys()
    if missing:
        raise UnboundParameterError(sorted(missing))
    memo: dict = {}
    return _eval(e, env, memo)


def _eval(e: Expr, env, memo):
    if isinstance(e, Const):
        return e.value
    hit = memo.get(id(e))
    if hit is not None:
        return hit
    if isinstance(e, Symbol):
        out = env[e.name]
        if not isinstance(out, (int, float)):
            out = np.asarray(out, dtype=float)
        else:
            out = float(out)
    elif isinstance(e, Add):
        out = _eval(e.terms[0], env, memo)
        for t in e.terms[1:]:
            out = out + _eval(t, env, memo)
    elif isinstance(e, Mul):
        out = _eval(e.factors[0], env, memo)
        for f in e.factors[1:]:
            out = out * _eval(f, env, memo)
    elif isinstance(e, Div):
        den = _eval(e.den, env, memo)
        if np.any(np.asarray(den) == 0.0):
            raise SingularEvaluationError(f"division by zero in {to_string(e)}")
        out = _eval(e.num, env, memo) / den
    elif isinstance(e, Pow):
        b = _eval(e.base, env, memo)
        if e.exponent < 0:
            if np.any(np.asarray(b) == 0.0):
                raise SingularEvaluationError(f"zero to a negative power in {to_string(e)}")
            out = 1.0 / b ** (-e.exponent)
        else:
            out = b ** e.exponent
    elif isinstance(e, Func):
        a = _eval(e.arg, env, memo)
        if e.name == "sqrt" and np.any(np.asarray(a) < 0.0):
            raise SingularEvaluationError(f"sqrt of a negative value in {to_string(e)}")
        if isinstance(a, float):
            out = _FUNCS[e.name][0](a)
        else:
            out = _FUNCS[e.name][1](a)
    else:
        raise ExprError(f"cannot evaluate {type(e).__name__}")
    memo[id(e)] = out
    return out


class Point:
    """A point of a chart: chart id plus coordinate values."""

    __slots__ = ("chart", "coords")

    def __init__(self, chart: str, coords: Iterable[float]):
        self.chart = chart
        self.coords = tuple(float(c) for c in coords)

    def __repr__(self):
        return f"Point({self.chart!r}, {self.coords})"

    def __eq__(self, other):
        return isinstance(other, Point) and (self.chart, self.coords) == (other.chart, other.coords)

    def __hash__(self):
        return hash((self.chart, self.coords))


def evaluate_at(e: Expr, symbols: Sequence[str], point: Point, bindings: Mapping[str, float] | None = None) -> float:
    """Scalar evaluation at a point given the chart's coordinate symbols."""
    if len(symbols) != len(point.coords):
        raise ExprError(
            f"point has {len(point.coords)} coordinates, chart has {len(symbols)}"
        )
    env = dict(bindings or {})
    env.update(zip(symbols, point.coords))
    return float(evaluate(e, env))


# printing ----------------------------------------------------------------


def _fmt_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_string(e: Expr) -> str:
    if isinstance(e, Const):
        s = _fmt_number(e.value)
        return f"({s})" if e.value < 0 else s
    if isinstance(e, Symbol):
        return e.name
    if isinstance(e, Add):
        out = _wrap(e.terms[0], 1)
        for t in e.terms[1:]:
            if isinstance(t, Mul) and isinstance(t.factors[0], Const) and t.factors[0].value == -1.0:
                rest = Mul(t.factors[1:]) if len(t.factors) > 2 else t.factors[1]
                out += " - " + _wrap(rest, 2)
            else:
                out += " + " + _wrap(t, 1)
        return out
    if isinstance(e, Mul):
        fs = e.factors
        if isinstance(fs[0], Const) and fs[0].value == -1.0:
            rest = Mul(fs[1:]) if len(fs) > 2 else fs[1]
            return "-" + _wrap(rest, 3)
        parts = [_wrap(fs[0], 2)]
        # a quotient after the first factor would re-associate on parsing
        parts += [f"({to_string(f)})" if isinstance(f, Div) else _wrap(f, 2) for f in fs[1:]]
        return "*".join(parts)
    if isinstance(e, Div):
        return f"{_wrap(e.num, 2)}/{_wrap(e.den, 3)}"
    if isinstance(e, Pow):
        return f"{_wrap(e.base, 4)}^{e.exponent}"
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    raise ExprError(f"cannot print {type(e).__name__}")


def _wrap(e: Expr, level: int) -> str:
    s = to_string(e)
    if e.precedence < level:
        return f"({s})"
    if isinstance(e, Mul) and level >= 3:
        return f"({s})"
    return s


# parsing -----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[a-zA-Z_][a-zA-Z0-9_]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str):
    pos = 0
    out = []
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(source, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {source[pos]!r}", source, pos)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", n))
    return out


class _Parser:
    def __init__(self, source: str, allowed):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0
        self.allowed = None if allowed is None else set(allowed)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value:
            raise ParseError(f"expected {value!r}, found {text or 'end of input'!r}", self.source, pos)

    def parse(self):
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {text!r}", self.source, pos)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def unary(self):
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return neg(self.unary())
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.take()
            sign = 1
            kind, text, pos = self.peek()
            if kind == "op" and text in "+-":
                self.take()
                sign = -1 if text == "-" else 1
                kind, text, pos = self.peek()
            if kind != "num" or not text.isdigit():
                raise ParseError("exponent must be an integer literal", self.source, pos)
            self.take()
            return power(base, sign * int(text))
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return as_expr(float(text))
        if kind == "ident":
            if text in _FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                try:
                    return _func(text, arg)
                except SingularEvaluationError as exc:
                    raise ParseError(str(exc), self.source, pos) from None
            if self.allowed is not None and text not in self.allowed:
                raise UnknownSymbolError(text, self.source, pos)
            return Symbol(text)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected token {text or 'end of input'!r}", self.source, pos)


def parse_expr(source: str, allowed_symbols: Iterable[str] | None = None) -> Expr:
    """Parse an expression string.

    Grammar: decimal numbers, identifiers, binary ``+ - * / ^`` with the
    usual precedence (``^`` binds tightest, right operand an integer
    literal), unary minus, ``sin cos exp sqrt`` and parentheses.  When
    ``allowed_symbols`` is given any other identifier is rejected.
    """
    try:
        return _Parser(source, allowed_symbols).parse()
    except SingularEvaluationError as exc:
        raise ParseError(str(exc), source, 0) from None
