"""Exterior-algebra bookkeeping on local frames.

An alternating object over a frame of size ``n`` is stored, per chart, as a
dict mapping strictly increasing index tuples to coefficient expressions:
``{(0, 2): f}`` means ``f e^0 ^ e^2``.  Mixed degrees are allowed in one dict
(equivariant and evaluated objects use that).  All helpers here work on
those plain dicts; the classes at the bottom attach per-chart storage.
"""

from __future__ import annotations

from itertools import combinations
from typing import Callable, Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np

from .expr import ZERO, Expr, add, as_expr, evaluate, mul, neg, partial

Index = Tuple[int, ...]
Coeffs = Dict[Index, Expr]

__all__ = [
    "Coeffs",
    "Index",
    "perm_sign",
    "merge",
    "complement",
    "c_clean",
    "c_add",
    "c_scale",
    "c_wedge",
    "c_contract",
    "c_cartan",
    "c_part",
    "c_eval",
    "c_transform",
    "Alternating",
]


def perm_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq``; 0 when entries repeat."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    # selection sort parity
    for i in range(len(seq)):
        j = min(range(i, len(seq)), key=seq.__getitem__)
        if j != i:
            seq[i], seq[j] = seq[j], seq[i]
            sign = -sign
    return sign


def merge(a: Index, b: Index):
    """Sign and sorted tuple of ``e^a ^ e^b`` (sign 0 if they overlap)."""
    if set(a) & set(b):
        return 0, None
    s = perm_sign(a + b)
    return s, tuple(sorted(a + b))


def complement(idx: Index, n: int) -> Index:
    return tuple(i for i in range(n) if i not in idx)


def c_clean(c: Mapping[Index, Expr]) -> Coeffs:
    return {k: v for k, v in c.items() if not v.is_zero}


def c_add(*cs: Mapping[Index, Expr]) -> Coeffs:
    buckets: Dict[Index, list] = {}
    for c in cs:
        for k, v in c.items():
            buckets.setdefault(k, []).append(v)
    return c_clean({k: add(*vs) for k, vs in buckets.items()})


def c_scale(c: Mapping[Index, Expr], s) -> Coeffs:
    s = as_expr(s)
    if s.is_zero:
        return {}
    return c_clean({k: mul(s, v) for k, v in c.items()})


def c_part(c: Mapping[Index, Expr], k: int) -> Coeffs:
    return {i: v for i, v in c.items() if len(i) == k}


def c_wedge(a: Mapping[Index, Expr], b: Mapping[Index, Expr]) -> Coeffs:
    buckets: Dict[Index, list] = {}
    for ia, va in a.items():
        for ib, vb in b.items():
            s, k = merge(ia, ib)
            if s == 0:
                continue
            term = mul(va, vb)
            buckets.setdefault(k, []).append(term if s > 0 else neg(term))
    return c_clean({k: add(*vs) for k, vs in buckets.items()})


def c_contract(v: Sequence[Expr], c: Mapping[Index, Expr]) -> Coeffs:
    """Insert the vector ``v`` (components over the frame) in the first slot."""
    buckets: Dict[Index, list] = {}
    for idx, coef in c.items():
        for pos, i in enumerate(idx):
            vi = v[i]
            if vi.is_zero:
                continue
            rest = idx[:pos] + idx[pos + 1:]
            term = mul(vi, coef)
            buckets.setdefault(rest, []).append(term if pos % 2 == 0 else neg(term))
    return c_clean({k: add(*vs) for k, vs in buckets.items()})


def _derivation(anchor_col: Sequence[Expr], coords: Sequence[str]) -> Callable[[Expr], Expr]:
    pairs = [(a, x) for a, x in zip(anchor_col, coords) if not a.is_zero]

    def apply(f: Expr) -> Expr:
        return add(*(mul(a, partial(f, x)) for a, x in pairs))

    return apply


def c_cartan(
    c: Mapping[Index, Expr],
    n: int,
    coords: Sequence[str],
    anchor: Sequence[Sequence[Expr]] | None = None,
    structure: Mapping[Tuple[int, int], Mapping[int, Expr]] | None = None,
) -> Coeffs:
    """Cartan-type differential on a local frame of size ``n``.

    ``anchor[alpha][i]`` is the i-th coordinate component of the anchor of
    frame element ``alpha`` (identity when omitted, which requires
    ``n == len(coords)``).  ``structure[(alpha, beta)][gamma]`` for
    ``alpha < beta`` gives the frame bracket coefficients.
    """
    if anchor is None:
        derivs = [lambda f, x=x: partial(f, x) for x in coords]
    else:
        derivs = [_derivation(anchor[a], coords) for a in range(n)]
    structure = structure or {}
    buckets: Dict[Index, list] = {}

    def put(k, term, sign):
        if term.is_zero:
            return
        buckets.setdefault(k, []).append(term if sign > 0 else neg(term))

    for idx, coef in c.items():
        # anchor terms: insert alpha into idx at its sorted position
        for alpha in range(n):
            if alpha in idx:
                continue
            pos = sum(1 for i in idx if i < alpha)
            put(tuple(sorted(idx + (alpha,))), derivs[alpha](coef), -1 if pos % 2 else 1)
        # bracket terms: xi({e_a, e_b}, rest) with e_gamma in idx
        for (a, b), comps in structure.items():
            for gamma, cg in comps.items():
                if gamma not in idx or cg.is_zero:
                    continue
                gpos = idx.index(gamma)
                rest = idx[:gpos] + idx[gpos + 1:]
                if a in rest or b in rest:
                    continue
                # xi(e_g, rest) = (-1)^gpos coef; the target index is rest + {a, b}
                target = tuple(sorted(rest + (a, b)))
                i = target.index(a)
                j = target.index(b)
                sign = (-1) ** (i + j) * (-1) ** gpos
                put(target, mul(cg, coef), sign)
    return c_clean({k: add(*vs) for k, vs in buckets.items()})


def c_transform(c: Mapping[Index, Expr], g: Sequence[Sequence[Expr]]) -> Coeffs:
    """Pull back coefficients along a frame change.

    With ``new_e_a = sum_b g[b][a] old_e_b`` the new coefficients are
    ``c_new[I] = sum_J det(g[J, I]) c_old[J]``.
    """
    out: Dict[Index, list] = {}
    for J, v in c.items():
        k = len(J)
        n = len(g[0]) if g else 0
        for I in combinations(range(n), k):
            d = _det([[as_expr(g[j][i]) for i in I] for j in J])
            if d.is_zero:
                continue
            out.setdefault(I, []).append(mul(d, v))
    return c_clean({k: add(*vs) for k, vs in out.items()})


def _det(m: Sequence[Sequence[Expr]]) -> Expr:
    n = len(m)
    if n == 0:
        return as_expr(1.0)
    if n == 1:
        return m[0][0]
    terms = []
    for j in range(n):
        if m[0][j].is_zero:
            continue
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        t = mul(m[0][j], _det(minor))
        terms.append(t if j % 2 == 0 else neg(t))
    return add(*terms)


def c_eval(c: Mapping[Index, Expr], env: Mapping[str, object]) -> Dict[Index, np.ndarray]:
    return {k: evaluate(v, env) for k, v in c.items()}


class Alternating:
    """Per-chart alternating coefficients over a frame of size ``dim``."""

    __slots__ = ("dim", "data")

    def __init__(self, dim: int, data: Mapping[str, Mapping[Index, object]] | None = None):
        self.dim = dim
        self.data: Dict[str, Coeffs] = {}
        for chart, coeffs in (data or {}).items():
            clean = {}
            for idx, v in coeffs.items():
                idx = tuple(idx)
                if any(i < 0 or i >= dim for i in idx):
                    raise ValueError(f"index {idx} out of range for frame size {dim}")
                s = perm_sign(idx)
                if s == 0:
                    continue
                key = tuple(sorted(idx))
                v = as_expr(v)
                clean[key] = add(clean.get(key, ZERO), v if s > 0 else neg(v))
            self.data[chart] = c_clean(clean)

    def _like(self, data):
        obj = object.__new__(type(self))
        Alternating.__init__(obj, self.dim, {})
        obj.data = {k: dict(v) for k, v in data.items()}
        self._copy_extra(obj)
        return obj

    def _copy_extra(self, obj):
        pass

    @property
    def charts(self) -> Tuple[str, ...]:
        return tuple(self.data)

    def degrees(self) -> Tuple[int, ...]:
        return tuple(sorted({len(i) for c in self.data.values() for i in c}))

    @property
    def degree(self) -> int | None:
        """The degree when homogeneous; ``None`` for the zero element."""
        ds = self.degrees()
        if not ds:
            return None
        if len(ds) > 1:
            raise ValueError(f"mixed-degree object (degrees {ds})")
        return ds[0]

    def part(self, k: int):
        return self._like({ch: c_part(c, k) for ch, c in self.data.items()})

    def coeffs(self, chart: str) -> Coeffs:
        return self.data.get(chart, {})

    def component(self, chart: str, idx: Iterable[int]) -> Expr:
        idx = tuple(idx)
        s = perm_sign(idx)
        if s == 0:
            return ZERO
        v = self.coeffs(chart).get(tuple(sorted(idx)), ZERO)
        return v if s > 0 else neg(v)

    def is_zero(self) -> bool:
        return all(not c for c in self.data.values())

    def map_coeffs(self, fn: Callable[[Expr], Expr]):
        return self._like({ch: c_clean({k: fn(v) for k, v in c.items()}) for ch, c in self.data.items()})

    def _binary(self, other, op):
        if not isinstance(other, Alternating):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError("frame sizes differ")
        charts = list(self.data) + [c for c in other.data if c not in self.data]
        return self._like({ch: op(self.coeffs(ch), other.coeffs(ch)) for ch in charts})

    def __add__(self, other):
        return self._binary(other, lambda a, b: c_add(a, b))

    def __sub__(self, other):
        return self._binary(other, lambda a, b: c_add(a, c_scale(b, -1.0)))

    def __neg__(self):
        return self.scale(-1.0)

    def scale(self, s):
        return self._like({ch: c_scale(c, s) for ch, c in self.data.items()})

    def __mul__(self, s):
        if isinstance(s, Alternating):
            return NotImplemented
        return self.scale(s)

    __rmul__ = __mul__

    def restrict(self, charts: Iterable[str]):
        charts = set(charts)
        return self._like({ch: c for ch, c in self.data.items() if ch in charts})

    def evaluate(self, chart: str, env: Mapping[str, object]) -> Dict[Index, np.ndarray]:
        return c_eval(self.coeffs(chart), env)

    def __repr__(self):
        parts = []
        for ch, c in self.data.items():
            terms = ", ".join(f"{k}: {v}" for k, v in sorted(c.items()))
            parts.append(f"{ch}: {{{terms}}}")
        return f"{type(self).__name__}(dim={self.dim}, {'; '.join(parts)})"
