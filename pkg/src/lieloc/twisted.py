"""Twisted cochains: coefficients in the line bundle ``Q = top(A) (x) top(T*M)``.

On each chart ``Q`` is trivialised by ``tau0 = (e_0 ^ ... ^ e_{r-1}) (x)
(dx^0 ^ ... ^ dx^{m-1})``; a twisted cochain stores the coefficients of
``psi (x) tau0``.  The representation of A on Q acts on ``tau0`` through a
one-form ``theta`` (bracket trace plus anchor divergence), so every
operation reduces to ordinary cochain algebra plus a correction by
``theta``.
"""

from __future__ import annotations

from itertools import combinations
from typing import Dict, List, Mapping

from .algebroid import ACochain, AlgebroidModel, ASection, delta
from .exterior import Alternating, Coeffs, c_add, c_clean, complement, perm_sign, _det
from .expr import ZERO, Expr, add, as_expr, mul, neg, partial
from .geometry import DegreeError, DiffForm, integrate_top_form

__all__ = [
    "QSection",
    "TwistedCochain",
    "theta",
    "d_operator_Q",
    "delta_twisted",
    "p_map",
    "stokes_check",
    "pairing_integral",
    "cup_product",
    "twisted_lie_derivative",
    "twisted_from_q",
    "chain_map_residual",
]


class QSection:
    """Section ``q * tau0`` of Q, one scalar per chart."""

    __slots__ = ("data",)

    def __init__(self, data: Mapping[str, object]):
        self.data = {ch: as_expr(v) for ch, v in data.items()}

    def as_cochain(self, rank: int) -> "TwistedCochain":
        return TwistedCochain(rank, {ch: {(): q} for ch, q in self.data.items()})


class TwistedCochain(Alternating):
    """Element of Gamma(Lambda A* (x) Q), coefficients relative to ``tau0``."""

    __slots__ = ()


def twisted_from_q(A: AlgebroidModel, q: Mapping[str, object]) -> TwistedCochain:
    """Top-degree twisted cochain ``q e^{0..r-1} (x) tau0``."""
    top = tuple(range(A.rank))
    return TwistedCochain(A.rank, {ch: {top: v} for ch, v in q.items()})


def theta(A: AlgebroidModel, chart: str) -> List[Expr]:
    """``D tau0 = theta (x) tau0`` with
    ``theta_a = sum_b c^b_{ab} + sum_i d_i a^i_a``."""
    coords = A.coords(chart)
    out = []
    for a in range(A.rank):
        tr = [A.c(chart, a, b).get(b, ZERO) for b in range(A.rank) if b != a]
        div = [partial(A.anchor[chart][a][i], x) for i, x in enumerate(coords)]
        out.append(add(*tr, *div))
    return out


def d_operator_Q(A: AlgebroidModel, tau: QSection) -> TwistedCochain:
    """``D(q tau0)(e_a) = (a_a(q) + q theta_a) tau0`` as a twisted 1-cochain."""
    out = {}
    for ch, q in tau.data.items():
        th = theta(A, ch)
        out[ch] = c_clean({(a,): add(A.apply_anchor(ch, a, q), mul(q, th[a])) for a in range(A.rank)})
    return TwistedCochain(A.rank, out)


def delta_twisted(A: AlgebroidModel, c: Alternating) -> TwistedCochain:
    """``delta psi + (-1)^k psi ^ theta`` on each homogeneous part."""
    if c.dim != A.rank:
        raise ValueError("cochain frame size does not match the algebroid rank")
    ds = c.degrees()
    if ds and min(ds) >= A.rank:
        raise DegreeError(f"cannot apply the twisted differential in degree {A.rank}")
    base = delta(A, ACochain(A.rank, {}) if c.is_zero() else _as_plain(c))
    out = {}
    for ch, coeffs in c.data.items():
        th = {(a,): v for a, v in enumerate(theta(A, ch)) if not v.is_zero}
        parts = [base.coeffs(ch)]
        if th:
            for k in set(len(i) for i in coeffs):
                ck = {i: v for i, v in coeffs.items() if len(i) == k}
                w = _wedge(ck, th)
                parts.append(w if k % 2 == 0 else {i: neg(v) for i, v in w.items()})
        out[ch] = c_add(*parts)
    return TwistedCochain(A.rank, {})._like(out)


def _as_plain(c: Alternating) -> ACochain:
    return ACochain(c.dim, {})._like(c.data)


def _wedge(a: Coeffs, b: Coeffs) -> Coeffs:
    from .exterior import c_wedge

    return c_wedge(a, b)


def _p_coeffs(A: AlgebroidModel, chart: str, coeffs: Coeffs) -> Coeffs:
    r, m = A.rank, A.manifold.dim
    anchor = A.anchor[chart]
    out: Dict[tuple, list] = {}
    for I, cI in coeffs.items():
        k = len(I)
        q = r - k
        if q > m:
            continue
        Ic = complement(I, r)
        s_I = perm_sign(I + Ic)
        s_rev = -1 if (q * (q - 1) // 2) % 2 else 1
        for K in combinations(range(m), q):
            L = complement(K, m)
            d = _det([[anchor[col][row] for col in Ic] for row in K])
            if d.is_zero:
                continue
            sign = s_I * s_rev * perm_sign(K + L)
            term = mul(cI, d)
            out.setdefault(L, []).append(term if sign > 0 else neg(term))
    return c_clean({k: add(*v) for k, v in out.items()})


def p_map(A: AlgebroidModel, c: Alternating) -> DiffForm:
    """Chain map to differential forms: contract into the top frame
    multivector, push through the anchor, contract into the volume form.

    A twisted k-cochain lands in degree ``k - r + m``.  Homogeneous input
    with ``k < r - m`` is rejected; in mixed-degree input such parts map to
    zero.
    """
    r, m = A.rank, A.manifold.dim
    ds = c.degrees()
    if ds and max(ds) < r - m:
        raise DegreeError(f"p needs degree >= {r - m}, got {max(ds)}")
    return DiffForm(m, {})._like({ch: _p_coeffs(A, ch, co) for ch, co in c.data.items()})


def stokes_check(A: AlgebroidModel, c: TwistedCochain, order=None, bindings=None) -> float:
    """``|integral of p(delta~ c)|`` for a twisted ``(r-1)``-cochain."""
    if c.is_zero():
        return 0.0
    if c.degree != A.rank - 1:
        raise DegreeError(f"Stokes check needs degree {A.rank - 1}, got {c.degree}")
    return abs(integrate_top_form(A.manifold, p_map(A, delta_twisted(A, c)), order=order, bindings=bindings))


def cup_product(xi: Alternating, c: Alternating) -> TwistedCochain:
    """``xi . (psi (x) tau) = (xi ^ psi) (x) tau``."""
    if xi.dim != c.dim:
        raise ValueError("frame sizes differ")
    charts = [ch for ch in c.data if ch in xi.data]
    from .exterior import c_wedge

    return TwistedCochain(c.dim, {})._like({ch: c_wedge(xi.coeffs(ch), c.coeffs(ch)) for ch in charts})


def pairing_integral(A: AlgebroidModel, xi: ACochain, c: TwistedCochain, order=None, bindings=None) -> float:
    """``integral over M of p(xi . c)``; the degrees must add up to r."""
    if not xi.is_zero() and not c.is_zero() and xi.degree + c.degree != A.rank:
        raise DegreeError(f"pairing needs complementary degrees, got {xi.degree} and {c.degree}")
    prod = cup_product(xi, c)
    if prod.is_zero():
        return 0.0
    return integrate_top_form(A.manifold, p_map(A, prod), order=order, bindings=bindings)


def twisted_lie_derivative(A: AlgebroidModel, s: ASection, c: TwistedCochain) -> TwistedCochain:
    """``L_s = i_s delta~ + delta~ i_s``."""
    parts = []
    top = A.rank
    lower = c.restrict(c.charts)._like({ch: {i: v for i, v in co.items() if len(i) < top} for ch, co in c.data.items()})
    if not lower.is_zero():
        parts.append(_contract_any(s, delta_twisted(A, lower)))
    positive = c._like({ch: {i: v for i, v in co.items() if len(i) > 0} for ch, co in c.data.items()})
    if not positive.is_zero():
        inner = _contract_any(s, positive)
        inner_low = inner._like({ch: {i: v for i, v in co.items() if len(i) < top} for ch, co in inner.data.items()})
        if not inner_low.is_zero():
            parts.append(delta_twisted(A, inner_low))
    out = TwistedCochain(A.rank, {ch: {} for ch in c.data})
    for p in parts:
        out = out + p
    return out


def _contract_any(s: ASection, c: Alternating) -> TwistedCochain:
    from .exterior import c_contract

    return TwistedCochain(c.dim, {})._like({ch: c_contract(s.data[ch], co) for ch, co in c.data.items() if ch in s.data})


def chain_map_residual(A: AlgebroidModel, c: TwistedCochain, samples: int = 50, seed: int = 0) -> float:
    """Max pointwise ``|p(delta~ c) - (-1)^k d p(c)|`` for homogeneous c of degree k."""
    import numpy as np

    from .geometry import exterior_derivative, sample_points
    from .expr import evaluate

    if c.is_zero():
        return 0.0
    k = c.degree
    lhs = p_map(A, delta_twisted(A, c))
    rhs = exterior_derivative(A.manifold, p_map(A, c))
    diff = lhs - rhs.scale(float((-1) ** k))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for ch, co in diff.data.items():
        chart = A.manifold.chart(ch)
        env = sample_points(chart, samples, rng) if chart.dim else {}
        for v in co.values():
            worst = max(worst, float(np.max(np.abs(np.asarray(evaluate(v, env), dtype=float)))))
    return worst
