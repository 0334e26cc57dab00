"""Characteristic numbers built from even Chern-Weil classes and the
fixed-point formula that evaluates them.

A weighted polynomial ``Phi`` lives in variables ``x1 .. xn`` with
``n = floor(r / 4)``; variable ``i`` stands for the class of ``sigma_{2i}``
and carries weight ``4 i``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .algebroid import AlgebroidModel
from .connection import (
    AConnectionModel,
    InvariantPoly,
    curvature,
    equivariance_residual,
    equivariant_curvature,
    fixed_point_invariants,
    invariant_of,
    killing_residual,
)
from .equivariant import EquivCochain, LieAlgebraAction, fundamental_field
from .exterior import c_wedge
from .geometry import DegreeError, integrate_top_form
from .localization import (
    FixedPointRecord,
    _degree0_at,
    closedness_residual,
    sqrt_det,
    validate_fixed_points,
)
from .twisted import TwistedCochain, delta_twisted, p_map

__all__ = [
    "WeightedPoly",
    "PhiError",
    "parse_phi",
    "total_weight",
    "chern_of_endomorphism",
    "phi_number",
    "phi_equivariant",
    "verify_bott",
]


class PhiError(ValueError):
    pass


@dataclass(frozen=True)
class WeightedPoly:
    """``terms[(e_1, .., e_n)] = coefficient``; variable i is ``lambda_{2i}``."""

    terms: Tuple[Tuple[Tuple[int, ...], Fraction], ...]

    @classmethod
    def monomial(cls, exponents: Sequence[int] = (), coefficient=1):
        return cls.from_dict({tuple(exponents): coefficient})

    @classmethod
    def from_dict(cls, d: Mapping[Tuple[int, ...], object]):
        clean: Dict[Tuple[int, ...], Fraction] = {}
        for e, c in d.items():
            e = tuple(int(x) for x in e)
            if any(x < 0 for x in e):
                raise PhiError("exponents must be nonnegative")
            while e and e[-1] == 0:
                e = e[:-1]
            clean[e] = clean.get(e, Fraction(0)) + Fraction(c)
        return cls(tuple(sorted((e, c) for e, c in clean.items() if c != 0)))

    @property
    def n_vars(self) -> int:
        return max((len(e) for e, _ in self.terms), default=0)

    @property
    def weight(self) -> int:
        ws = {sum(4 * (i + 1) * x for i, x in enumerate(e)) for e, _ in self.terms}
        if len(ws) > 1:
            raise PhiError(f"monomials have different total weights {sorted(ws)}")
        return ws.pop() if ws else 0

    def as_invariant(self) -> InvariantPoly:
        """Same polynomial in the sigma variables (x_i -> sigma_{2i})."""
        out = {}
        for e, c in self.terms:
            sig = [0] * (2 * len(e))
            for i, x in enumerate(e):
                sig[2 * i + 1] = x
            out[tuple(sig)] = c
        return InvariantPoly.from_dict(out)

    def evaluate(self, values: Sequence[float]) -> float:
        """``values[i - 1]`` is the number substituted for variable i."""
        total = 0.0
        for e, c in self.terms:
            t = float(c)
            for i, x in enumerate(e):
                t *= float(values[i]) ** x
            total += t
        return total

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.terms:
            factors = [f"x{i + 1}" + (f"^{x}" if x > 1 else "") for i, x in enumerate(e) if x]
            coef = "" if c == 1 and factors else str(c)
            parts.append("*".join(([coef] if coef else []) + factors))
        return " + ".join(parts)


_FACTOR = re.compile(r"^(?:(x|l|lambda)(\d+))(?:\^(\d+))?$")


def parse_phi(text: str) -> WeightedPoly:
    """Parse a sum of monomials such as ``"x1"``, ``"2*x1^2 + x2"`` or
    ``"l2*l4"`` (``l<2i>`` names the same variable as ``x<i>``)."""
    src = str(text).replace(" ", "")
    if not src:
        raise PhiError("empty polynomial")
    out: Dict[Tuple[int, ...], Fraction] = {}
    for term in src.split("+"):
        if not term:
            raise PhiError(f"malformed polynomial {text!r}")
        coef = Fraction(1)
        expo: Dict[int, int] = {}
        for f in term.split("*"):
            m = _FACTOR.match(f)
            if m:
                kind, idx, power = m.group(1), int(m.group(2)), int(m.group(3) or 1)
                if kind == "x":
                    var = idx
                else:
                    if idx % 2 or idx == 0:
                        raise PhiError(f"only even classes l2, l4, ... may appear (got {f!r})")
                    var = idx // 2
                if var < 1:
                    raise PhiError(f"variable index must be positive in {f!r}")
                expo[var] = expo.get(var, 0) + power
                continue
            try:
                coef *= Fraction(f)
            except ValueError:
                raise PhiError(f"cannot read factor {f!r} in {text!r}") from None
        e = [0] * max(expo, default=0)
        for v, p in expo.items():
            e[v - 1] = p
        out[tuple(e)] = out.get(tuple(e), Fraction(0)) + coef
    return WeightedPoly.from_dict(out)


def total_weight(phi) -> int:
    """Total weight, assigning ``4 i`` to variable i."""
    if isinstance(phi, str):
        phi = parse_phi(phi)
    if not isinstance(phi, WeightedPoly):
        phi = WeightedPoly.monomial(phi)
    return phi.weight


def chern_of_endomorphism(L, i: int) -> float:
    """``c_i(L)``: coefficient of ``t^{m-i}`` in ``det(t + L)``."""
    L = np.atleast_2d(np.asarray(L, dtype=float))
    m = L.shape[0] if L.size else 0
    if i < 0 or i > m:
        return 0.0
    if i == 0:
        return 1.0
    return float(((-1) ** i * np.poly(L)[i]).real)


def _check_weight(A: AlgebroidModel, phi: WeightedPoly):
    n = A.rank // 4
    if phi.n_vars > n:
        raise PhiError(f"Phi uses x{phi.n_vars} but only {n} variables exist for rank {A.rank}")
    W = phi.weight
    if W > A.rank:
        raise PhiError(f"total weight {W} exceeds the rank {A.rank}")
    return W


def _phi_cochain(phi: WeightedPoly, M) -> Dict[str, dict]:
    """``Phi(sigma_2(M), sigma_4(M), ..)`` as coefficient dicts per chart."""
    out: Dict[str, dict] = {}
    for e, c in phi.terms:
        Q = WeightedPoly.monomial(e, c).as_invariant()
        val = invariant_of(Q, M)
        for ch, co in val.data.items():
            acc = out.setdefault(ch, {})
            for k, v in co.items():
                acc[k] = acc[k] + v if k in acc else v
    return out


def _integrate_product(A, phi_data, xi_c: TwistedCochain, order) -> float:
    top = A.rank
    data = {}
    for ch in xi_c.data:
        prod = c_wedge(phi_data.get(ch, {}), xi_c.coeffs(ch))
        data[ch] = {k: v for k, v in prod.items() if len(k) == top}
    tc = TwistedCochain(top, {})._like(data)
    if tc.is_zero():
        return 0.0
    return integrate_top_form(A.manifold, p_map(A, tc), order=order)


def phi_number(
    conn: AConnectionModel, phi, Xi: TwistedCochain, order=None, closed_tol: float = 1e-8, check_closed: bool = True
) -> float:
    """``(-2 pi)^{-m/2} int_M p(Phi(lambda_2, ..) . Xi)``."""
    A = conn.algebroid
    phi = parse_phi(phi) if isinstance(phi, str) else phi
    W = _check_weight(A, phi)
    if not isinstance(Xi, TwistedCochain):
        Xi = TwistedCochain(Xi.dim, {})._like(Xi.data)
    if not Xi.is_zero() and Xi.degree != A.rank - W:
        raise DegreeError(f"Xi must have degree {A.rank - W}, got {Xi.degree}")
    if check_closed and not Xi.is_zero() and Xi.degree < A.rank:
        from .equivariant import _sample_residual

        res = _sample_residual(A, delta_twisted(A, Xi), 50, np.random.default_rng(0))
        if res > closed_tol:
            raise PhiError(f"Xi is not closed (residual {res:.3g})")
    R = curvature(conn)
    value = _integrate_product(A, _phi_cochain(phi, R), Xi, order)
    return value * (-2.0 * math.pi) ** (-A.manifold.dim / 2.0)


def phi_equivariant(conn: AConnectionModel, action: LieAlgebraAction, phi, Xi_g, xi, order=None) -> float:
    """``(-2 pi)^{-m/2} int_M p(Phi(sigma_2(R + mu), ..) . Xi^g)`` at ``xi``."""
    A = conn.algebroid
    phi = parse_phi(phi) if isinstance(phi, str) else phi
    _check_weight(A, phi)
    Rg = equivariant_curvature(conn, action, xi, check=False).total
    g = Xi_g(xi) if isinstance(Xi_g, EquivCochain) else Xi_g
    value = _integrate_product(A, _phi_cochain(phi, Rg), g, order)
    return value * (-2.0 * math.pi) ** (-A.manifold.dim / 2.0)


def _at_zero(action: LieAlgebraAction, Xi_g):
    if isinstance(Xi_g, EquivCochain):
        return Xi_g(np.zeros(action.dim))
    return Xi_g


def verify_bott(
    conn: AConnectionModel,
    action: LieAlgebraAction,
    xi,
    phi,
    Xi_g,
    fixed_points: Sequence[FixedPointRecord],
    order=None,
    rtol: float = 1e-5,
    atol: float = 1e-7,
    metric=None,
    invariance_tol: float = 1e-8,
) -> Dict[str, object]:
    """Both sides of the Bott-type formula.

    Left: ``Phi_Xi`` with ``Xi = Xi^g(0)``.  Right:
    ``sum_x Phi(c_2(L_x), c_4(L_x), ..) p(Xi^g(xi))_0(x) / det^{1/2} L_x``.
    The verdict uses the relative difference, or the absolute one when both
    sides are below ``atol``.
    """
    A = conn.algebroid
    m, r = A.manifold.dim, A.rank
    phi = parse_phi(phi) if isinstance(phi, str) else phi
    W = _check_weight(A, phi)
    if not (r >= m >= W):
        raise PhiError(f"need rank >= dim >= weight, got {r}, {m}, {W}")
    checks = {"equivariance": equivariance_residual(conn, action, xi)}
    if metric:
        checks["isometry"] = killing_residual(A.manifold, metric, fundamental_field(action, xi))
    bad = {k: v for k, v in checks.items() if v > invariance_tol}
    if bad:
        raise PhiError("the action is not a symmetry of the data: " + ", ".join(f"{k} {v:.3g}" for k, v in bad.items()))
    g_xi = Xi_g(xi) if isinstance(Xi_g, EquivCochain) else Xi_g
    closed = closedness_residual(action, g_xi, xi)
    if closed > 1e-8:
        raise PhiError(f"Xi^g is not equivariantly closed (residual {closed:.3g})")
    lhs = phi_number(conn, phi, _at_zero(action, Xi_g), order=order)
    validate_fixed_points(action, xi, fixed_points, allow_degenerate=True)
    terms: List[Dict[str, object]] = []
    total = []
    n = r // 4
    for rec in fixed_points:
        L = rec.L
        cs = [chern_of_endomorphism(L, 2 * i) for i in range(1, n + 1)]
        phival = phi.evaluate(cs)
        num = _degree0_at(action, g_xi, rec)
        sig, _ = fixed_point_invariants(conn, action, xi, rec)
        curv_gap = max((abs(sig[i] - chern_of_endomorphism(L, i)) for i in range(len(sig))), default=0.0)
        entry = {
            "label": rec.label,
            "chart": rec.chart,
            "chern": cs,
            "phi": phival,
            "numerator": num,
            "curvature_identity_gap": curv_gap,
        }
        if rec.info.get("degenerate"):
            if abs(phival * num) > 1e-12:
                raise PhiError(f"degenerate zero {rec.label or rec.coords} with nonzero numerator")
            entry.update(sqrt_det=0.0, contribution=0.0)
        else:
            s = sqrt_det(rec)
            entry.update(sqrt_det=float(s), contribution=float(phival * num / s))
            total.append(phival * num / s)
        terms.append(entry)
    rhs = math.fsum(total)
    diff = abs(lhs - rhs)
    scale = max(abs(lhs), abs(rhs))
    rel = diff / scale if scale > 0 else 0.0
    ok = diff <= atol if scale <= atol else rel <= rtol
    return {
        "phi": str(phi),
        "weight": W,
        "lhs": lhs,
        "rhs": rhs,
        "abs_diff": diff,
        "rel_diff": rel,
        "pass": bool(ok),
        "terms": terms,
        "symmetry_residuals": checks,
    }
