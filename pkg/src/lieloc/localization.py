"""Fixed points, Pfaffians and both sides of the localization formula."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Sequence

import numpy as np

from .equivariant import (
    EquivCochain,
    LieAlgebraAction,
    delta_g_twisted,
    fundamental_field,
    p_lenient,
)
from .expr import evaluate, partial
from .geometry import integrate_top_form
from .twisted import p_map

__all__ = [
    "FixedPointRecord",
    "FixedPointError",
    "pfaffian",
    "linearization",
    "validate_fixed_points",
    "sqrt_det",
    "anchor_rank",
    "closedness_residual",
    "localization_rhs",
    "localization_lhs",
    "verify_localization",
]


class FixedPointError(ValueError):
    pass


@dataclass
class FixedPointRecord:
    """An isolated zero of ``xi*`` seen in one evaluation chart.

    ``L`` may be left as ``None``; :func:`validate_fixed_points` fills it in.
    ``orientation`` is the sign of the chart relative to M, ``metric`` the
    invariant metric at the point in chart units.
    """

    chart: str
    coords: Sequence[float]
    L: np.ndarray | None = None
    orientation: int = 1
    metric: np.ndarray | None = None
    label: str = ""
    info: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self.coords = tuple(float(c) for c in self.coords)
        if self.L is not None:
            self.L = np.asarray(self.L, dtype=float)
        if self.metric is None:
            self.metric = np.eye(len(self.coords))
        self.metric = np.asarray(self.metric, dtype=float)


def pfaffian(a: np.ndarray) -> float:
    """Pfaffian by expansion along the first row (fine for small sizes)."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("Pfaffian needs a square matrix")
    if n == 0:
        return 1.0
    if n % 2:
        return 0.0
    if n == 2:
        return float(a[0, 1])
    total = 0.0
    rest = list(range(1, n))
    for k, j in enumerate(rest):
        if a[0, j] == 0.0:
            continue
        keep = [i for i in rest if i != j]
        total += (-1) ** k * a[0, j] * pfaffian(a[np.ix_(keep, keep)])
    return total


def _point_env(rec: FixedPointRecord, action: LieAlgebraAction):
    chart = action.algebroid.manifold.chart(rec.chart)
    if len(rec.coords) != chart.dim:
        raise FixedPointError(f"fixed point {rec.label or rec.coords} has wrong coordinate count")
    return chart, {x: np.array([v]) for x, v in zip(chart.coords, rec.coords)}


def linearization(action: LieAlgebraAction, xi, chart_id: str, coords: Sequence[float]) -> np.ndarray:
    """``L v = [xi*, v]`` at a zero, i.e. ``L^i_j = -d_j (xi*)^i``."""
    chart = action.algebroid.manifold.chart(chart_id)
    X = fundamental_field(action, xi).data[chart_id]
    env = {x: np.array([float(v)]) for x, v in zip(chart.coords, coords)}
    m = chart.dim
    L = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            L[i, j] = -float(np.asarray(evaluate(partial(X[i], chart.coords[j]), env)).ravel()[0])
    return L


def anchor_rank(action: LieAlgebraAction, rec: FixedPointRecord, tol: float = 1e-10) -> int:
    A = action.algebroid
    _, env = _point_env(rec, action)
    m = A.manifold.dim
    mat = np.zeros((m, A.rank))
    for a in range(A.rank):
        for i in range(m):
            mat[i, a] = float(np.asarray(evaluate(A.anchor[rec.chart][a][i], env)).ravel()[0])
    return int(np.linalg.matrix_rank(mat, tol=tol)) if m else 0


def validate_fixed_points(
    action: LieAlgebraAction,
    xi,
    declared: Sequence[FixedPointRecord],
    zero_tol: float = 1e-10,
    skew_tol: float = 1e-9,
    match_tol: float = 1e-9,
    allow_degenerate: bool = False,
) -> Dict[str, object]:
    """Check each declared zero and attach the recomputed linearization.

    Degenerate zeroes raise unless ``allow_degenerate`` is set, in which
    case they are kept and flagged (they only make sense when the anchor
    rank drops there, so that the numerator vanishes).
    """
    report = {"points": [], "degenerate": []}
    for rec in declared:
        chart, env = _point_env(rec, action)
        X = fundamental_field(action, xi).data[rec.chart]
        vals = [float(np.asarray(evaluate(c, env)).ravel()[0]) for c in X]
        size = max((abs(v) for v in vals), default=0.0)
        if size > zero_tol:
            raise FixedPointError(f"xi* does not vanish at {rec.label or rec.coords} (|xi*| = {size:.3g})")
        L = linearization(action, xi, rec.chart, rec.coords)
        if rec.L is not None and np.max(np.abs(rec.L - L), initial=0.0) > match_tol:
            raise FixedPointError(f"declared linearization at {rec.label or rec.coords} does not match")
        rec.L = L
        g = rec.metric
        skew = np.max(np.abs(g @ L + L.T @ g), initial=0.0)
        if skew > skew_tol * max(1.0, np.max(np.abs(L), initial=0.0)):
            raise FixedPointError(f"L is not skew for the declared metric at {rec.label or rec.coords}")
        det = float(np.linalg.det(L)) if L.size else 1.0
        degenerate = abs(det) <= 1e-12 * max(1.0, np.max(np.abs(L), initial=0.0)) ** max(1, L.shape[0])
        rec.info.update(det=det, degenerate=degenerate, xi_star=vals)
        if degenerate:
            if not allow_degenerate:
                raise FixedPointError(f"zero at {rec.label or rec.coords} is not isolated (det L = 0)")
            report["degenerate"].append(rec.label or str(rec.coords))
        report["points"].append({"label": rec.label, "chart": rec.chart, "coords": list(rec.coords), "det": det})
    return report


def sqrt_det(rec: FixedPointRecord) -> float:
    """Orientation-signed Pfaffian of L in a metric-orthonormal basis."""
    L = np.asarray(rec.L, dtype=float)
    g = np.asarray(rec.metric, dtype=float)
    if not np.allclose(g, g.T, atol=1e-12):
        raise FixedPointError("metric is not symmetric")
    try:
        C = np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise FixedPointError("metric is not positive definite") from None
    # orthonormal basis E = C^{-T}; L in that basis is C^T L C^{-T}
    Lo = C.T @ L @ np.linalg.inv(C.T)
    if np.max(np.abs(Lo + Lo.T), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(Lo), initial=0.0)):
        raise FixedPointError("L is not skew for the declared metric")
    return rec.orientation * pfaffian(0.5 * (Lo - Lo.T))


def closedness_residual(action: LieAlgebraAction, gamma, xi, samples: int = 100, seed: int = 0) -> float:
    from .equivariant import _sample_residual

    return _sample_residual(action.algebroid, delta_g_twisted(action, gamma, xi), samples, np.random.default_rng(seed))


def _degree0_at(action, gamma_xi, rec: FixedPointRecord) -> float:
    form = p_lenient(action.algebroid, gamma_xi)
    _, env = _point_env(rec, action)
    v = form.coeffs(rec.chart).get(())
    return 0.0 if v is None else float(np.asarray(evaluate(v, env)).ravel()[0])


def localization_rhs(
    action: LieAlgebraAction,
    xi,
    gamma,
    fixed_points: Sequence[FixedPointRecord],
    check_closed: bool = True,
    closed_tol: float = 1e-8,
    numerator_tol: float = 1e-12,
) -> Dict[str, object]:
    """Fixed-point side: ``(-2 pi)^{m/2} sum p(gamma(xi))_0(x) / det^{1/2} L``.

    A zero with degenerate L contributes nothing when the numerator vanishes
    there (the anchor rank drops); otherwise it is an error.
    """
    A = action.algebroid
    m = A.manifold.dim
    g = gamma(xi) if isinstance(gamma, EquivCochain) else gamma
    if check_closed:
        res = closedness_residual(action, g, xi)
        if res > closed_tol:
            raise FixedPointError(f"gamma is not equivariantly closed (residual {res:.3g})")
    validate_fixed_points(action, xi, fixed_points, allow_degenerate=True)
    terms = []
    total = []
    for rec in fixed_points:
        num = _degree0_at(action, g, rec)
        entry = {"label": rec.label, "chart": rec.chart, "numerator": num}
        if rec.info.get("degenerate"):
            if abs(num) > numerator_tol:
                raise FixedPointError(f"degenerate zero {rec.label or rec.coords} with nonzero numerator {num:.3g}")
            entry.update(sqrt_det=0.0, contribution=0.0, degenerate=True, anchor_rank=anchor_rank(action, rec))
        else:
            s = sqrt_det(rec)
            entry.update(sqrt_det=float(s), contribution=float(num / s), degenerate=False)
            total.append(num / s)
        terms.append(entry)
    if m % 2 and total:
        raise FixedPointError("odd-dimensional manifold cannot have isolated nondegenerate zeroes")
    pref = (-2.0 * math.pi) ** (m // 2)
    value = pref * math.fsum(total)
    for t in terms:
        t["weighted"] = pref * t["contribution"]
    return {"value": value, "prefactor": pref, "terms": terms}


def localization_lhs(action: LieAlgebraAction, gamma, xi, order=None) -> Dict[str, object]:
    """``integral over M of p(gamma(xi))`` (its top-degree part)."""
    A = action.algebroid
    m = A.manifold.dim
    if A.rank < m:
        return {"value": 0.0, "reason": "rank below dimension"}
    g = gamma(xi) if isinstance(gamma, EquivCochain) else gamma
    top = g._like({ch: {i: v for i, v in co.items() if len(i) == A.rank} for ch, co in g.data.items()})
    if top.is_zero():
        return {"value": 0.0, "reason": "no top-degree component"}
    return {"value": integrate_top_form(A.manifold, p_map(A, top), order=order), "reason": None}


def verify_localization(
    action: LieAlgebraAction,
    gamma,
    xi,
    fixed_points: Sequence[FixedPointRecord],
    order=None,
    rtol: float = 1e-5,
    atol: float = 1e-7,
) -> Dict[str, object]:
    """Both sides plus the verdict: relative error, or absolute error when
    both sides are near zero."""
    lhs = localization_lhs(action, gamma, xi, order=order)
    rhs = localization_rhs(action, xi, gamma, fixed_points)
    L, R = lhs["value"], rhs["value"]
    diff = abs(L - R)
    scale = max(abs(L), abs(R))
    rel = diff / scale if scale > 0 else 0.0
    near_zero = scale <= atol
    ok = diff <= atol if near_zero else rel <= rtol
    return {
        "lhs": L,
        "rhs": R,
        "abs_diff": diff,
        "rel_diff": rel,
        "pass": bool(ok),
        "lhs_reason": lhs["reason"],
        "terms": rhs["terms"],
        "prefactor": rhs["prefactor"],
    }
