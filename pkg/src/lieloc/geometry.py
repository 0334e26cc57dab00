"""Chart-based manifolds, differential forms and quadrature.

A :class:`ManifoldModel` is a list of coordinate charts.  Charts flagged for
quadrature carry a box domain and are integrated with tensor Gauss-Legendre
grids (nodes are interior, so coordinate singularities on the boundary are
never touched).  Charts flagged for evaluation are used for pointwise data,
e.g. at fixed points that sit on the boundary of a quadrature chart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .exterior import Alternating, c_cartan, c_contract, c_transform, c_wedge
from .expr import Expr, add, as_expr, evaluate, mul, partial, substitute

__all__ = [
    "Chart",
    "Transition",
    "ManifoldModel",
    "DiffForm",
    "VectorField",
    "exterior_derivative",
    "interior_product",
    "lie_derivative",
    "wedge_forms",
    "integrate_top_form",
    "gauss_legendre_grid",
    "sample_points",
    "jacobian",
    "transition_consistency_check",
    "DegreeError",
]

QUADRATURE = "quadrature"
EVALUATION = "evaluation"


class DegreeError(ValueError):
    pass


@dataclass(frozen=True)
class Chart:
    id: str
    coords: Tuple[str, ...]
    roles: frozenset = frozenset({EVALUATION})
    domain: Tuple[Tuple[float, float], ...] | None = None
    sample_box: Tuple[Tuple[float, float], ...] | None = None
    quad_order: int = 32
    orientation: int = 1

    def __post_init__(self):
        if self.orientation not in (1, -1):
            raise ValueError(f"chart {self.id}: orientation must be +1 or -1")
        if QUADRATURE in self.roles and self.domain is None and self.dim > 0:
            raise ValueError(f"quadrature chart {self.id} needs a bounded domain")
        for box in (self.domain, self.sample_box):
            if box is not None and len(box) != self.dim:
                raise ValueError(f"chart {self.id}: box has wrong dimension")

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def is_quadrature(self) -> bool:
        return QUADRATURE in self.roles

    @property
    def box(self):
        return self.sample_box if self.sample_box is not None else self.domain


@dataclass(frozen=True)
class Transition:
    """Coordinate change ``target = coord_map(source)`` on an overlap.

    ``region`` is a box in source coordinates from which consistency
    samples are drawn.
    """

    source: str
    target: str
    coord_map: Tuple[Expr, ...]
    region: Tuple[Tuple[float, float], ...]


@dataclass
class ManifoldModel:
    dim: int
    charts: Dict[str, Chart]
    transitions: List[Transition] = field(default_factory=list)
    name: str = ""

    def __post_init__(self):
        for ch in self.charts.values():
            if ch.dim != self.dim:
                raise ValueError(f"chart {ch.id} has dimension {ch.dim}, manifold {self.dim}")
        if not any(ch.is_quadrature for ch in self.charts.values()):
            raise ValueError("a manifold model needs at least one quadrature chart")

    @property
    def quadrature_charts(self) -> List[Chart]:
        return [c for c in self.charts.values() if c.is_quadrature]

    @property
    def evaluation_charts(self) -> List[Chart]:
        return [c for c in self.charts.values() if EVALUATION in c.roles]

    def chart(self, cid: str) -> Chart:
        try:
            return self.charts[cid]
        except KeyError:
            raise KeyError(f"unknown chart {cid!r}") from None


class DiffForm(Alternating):
    """Differential form: per-chart coefficients on coordinate coframes."""

    __slots__ = ()

    def __init__(self, dim: int, data=None):
        super().__init__(dim, data)


class VectorField:
    """Per-chart component lists ``v^i``."""

    __slots__ = ("dim", "data")

    def __init__(self, dim: int, data: Mapping[str, Sequence[object]]):
        self.dim = dim
        self.data = {}
        for ch, comps in data.items():
            comps = [as_expr(c) for c in comps]
            if len(comps) != dim:
                raise ValueError(f"vector field on chart {ch} needs {dim} components")
            self.data[ch] = comps

    def components(self, chart: str) -> List[Expr]:
        return self.data[chart]

    def scale(self, s):
        return VectorField(self.dim, {ch: [mul(s, c) for c in v] for ch, v in self.data.items()})

    def __add__(self, other):
        return VectorField(
            self.dim,
            {ch: [add(a, b) for a, b in zip(v, other.data[ch])] for ch, v in self.data.items() if ch in other.data},
        )


def _coords(M: ManifoldModel, chart: str) -> Tuple[str, ...]:
    return M.chart(chart).coords


def exterior_derivative(M: ManifoldModel, w: DiffForm) -> DiffForm:
    out = {}
    for ch, c in w.data.items():
        out[ch] = c_cartan(c, M.dim, _coords(M, ch))
    return DiffForm(M.dim, out)


def interior_product(X: VectorField, w: DiffForm) -> DiffForm:
    """``i_X w`` (insertion in the first slot).  Rejects 0-forms."""
    ds = w.degrees()
    if ds and min(ds) == 0:
        raise DegreeError("interior product of a 0-form is undefined")
    out = {}
    for ch, c in w.data.items():
        if ch in X.data:
            out[ch] = c_contract(X.data[ch], c)
    return DiffForm(w.dim, out)


def lie_derivative(M: ManifoldModel, X: VectorField, w: DiffForm) -> DiffForm:
    """Cartan formula ``L_X = i_X d + d i_X`` (0-form parts handled)."""
    dw = exterior_derivative(M, w)
    left = interior_product(X, dw) if not dw.is_zero() else dw
    positive = w._like({ch: {k: v for k, v in c.items() if k} for ch, c in w.data.items()})
    right = exterior_derivative(M, interior_product(X, positive)) if not positive.is_zero() else positive
    return left + right


def wedge_forms(a: DiffForm, b: DiffForm) -> DiffForm:
    return DiffForm(a.dim, {ch: c_wedge(a.coeffs(ch), b.coeffs(ch)) for ch in a.data if ch in b.data})


# quadrature ----------------------------------------------------------------


def gauss_legendre_grid(domain: Sequence[Tuple[float, float]], order: int | Sequence[int]):
    """Tensor Gauss-Legendre nodes and weights mapped to a box.

    Returns ``(axes, weights)`` where ``axes`` is a list of 1-D node arrays
    and ``weights`` a list of the matching 1-D weights.
    """
    if isinstance(order, int):
        order = [order] * len(domain)
    axes, weights = [], []
    for (lo, hi), n in zip(domain, order):
        x, w = np.polynomial.legendre.leggauss(int(n))
        half = 0.5 * (hi - lo)
        axes.append(lo + half * (x + 1.0))
        weights.append(half * w)
    return axes, weights


def _integrate_chart(coef: Expr, chart: Chart, order, bindings, chunk: int = 1 << 17) -> float:
    env0 = dict(bindings or {})
    if chart.dim == 0:
        return float(evaluate(coef, env0))
    axes, weights = gauss_legendre_grid(chart.domain, order)
    # split along the first axis so that each chunk is a full sub-grid;
    # chunk sums are combined with fsum in a fixed order
    inner = int(np.prod([len(a) for a in axes[1:]])) if len(axes) > 1 else 1
    step = max(1, chunk // max(inner, 1))
    partials = []
    inner_grids = np.meshgrid(*axes[1:], indexing="ij") if len(axes) > 1 else []
    inner_w = np.ones(())
    for w in weights[1:]:
        inner_w = np.multiply.outer(inner_w, w)
    for start in range(0, len(axes[0]), step):
        x0 = axes[0][start:start + step]
        env = dict(env0)
        env[chart.coords[0]] = x0.reshape((-1,) + (1,) * (len(axes) - 1))
        for name, g in zip(chart.coords[1:], inner_grids):
            env[name] = g[np.newaxis, ...]
        vals = np.broadcast_to(evaluate(coef, env), (len(x0),) + inner_w.shape)
        w = np.multiply.outer(weights[0][start:start + step], inner_w)
        partials.append(float(np.sum(vals * w)))
    return math.fsum(partials)


def integrate_top_form(
    M: ManifoldModel,
    w: DiffForm,
    order: int | None = None,
    bindings: Mapping[str, float] | None = None,
) -> float:
    """Integral of an m-form over M as the sum over quadrature charts."""
    ds = w.degrees()
    if ds and ds != (M.dim,):
        raise DegreeError(f"integrand must be an {M.dim}-form, got degrees {ds}")
    top = tuple(range(M.dim))
    total = []
    for chart in M.quadrature_charts:
        if w.data and chart.id not in w.data:
            raise KeyError(f"form has no data on quadrature chart {chart.id!r}")
        coef = w.coeffs(chart.id).get(top)
        if coef is None:
            continue
        total.append(chart.orientation * _integrate_chart(coef, chart, order or chart.quad_order, bindings))
    return math.fsum(total)


def sample_points(chart: Chart, n: int, rng: np.random.Generator, box=None) -> Dict[str, np.ndarray]:
    box = box if box is not None else chart.box
    if box is None:
        raise ValueError(f"chart {chart.id} has no sampling box")
    return {x: rng.uniform(lo, hi, size=n) for x, (lo, hi) in zip(chart.coords, box)}


def jacobian(M: ManifoldModel, t: Transition) -> List[List[Expr]]:
    """``J[b][a] = d target_b / d source_a`` in source coordinates."""
    src = M.chart(t.source).coords
    return [[partial(f, x) for x in src] for f in t.coord_map]


def _det_expr(m):
    from .exterior import _det

    return _det(m)


def transition_consistency_check(
    M: ManifoldModel,
    obj,
    samples: int = 64,
    seed: int = 0,
    frame_maps: Mapping[Tuple[str, str], Sequence[Sequence[Expr]]] | None = None,
    twisted: bool = False,
    bindings: Mapping[str, float] | None = None,
) -> Dict[str, float]:
    """Max residual of ``obj`` across declared chart transitions.

    ``obj`` may be a dict chart -> Expr (function), a :class:`VectorField`,
    a :class:`DiffForm`, or an alternating object over an algebroid frame,
    in which case ``frame_maps[(src, tgt)]`` gives the matrix ``G`` with
    ``e_src_a = sum_b G[b][a] e_tgt_b``.  Twisted objects pick up the
    factor ``det G / det J`` of the frame-times-volume trivialisation.
    Transitions involving a chart the object does not cover are skipped.
    """
    rng = np.random.default_rng(seed)
    report: Dict[str, float] = {}
    for t in M.transitions:
        if isinstance(obj, dict):
            present = t.source in obj and t.target in obj
        else:
            present = t.source in obj.data and t.target in obj.data
        if not present:
            continue
        src = M.chart(t.source).coords
        tgt = M.chart(t.target).coords
        to_src = dict(zip(tgt, t.coord_map))
        env = dict(bindings or {})
        env.update({x: rng.uniform(lo, hi, size=samples) for x, (lo, hi) in zip(src, t.region)})
        J = jacobian(M, t)
        if isinstance(obj, dict):
            diffs = [evaluate(obj[t.source], env) - evaluate(substitute(obj[t.target], to_src), env)]
        elif isinstance(obj, VectorField):
            vs = obj.data[t.source]
            vt = obj.data[t.target]
            diffs = []
            for b in range(len(tgt)):
                pushed = add(*(mul(J[b][a], vs[a]) for a in range(len(src))))
                diffs.append(evaluate(pushed, env) - evaluate(substitute(vt[b], to_src), env))
        else:
            g = J if frame_maps is None else frame_maps[(t.source, t.target)]
            pulled = {k: substitute(v, to_src) for k, v in obj.coeffs(t.target).items()}
            expected = c_transform(pulled, g)
            if twisted:
                factor = _det_expr(J) / _det_expr(g)
                expected = {k: mul(factor, v) for k, v in expected.items()}
            keys = set(expected) | set(obj.coeffs(t.source))
            diffs = []
            for k in keys:
                a = obj.coeffs(t.source).get(k)
                b = expected.get(k)
                va = evaluate(a, env) if a is not None else 0.0
                vb = evaluate(b, env) if b is not None else 0.0
                diffs.append(np.asarray(va) - np.asarray(vb))
        res = max((float(np.max(np.abs(d))) for d in diffs), default=0.0)
        report[f"{t.source}->{t.target}"] = res
    return report
