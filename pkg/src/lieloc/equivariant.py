"""Lie algebra actions on algebroids and the equivariant complexes.

An action is recorded by the sections ``b_a = b(eps_a)``.  Equivariant
cochains are finite sums ``P_j (x) beta_j`` where ``P_j`` is a polynomial in
the parameter symbols (coordinates of xi on the basis of g) and ``beta_j``
is an ordinary or twisted cochain.  Evaluation at a numeric xi collapses
them to a (mixed-degree) cochain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .algebroid import ACochain, AlgebroidModel, ASection, anchor_of, bracket, delta
from .exterior import Alternating, c_contract
from .expr import Add, Const, Div, Expr, Mul, Pow, Symbol, as_expr, evaluate, mul
from .geometry import DiffForm, VectorField, exterior_derivative, sample_points
from .twisted import TwistedCochain, delta_twisted, p_map

__all__ = [
    "LieAlgebraAction",
    "EquivCochain",
    "EquivTwistedCochain",
    "check_action",
    "polynomial_degree",
    "delta_g",
    "delta_g_poly",
    "delta_g_twisted",
    "membership_check_AG",
    "equivariant_deRham_d",
    "p_identity_check",
    "fundamental_field",
    "b_of",
    "p_lenient",
]


@dataclass
class LieAlgebraAction:
    """Infinitesimal action of g on A.

    ``b[chart][a]`` lists the frame components of ``b(eps_a)``;
    ``structure_constants[(a, b)][c] = f^c_ab``.  ``params`` names the
    coordinates of xi.  ``fundamental`` optionally declares the fundamental
    vector fields independently, so that ``a(b(eps_a)) = eps_a*`` can be
    checked.
    """

    algebroid: AlgebroidModel
    dim: int
    b: Dict[str, List[List[Expr]]]
    structure_constants: Dict[Tuple[int, int], Dict[int, float]] = field(default_factory=dict)
    params: Tuple[str, ...] = ()
    fundamental: Dict[str, List[List[Expr]]] | None = None

    def __post_init__(self):
        if not self.params:
            self.params = tuple(f"x{i + 1}" for i in range(self.dim))
        if len(self.params) != self.dim:
            raise ValueError("one parameter symbol per generator of g is required")
        from .algebroid import _normalise_structure

        self.structure_constants = {
            k: {g: float(evaluate(v, {})) for g, v in row.items()}
            for k, row in _normalise_structure(self.structure_constants, self.dim).items()
        }
        r = self.algebroid.rank
        self.b = {ch: [[as_expr(v) for v in col] for col in cols] for ch, cols in self.b.items()}
        for ch, cols in self.b.items():
            if len(cols) != self.dim or any(len(c) != r for c in cols):
                raise ValueError(f"b on chart {ch} must list {self.dim} sections of rank {r}")

    def generator(self, a: int) -> ASection:
        return ASection(self.algebroid.rank, {ch: cols[a] for ch, cols in self.b.items()})

    def xi_vector(self, xi) -> np.ndarray:
        if isinstance(xi, Mapping):
            return np.array([float(xi[p]) for p in self.params])
        v = np.atleast_1d(np.asarray(xi, dtype=float))
        if v.shape != (self.dim,):
            raise ValueError(f"xi must have {self.dim} components")
        return v

    def bindings(self, xi) -> Dict[str, float]:
        return dict(zip(self.params, self.xi_vector(xi)))


def b_of(action: LieAlgebraAction, xi) -> ASection:
    """``b(xi)`` for numeric xi."""
    v = action.xi_vector(xi)
    r = action.algebroid.rank
    out = {}
    for ch, cols in action.b.items():
        out[ch] = [_lin([(v[a], cols[a][al]) for a in range(action.dim)]) for al in range(r)]
    return ASection(r, out)


def _lin(pairs) -> Expr:
    from .expr import add

    return add(*(mul(float(c), e) for c, e in pairs if c != 0.0))


def fundamental_field(action: LieAlgebraAction, xi) -> VectorField:
    """``xi* = a(b(xi))``."""
    return anchor_of(action.algebroid, b_of(action, xi))


def check_action(action: LieAlgebraAction, samples: int = 200, seed: int = 0) -> Dict[str, float]:
    """Residuals of ``{b_a, b_b} - f^c_ab b_c`` and of the declared
    fundamental fields against ``a(b_a)``."""
    A = action.algebroid
    rng = np.random.default_rng(seed)
    rep = {"lie_map": 0.0, "fundamental": 0.0}
    gens = [action.generator(a) for a in range(action.dim)]
    for ch in action.b:
        chart = A.manifold.chart(ch)
        env = sample_points(chart, samples, rng) if chart.dim else {}
        worst = 0.0
        for a in range(action.dim):
            for bb in range(a + 1, action.dim):
                br = bracket(A, gens[a], gens[bb]).data[ch]
                f = action.structure_constants.get((a, bb), {})
                for al in range(A.rank):
                    expected = _lin([(float(v), action.b[ch][c][al]) for c, v in f.items()])
                    worst = max(worst, _maxabs(br[al], env, minus=expected))
        rep[f"lie_map[{ch}]"] = worst
        rep["lie_map"] = max(rep["lie_map"], worst)
        if action.fundamental is not None and ch in action.fundamental:
            fw = 0.0
            for a in range(action.dim):
                pushed = anchor_of(A, gens[a]).data[ch]
                for i, comp in enumerate(action.fundamental[ch][a]):
                    fw = max(fw, _maxabs(pushed[i], env, minus=as_expr(comp)))
            rep[f"fundamental[{ch}]"] = fw
            rep["fundamental"] = max(rep["fundamental"], fw)
    return rep


def _maxabs(e: Expr, env, minus: Expr | None = None) -> float:
    v = np.asarray(evaluate(e, env), dtype=float)
    if minus is not None:
        v = v - np.asarray(evaluate(minus, env), dtype=float)
    return float(np.max(np.abs(v))) if v.size else 0.0


# polynomials in the parameters ------------------------------------------


def polynomial_degree(e: Expr, params: Sequence[str]) -> int:
    """Degree of a homogeneous polynomial in ``params`` whose coefficients
    are constants; raises ``ValueError`` otherwise."""
    params = set(params)

    def deg(x: Expr) -> int:
        if isinstance(x, Const):
            return 0
        if isinstance(x, Symbol):
            if x.name not in params:
                raise ValueError(f"polynomial part may only use parameter symbols, got {x.name!r}")
            return 1
        if isinstance(x, Mul):
            return sum(deg(f) for f in x.factors)
        if isinstance(x, Pow):
            if x.exponent < 0:
                raise ValueError("negative power in a polynomial")
            return x.exponent * deg(x.base)
        if isinstance(x, Add):
            ds = {deg(t) for t in x.terms if not isinstance(t, Const) or t.value != 0.0}
            if len(ds) > 1:
                raise ValueError("polynomial part must be homogeneous")
            return ds.pop() if ds else 0
        if isinstance(x, Div) and isinstance(x.den, Const):
            return deg(x.num)
        raise ValueError(f"not a polynomial: {x}")

    return deg(e)


class EquivCochain:
    """``sum_j P_j (x) beta_j`` with ``P_j`` polynomial in the parameters."""

    coefficient_type = ACochain

    def __init__(self, action: LieAlgebraAction, terms: Sequence[Tuple[object, Alternating]]):
        self.action = action
        self.terms: List[Tuple[Expr, Alternating]] = []
        for P, beta in terms:
            P = as_expr(P)
            polynomial_degree(P, action.params)
            if not isinstance(beta, self.coefficient_type):
                beta = self.coefficient_type(beta.dim, {})._like(beta.data)
            self.terms.append((P, beta))

    def degrees(self) -> Tuple[int, ...]:
        """Equivariant degrees ``2 deg P + deg beta`` of the nonzero terms."""
        out = set()
        for P, beta in self.terms:
            p = polynomial_degree(P, self.action.params)
            out.update(2 * p + k for k in beta.degrees())
        return tuple(sorted(out))

    @property
    def degree(self) -> int | None:
        ds = self.degrees()
        if not ds:
            return None
        if len(ds) > 1:
            raise ValueError(f"inhomogeneous equivariant cochain (degrees {ds})")
        return ds[0]

    def __call__(self, xi) -> Alternating:
        """Evaluate at numeric xi."""
        env = self.action.bindings(xi)
        r = self.action.algebroid.rank
        out = self.coefficient_type(r, {})
        for P, beta in self.terms:
            w = float(evaluate(P, env))
            if w != 0.0:
                out = out + beta.scale(w)
        return out

    def __add__(self, other):
        return type(self)(self.action, self.terms + other.terms)

    def is_zero(self) -> bool:
        return all(beta.is_zero() for _, beta in self.terms)


class EquivTwistedCochain(EquivCochain):
    coefficient_type = TwistedCochain


# differentials ------------------------------------------------------------


def _contract(s: ASection, c: Alternating) -> Alternating:
    return c._like({ch: c_contract(s.data[ch], co) for ch, co in c.data.items() if ch in s.data})


def _drop_top(c: Alternating, r: int) -> Alternating:
    return c._like({ch: {i: v for i, v in co.items() if len(i) < r} for ch, co in c.data.items()})


def delta_g(action: LieAlgebraAction, gamma, xi) -> ACochain:
    """``delta(gamma(xi)) - i_{b(xi)} gamma(xi)``."""
    A = action.algebroid
    g = gamma(xi) if isinstance(gamma, EquivCochain) else gamma
    low = _drop_top(g, A.rank)
    out = delta(A, low) if not low.is_zero() else g._like({ch: {} for ch in g.data})
    return out - _contract(b_of(action, xi), g)


def delta_g_poly(action: LieAlgebraAction, gamma: EquivCochain) -> EquivCochain:
    """Polynomial form: ``P (x) delta beta - sum_a (P x_a) (x) i_{b_a} beta``."""
    A = action.algebroid
    twisted = isinstance(gamma, EquivTwistedCochain)
    d = delta_twisted if twisted else delta
    terms = []
    for P, beta in gamma.terms:
        low = _drop_top(beta, A.rank)
        if not low.is_zero():
            terms.append((P, d(A, low)))
        for a in range(action.dim):
            terms.append((mul(P, Symbol(action.params[a])), _contract(action.generator(a), beta).scale(-1.0)))
    return type(gamma)(action, terms)


def delta_g_twisted(action: LieAlgebraAction, gamma, xi) -> TwistedCochain:
    """``delta~(gamma(xi)) - i_{b(xi)} gamma(xi)`` on twisted coefficients."""
    A = action.algebroid
    g = gamma(xi) if isinstance(gamma, EquivCochain) else gamma
    if not isinstance(g, TwistedCochain):
        g = TwistedCochain(g.dim, {})._like(g.data)
    low = _drop_top(g, A.rank)
    out = delta_twisted(A, low) if not low.is_zero() else g._like({ch: {} for ch in g.data})
    return out - _contract(b_of(action, xi), g)


def _sample_residual(A: AlgebroidModel, obj: Alternating, samples: int, rng, charts=None) -> float:
    worst = 0.0
    for ch, co in obj.data.items():
        if charts is not None and ch not in charts:
            continue
        chart = A.manifold.chart(ch)
        env = sample_points(chart, samples, rng) if chart.dim else {}
        for v in co.values():
            worst = max(worst, _maxabs(v, env))
    return worst


def membership_check_AG(
    action: LieAlgebraAction, gamma, n_xi: int = 3, samples: int = 200, seed: int = 0, twisted: bool | None = None
) -> float:
    """Max of ``|delta_g^2 gamma(xi)|`` over random xi and sample points."""
    rng = np.random.default_rng(seed)
    if twisted is None:
        twisted = isinstance(gamma, EquivTwistedCochain)
    step = delta_g_twisted if twisted else delta_g
    worst = 0.0
    for _ in range(n_xi):
        xi = rng.normal(size=action.dim)
        once = step(action, gamma, xi)
        twice = step(action, once, xi)
        worst = max(worst, _sample_residual(action.algebroid, twice, samples, rng))
    return worst


def equivariant_deRham_d(action: LieAlgebraAction, omega, xi, sign: int = -1) -> DiffForm:
    """``d + sign * i_{xi*}`` on an (evaluated) mixed-degree form.

    The default ``sign=-1`` is the Cartan-model differential that the anchor
    pullback intertwines with ``delta_g``.  Through the map p the twisted
    complex is intertwined with ``sign=+1`` instead (see
    :func:`p_identity_check`).
    """
    A = action.algebroid
    M = A.manifold
    w = omega(xi) if callable(omega) and not isinstance(omega, Alternating) else omega
    m = M.dim
    low = w._like({ch: {i: v for i, v in co.items() if len(i) < m} for ch, co in w.data.items()})
    d = exterior_derivative(M, low) if not low.is_zero() else DiffForm(m, {ch: {} for ch in w.data})
    X = fundamental_field(action, xi)
    contr = DiffForm(m, {})._like({ch: c_contract(X.data[ch], co) for ch, co in w.data.items() if ch in X.data})
    return d + contr.scale(float(sign))


def p_lenient(A: AlgebroidModel, c: Alternating) -> DiffForm:
    """p with the parts below degree ``r - m`` (which p cannot see) dropped."""
    low = A.rank - A.manifold.dim
    keep = c._like({ch: {i: v for i, v in co.items() if len(i) >= low} for ch, co in c.data.items()})
    if keep.is_zero():
        return DiffForm(A.manifold.dim, {ch: {} for ch in c.data})
    return p_map(A, keep)


def p_identity_check(
    action: LieAlgebraAction, gamma, xi, samples: int = 200, seed: int = 0, charts=None
) -> float:
    """Max pointwise residual of ``p(delta~_g gamma) - (-1)^k (d + i_{xi*}) p(gamma)``.

    ``k`` is the equivariant degree of ``gamma`` (only its parity matters).
    """
    A = action.algebroid
    if isinstance(gamma, EquivCochain):
        if gamma.is_zero():
            return 0.0
        k = gamma.degree
        g = gamma(xi)
    else:
        g = gamma
        ds = {d % 2 for d in g.degrees()}
        if not ds:
            return 0.0
        if len(ds) > 1:
            raise ValueError("mixed parity cochain")
        k = ds.pop()
    lhs = p_lenient(A, delta_g_twisted(action, g, xi))
    pg = p_lenient(A, g)
    rhs = equivariant_deRham_d(action, pg, xi, sign=+1)
    diff = lhs - rhs.scale((-1.0) ** k)
    return _sample_residual(A, diff, samples, np.random.default_rng(seed), charts)
