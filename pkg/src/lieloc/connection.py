"""A-connections through their local connection 1-sections.

A connection on a rank-n bundle E is stored per chart as ``omega[chart][alpha]``,
an n x n matrix of expressions, so that on components

    (nabla_alpha s)^p = a(e_alpha)(s^p) + omega_alpha^p_q s^q .

Matrix-valued cochains are kept as n x n nested lists of coefficient dicts
(see :mod:`lieloc.exterior`); products are wedge products composed with
matrix multiplication.

Invariant polynomials are polynomials in the elementary invariants
``sigma_i`` (the coefficients of ``det(t + X)``), computed from trace powers
by Newton's identities.  With this wedge normalisation the permutation sum
over ``2l`` slots is ``2^l`` times the value returned here.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from types import SimpleNamespace
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .algebroid import ACochain, AlgebroidModel, ASection, _inverse, anchor_pullback
from .equivariant import LieAlgebraAction, b_of, fundamental_field
from .exterior import Coeffs, c_add, c_cartan, c_clean, c_contract, c_scale, c_wedge
from .expr import ZERO, Expr, add, as_expr, evaluate, mul, neg, partial
from .geometry import DegreeError, DiffForm, ManifoldModel, exterior_derivative, sample_points, wedge_forms

__all__ = [
    "MatrixCochain",
    "AConnectionModel",
    "EquivCurvature",
    "InvariantPoly",
    "ConnectionError",
    "levi_civita",
    "from_ordinary_connection",
    "covariant_derivative",
    "curvature",
    "exterior_A_derivative",
    "bianchi_residual",
    "lift_matrix",
    "equivariance_residual",
    "moment_map",
    "equivariant_curvature",
    "equivariant_bianchi_residual",
    "moment_map_residual",
    "invariant_of",
    "chern_weil",
    "transgression",
    "transgression_residual",
    "ordinary_curvature",
    "ordinary_chern_weil",
    "diagram_residual",
    "fixed_point_invariants",
    "sample_max",
    "connection_from_spec",
    "killing_residual",
]

Matrix = List[List[Expr]]


class ConnectionError(ValueError):
    pass


# matrix-valued cochains --------------------------------------------------


class MatrixCochain:
    """n x n matrix of alternating coefficient dicts on each chart."""

    __slots__ = ("dim", "n", "data")

    def __init__(self, dim: int, n: int, data: Mapping[str, Sequence[Sequence[Mapping]]]):
        self.dim = dim
        self.n = n
        self.data: Dict[str, List[List[Coeffs]]] = {
            ch: [[c_clean({tuple(k): as_expr(v) for k, v in e.items()}) for e in row] for row in rows]
            for ch, rows in data.items()
        }

    @classmethod
    def zero(cls, dim, n, charts):
        return cls(dim, n, {ch: [[{} for _ in range(n)] for _ in range(n)] for ch in charts})

    @classmethod
    def functions(cls, dim, data: Mapping[str, Matrix]):
        """Degree-0 matrix cochain from a matrix of functions per chart."""
        n = len(next(iter(data.values()))) if data else 0
        return cls(dim, n, {ch: [[{(): e} for e in row] for row in m] for ch, m in data.items()})

    @property
    def charts(self):
        return tuple(self.data)

    def _map(self, fn):
        out = object.__new__(MatrixCochain)
        out.dim, out.n = self.dim, self.n
        out.data = {ch: [[fn(e) for e in row] for row in rows] for ch, rows in self.data.items()}
        return out

    def _zip(self, other, fn):
        if (self.dim, self.n) != (other.dim, other.n):
            raise ValueError("matrix cochain shapes differ")
        out = object.__new__(MatrixCochain)
        out.dim, out.n = self.dim, self.n
        out.data = {
            ch: [[fn(a, b) for a, b in zip(ra, rb)] for ra, rb in zip(rows, other.data[ch])]
            for ch, rows in self.data.items()
            if ch in other.data
        }
        return out

    def __add__(self, other):
        return self._zip(other, lambda a, b: c_add(a, b))

    def __sub__(self, other):
        return self._zip(other, lambda a, b: c_add(a, c_scale(b, -1.0)))

    def scale(self, s):
        return self._map(lambda e: c_scale(e, s))

    def part(self, k: int):
        return self._map(lambda e: {i: v for i, v in e.items() if len(i) == k})

    def degrees(self):
        return tuple(sorted({len(i) for rows in self.data.values() for row in rows for e in row for i in e}))

    def is_zero(self):
        return all(not e for rows in self.data.values() for row in rows for e in row)

    def entry(self, chart: str, p: int, q: int) -> Coeffs:
        return self.data[chart][p][q]

    def __repr__(self):
        return f"MatrixCochain(dim={self.dim}, n={self.n}, charts={list(self.data)})"


def _mm(X: List[List[Coeffs]], Y: List[List[Coeffs]]) -> List[List[Coeffs]]:
    n = len(X)
    return [[c_add(*(c_wedge(X[p][k], Y[k][q]) for k in range(n))) for q in range(n)] for p in range(n)]


def mwedge(X: MatrixCochain, Y: MatrixCochain) -> MatrixCochain:
    out = MatrixCochain.zero(X.dim, X.n, ())
    out.data = {ch: _mm(X.data[ch], Y.data[ch]) for ch in X.data if ch in Y.data}
    return out


def graded_commutator(X: MatrixCochain, Y: MatrixCochain) -> MatrixCochain:
    """``[X, Y] = X ^ Y - (-1)^{|X||Y|} Y ^ X`` part by part."""
    total = MatrixCochain.zero(X.dim, X.n, [c for c in X.data if c in Y.data])
    for dx in X.degrees():
        Xp = X.part(dx)
        for dy in Y.degrees():
            Yp = Y.part(dy)
            sign = -1.0 if (dx * dy) % 2 == 0 else 1.0
            total = total + mwedge(Xp, Yp) + mwedge(Yp, Xp).scale(sign)
    return total


def mdelta(A: AlgebroidModel, X: MatrixCochain) -> MatrixCochain:
    """The algebroid differential applied entrywise."""
    out = MatrixCochain.zero(X.dim, X.n, ())
    out.data = {
        ch: [[c_cartan(e, A.rank, A.coords(ch), A.anchor[ch], A.structure[ch]) for e in row] for row in rows]
        for ch, rows in X.data.items()
    }
    return out


def mcontract(s: ASection, X: MatrixCochain) -> MatrixCochain:
    out = MatrixCochain.zero(X.dim, X.n, ())
    out.data = {ch: [[c_contract(s.data[ch], e) for e in row] for row in rows] for ch, rows in X.data.items() if ch in s.data}
    return out


def sample_max(M: ManifoldModel, obj, samples: int = 100, seed: int = 0, charts=None) -> float:
    """Largest absolute coefficient of a (matrix) cochain at random chart points."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for ch in obj.data:
        if charts is not None and ch not in charts:
            continue
        chart = M.chart(ch)
        env = sample_points(chart, samples, rng) if chart.dim else {}
        if isinstance(obj, MatrixCochain):
            values = [v for row in obj.data[ch] for e in row for v in e.values()]
        else:
            values = list(obj.data[ch].values())
        for v in values:
            if v.is_zero:
                continue
            arr = np.asarray(evaluate(v, env), dtype=float)
            worst = max(worst, float(np.max(np.abs(arr))))
    return worst


# connections -------------------------------------------------------------


@dataclass
class AConnectionModel:
    """Local connection 1-sections ``omega[chart][alpha]`` (n x n each).

    ``fibre`` says how the action lifts to E: ``"A"`` (E is the algebroid
    itself, lifted by the bracket), ``"TM"`` (E is the tangent bundle,
    lifted by the Lie derivative along the fundamental field) or
    ``"custom"`` with ``lift[chart][a]`` giving the n x n lift matrix of
    generator ``a``.
    """

    algebroid: AlgebroidModel
    n: int
    omega: Dict[str, List[Matrix]]
    fibre: str = "A"
    lift: Dict[str, List[Matrix]] | None = None
    name: str = ""

    def __post_init__(self):
        r = self.algebroid.rank
        self.omega = {
            ch: [[[as_expr(v) for v in row] for row in mat] for mat in mats] for ch, mats in self.omega.items()
        }
        for ch, mats in self.omega.items():
            if ch not in self.algebroid.anchor:
                raise ConnectionError(f"connection given on unknown chart {ch}")
            if len(mats) != r or any(len(m) != self.n or any(len(row) != self.n for row in m) for m in mats):
                raise ConnectionError(f"connection on chart {ch} needs {r} matrices of size {self.n}")
        if self.fibre not in ("A", "TM", "custom"):
            raise ConnectionError(f"unknown fibre kind {self.fibre!r}")
        if self.fibre == "A" and self.n != r:
            raise ConnectionError("a connection on A needs fibre dimension equal to the rank")
        if self.fibre == "TM" and self.n != self.algebroid.manifold.dim:
            raise ConnectionError("a connection on TM needs fibre dimension equal to dim M")

    @property
    def charts(self):
        return tuple(self.omega)

    def one_section(self) -> MatrixCochain:
        r = self.algebroid.rank
        data = {
            ch: [[{(a,): mats[a][p][q] for a in range(r)} for q in range(self.n)] for p in range(self.n)]
            for ch, mats in self.omega.items()
        }
        return MatrixCochain(r, self.n, data)

    def on(self, section: ASection, chart: str) -> Matrix:
        """``omega(s)`` as a matrix of functions."""
        mats = self.omega[chart]
        s = section.data[chart]
        return [
            [add(*(mul(s[a], mats[a][p][q]) for a in range(len(mats)) if not s[a].is_zero)) for q in range(self.n)]
            for p in range(self.n)
        ]


def _metric_inverse(g: Matrix) -> Matrix:
    n = len(g)
    if all(g[i][j].is_zero for i in range(n) for j in range(n) if i != j):
        return [[(as_expr(1.0) / g[i][i]) if i == j else ZERO for j in range(n)] for i in range(n)]
    return _inverse(g)


def levi_civita(M: ManifoldModel, metric: Mapping[str, Matrix]) -> Dict[str, List[Matrix]]:
    """Christoffel symbols as an ordinary connection on TM:
    ``zeta[chart][i][p][q] = Gamma^p_{iq}``."""
    out = {}
    for ch, g in metric.items():
        g = [[as_expr(v) for v in row] for row in g]
        xs = M.chart(ch).coords
        m = len(xs)
        ginv = _metric_inverse(g)
        dg = [[[partial(g[a][b], x) for x in xs] for b in range(m)] for a in range(m)]  # dg[a][b][i] = d_i g_ab
        lower = [
            [[mul(0.5, add(dg[s][q][i], dg[s][i][q], neg(dg[i][q][s]))) for q in range(m)] for i in range(m)]
            for s in range(m)
        ]  # lower[s][i][q] = Gamma_{s i q}
        out[ch] = [
            [[add(*(mul(ginv[p][s], lower[s][i][q]) for s in range(m) if not ginv[p][s].is_zero)) for q in range(m)] for p in range(m)]
            for i in range(m)
        ]
    return out


def from_ordinary_connection(A: AlgebroidModel, ordinary: Mapping[str, List[Matrix]], fibre: str = "TM", name="") -> AConnectionModel:
    """``omega_alpha = sum_i a^i_alpha zeta_i``."""
    omega = {}
    for ch, zeta in ordinary.items():
        if ch not in A.anchor:
            continue
        n = len(zeta[0]) if zeta else 0
        cols = A.anchor[ch]
        omega[ch] = [
            [
                [add(*(mul(cols[a][i], as_expr(zeta[i][p][q])) for i in range(len(zeta)) if not cols[a][i].is_zero)) for q in range(n)]
                for p in range(n)
            ]
            for a in range(A.rank)
        ]
    n = len(next(iter(ordinary.values()))[0]) if ordinary else 0
    if fibre == "TM" and A.kind == "tangent":
        fibre = "A"
    return AConnectionModel(A, n, omega, fibre=fibre, name=name)


def covariant_derivative(conn: AConnectionModel, alpha: ASection, s: Mapping[str, Sequence[object]]) -> Dict[str, List[Expr]]:
    """``nabla_alpha s = a(alpha)(s) + omega(alpha) s`` componentwise."""
    A = conn.algebroid
    out = {}
    for ch, comps in s.items():
        comps = [as_expr(v) for v in comps]
        al = alpha.data[ch]
        w = conn.on(alpha, ch)
        out[ch] = [
            add(
                *(mul(al[a], A.apply_anchor(ch, a, comps[p])) for a in range(A.rank) if not al[a].is_zero),
                *(mul(w[p][q], comps[q]) for q in range(conn.n)),
            )
            for p in range(conn.n)
        ]
    return out


def curvature(conn: AConnectionModel) -> MatrixCochain:
    """``R = delta omega + omega ^ omega`` (the second term is half of [omega, omega])."""
    w = conn.one_section()
    return mdelta(conn.algebroid, w) + mwedge(w, w)


def exterior_A_derivative(conn: AConnectionModel, chi: MatrixCochain) -> MatrixCochain:
    """Local form ``delta chi + [omega, chi]`` for End(E)-valued cochains."""
    return mdelta(conn.algebroid, chi) + graded_commutator(conn.one_section(), chi)


def bianchi_residual(conn: AConnectionModel, samples: int = 100, seed: int = 0) -> float:
    R = curvature(conn)
    return sample_max(conn.algebroid.manifold, exterior_A_derivative(conn, R), samples, seed)


# action and moment map -----------------------------------------------------


def lift_matrix(conn: AConnectionModel, action: LieAlgebraAction, xi, chart: str) -> Matrix:
    """Matrix part ``Theta`` of the lifted action ``L_xi s = xi*(s) + Theta s``."""
    A = conn.algebroid
    if conn.fibre == "custom":
        if not conn.lift or chart not in conn.lift:
            raise ConnectionError(f"no lift given on chart {chart}")
        v = action.xi_vector(xi)
        mats = conn.lift[chart]
        return [
            [add(*(mul(float(v[a]), as_expr(mats[a][p][q])) for a in range(action.dim) if v[a] != 0.0)) for q in range(conn.n)]
            for p in range(conn.n)
        ]
    if conn.fibre == "TM":
        X = fundamental_field(action, xi).data[chart]
        xs = A.coords(chart)
        return [[neg(partial(X[p], xs[q])) for q in range(conn.n)] for p in range(conn.n)]
    # bracket lift {b, s}: Theta^g_beta = sum_a b^a c^g_{a beta} - a_beta(b^g)
    b = b_of(action, xi).data[chart]
    r = A.rank
    rows: List[List[list]] = [[[] for _ in range(r)] for _ in range(r)]
    for beta in range(r):
        for a in range(r):
            if b[a].is_zero:
                continue
            for g, v in A.c(chart, a, beta).items():
                rows[g][beta].append(mul(b[a], v))
        for g in range(r):
            rows[g][beta].append(neg(A.apply_anchor(chart, beta, b[g])))
    return [[add(*rows[g][beta]) for beta in range(r)] for g in range(r)]


def _matmul(X: Matrix, Y: Matrix) -> Matrix:
    n = len(X)
    return [[add(*(mul(X[p][k], Y[k][q]) for k in range(n))) for q in range(n)] for p in range(n)]


def equivariance_residual(conn: AConnectionModel, action: LieAlgebraAction, xi, samples: int = 100, seed: int = 0) -> float:
    """Max of ``[L_xi, nabla_alpha] - nabla_{b(xi), e_alpha}`` over alpha.

    The operator is function-linear; its matrix is
    ``xi*(omega_alpha) - a_alpha(Theta) + [Theta, omega_alpha] - omega({b, e_alpha})``.
    """
    A = conn.algebroid
    n = conn.n
    r = A.rank
    X = fundamental_field(action, xi)
    b = b_of(action, xi)
    data = {}
    for ch in conn.charts:
        xs = A.coords(ch)
        Th = lift_matrix(conn, action, xi, ch)
        bv = b.data[ch]
        rows = []
        for al in range(r):
            w = conn.omega[ch][al]
            br = [
                add(*(mul(bv[a], A.c(ch, a, al).get(g, ZERO)) for a in range(r)), neg(A.apply_anchor(ch, al, bv[g])))
                for g in range(r)
            ]
            wbr = [[add(*(mul(br[g], conn.omega[ch][g][p][q]) for g in range(r))) for q in range(n)] for p in range(n)]
            TW = _matmul(Th, w)
            WT = _matmul(w, Th)
            res = [
                [
                    add(
                        *(mul(X.data[ch][i], partial(w[p][q], xs[i])) for i in range(len(xs))),
                        neg(A.apply_anchor(ch, al, Th[p][q])),
                        TW[p][q],
                        neg(WT[p][q]),
                        neg(wbr[p][q]),
                    )
                    for q in range(n)
                ]
                for p in range(n)
            ]
            rows.append(res)
        data[ch] = [[{(al,): rows[al][p][q] for al in range(r)} for q in range(n)] for p in range(n)]
    return sample_max(A.manifold, MatrixCochain(r, n, data), samples, seed)


def moment_map(conn: AConnectionModel, action: LieAlgebraAction, xi) -> MatrixCochain:
    """``mu(xi) = Theta_xi - omega(b(xi))``, a degree-0 matrix cochain."""
    b = b_of(action, xi)
    data = {}
    for ch in conn.charts:
        Th = lift_matrix(conn, action, xi, ch)
        wb = conn.on(b, ch)
        data[ch] = [[add(Th[p][q], neg(wb[p][q])) for q in range(conn.n)] for p in range(conn.n)]
    return MatrixCochain.functions(conn.algebroid.rank, data)


@dataclass
class EquivCurvature:
    """``R^g(xi) = R + mu(xi)`` at a fixed xi."""

    curvature: MatrixCochain
    moment: MatrixCochain
    xi: Tuple[float, ...] = ()

    @property
    def total(self) -> MatrixCochain:
        return self.curvature + self.moment


def equivariant_curvature(
    conn: AConnectionModel, action: LieAlgebraAction, xi, check: bool = True, tol: float = 1e-8, samples: int = 50
) -> EquivCurvature:
    if check:
        res = equivariance_residual(conn, action, xi, samples=samples)
        if res > tol:
            raise ConnectionError(f"connection is not invariant under the action (residual {res:.3g})")
    return EquivCurvature(curvature(conn), moment_map(conn, action, xi), tuple(action.xi_vector(xi)))


def moment_map_residual(conn, action, xi, samples: int = 100, seed: int = 0) -> float:
    """``D_A mu - i_{b(xi)} R``."""
    mu = moment_map(conn, action, xi)
    R = curvature(conn)
    diff = exterior_A_derivative(conn, mu) - mcontract(b_of(action, xi), R)
    return sample_max(conn.algebroid.manifold, diff, samples, seed)


def equivariant_bianchi_residual(conn, action, xi, samples: int = 100, seed: int = 0) -> float:
    """``delta_g R^g + [omega, R^g]`` with ``delta_g = delta - i_{b(xi)}``."""
    Rg = equivariant_curvature(conn, action, xi, check=False).total
    w = conn.one_section()
    A = conn.algebroid
    out = mdelta(A, Rg) - mcontract(b_of(action, xi), Rg) + graded_commutator(w, Rg)
    return sample_max(A.manifold, out, samples, seed)


# invariant polynomials ---------------------------------------------------


@dataclass(frozen=True)
class InvariantPoly:
    """Polynomial in ``sigma_1 .. sigma_n``: ``terms[(e_1, .., e_k)] = coefficient``."""

    terms: Tuple[Tuple[Tuple[int, ...], Fraction], ...]

    @classmethod
    def from_dict(cls, d: Mapping[Tuple[int, ...], object]):
        clean = {}
        for e, c in d.items():
            e = tuple(int(x) for x in e)
            while e and e[-1] == 0:
                e = e[:-1]
            if any(x < 0 for x in e):
                raise ValueError("negative exponent")
            clean[e] = clean.get(e, Fraction(0)) + Fraction(c)
        return cls(tuple(sorted((e, c) for e, c in clean.items() if c != 0)))

    @classmethod
    def sigma(cls, i: int):
        if i < 0:
            raise ValueError("index must be nonnegative")
        return cls.from_dict({tuple([0] * (i - 1) + [1]) if i else (): 1})

    @classmethod
    def one(cls):
        return cls.from_dict({(): 1})

    def __mul__(self, other: "InvariantPoly"):
        out: Dict = {}
        for e1, c1 in self.terms:
            for e2, c2 in other.terms:
                k = max(len(e1), len(e2))
                e = tuple((e1[i] if i < len(e1) else 0) + (e2[i] if i < len(e2) else 0) for i in range(k))
                out[e] = out.get(e, 0) + c1 * c2
        return InvariantPoly.from_dict(out)

    def __add__(self, other: "InvariantPoly"):
        d = dict(self.terms)
        for e, c in other.terms:
            d[e] = d.get(e, 0) + c
        return InvariantPoly.from_dict(d)

    @property
    def max_index(self) -> int:
        return max((len(e) for e, _ in self.terms), default=0)

    @property
    def degrees(self) -> Tuple[int, ...]:
        return tuple(sorted({sum((i + 1) * x for i, x in enumerate(e)) for e, _ in self.terms}))

    @property
    def degree(self) -> int:
        ds = self.degrees
        if len(ds) > 1:
            raise ValueError("invariant polynomial is not homogeneous")
        return ds[0] if ds else 0

    def evaluate_numeric(self, sig: Sequence[float]) -> float:
        """Value for numeric ``sig[i] = sigma_i`` (``sig[0]`` is ignored)."""
        total = 0.0
        for e, c in self.terms:
            t = float(c)
            for i, x in enumerate(e):
                t *= float(sig[i + 1]) ** x
            total += t
        return total


def _one() -> Coeffs:
    return {(): as_expr(1.0)}


def _trace(X: List[List[Coeffs]]) -> Coeffs:
    return c_add(*(X[p][p] for p in range(len(X))))


def _truncate(c: Coeffs, top: int) -> Coeffs:
    return {i: v for i, v in c.items() if len(i) <= top}


def _sigmas(M: List[List[Coeffs]], k: int, a: List[List[Coeffs]] | None, top: int):
    """``sigma_0..sigma_k`` of an even matrix cochain ``M`` and, when ``a`` is
    given, their derivatives ``d/ds sigma_i(M + s a)`` at ``s = 0``."""
    powers = []  # M^j for j = 0..k-1
    n = len(M)
    ident = [[_one() if p == q else {} for q in range(n)] for p in range(n)]
    cur = ident
    for _ in range(k):
        powers.append(cur)
        cur = [[_truncate(e, top) for e in row] for row in _mm(cur, M)]
    traces = [None] + [_trace(_mm(powers[j - 1], M)) if j > 1 else _trace(M) for j in range(1, k + 1)]
    dtraces = [None]
    if a is not None:
        for j in range(1, k + 1):
            dtraces.append(c_scale(_trace(_mm(powers[j - 1], a)), float(j)))
    e = [_one()]
    de = [{}]
    for i in range(1, k + 1):
        acc, dacc = [], []
        for j in range(1, i + 1):
            s = 1.0 if j % 2 == 1 else -1.0
            acc.append(c_scale(c_wedge(e[i - j], traces[j]), s / i))
            if a is not None:
                dacc.append(c_scale(c_wedge(de[i - j], traces[j]), s / i))
                dacc.append(c_scale(c_wedge(e[i - j], dtraces[j]), s / i))
        e.append(_truncate(c_add(*acc), top))
        de.append(_truncate(c_add(*dacc), top) if a is not None else {})
    return e, de


def _poly_value(Q: InvariantPoly, e: List[Coeffs], de: List[Coeffs] | None, top: int):
    vals, dvals = [], []
    for expo, coef in Q.terms:
        factors = [e[i + 1] for i, x in enumerate(expo) for _ in range(x)]
        dfactors = [de[i + 1] for i, x in enumerate(expo) for _ in range(x)] if de is not None else []
        prod = _one()
        for f in factors:
            prod = _truncate(c_wedge(prod, f), top)
        vals.append(c_scale(prod, float(coef)))
        if de is not None:
            # product rule; the sigma_i are even so the order is immaterial
            for k in range(len(factors)):
                t = _one()
                for j, f in enumerate(factors):
                    t = _truncate(c_wedge(t, dfactors[j] if j == k else f), top)
                dvals.append(c_scale(t, float(coef)))
    return c_add(*vals), (c_add(*dvals) if de is not None else None)


def invariant_of(Q: InvariantPoly, M: MatrixCochain, charts=None) -> ACochain:
    """``Q(M)`` for an even (possibly mixed-degree) matrix cochain."""
    k = Q.max_index
    out = {}
    for ch, rows in M.data.items():
        if charts is not None and ch not in charts:
            continue
        e, _ = _sigmas(rows, k, None, M.dim)
        out[ch], _ = _poly_value(Q, e, None, M.dim)
    return ACochain(M.dim, out)


def chern_weil(conn: AConnectionModel, Q: InvariantPoly) -> ACochain:
    """``lambda_Q = Q(R)``, a ``2l``-cochain for Q homogeneous of degree l."""
    l = Q.degree
    if 2 * l > conn.algebroid.rank:
        raise DegreeError(f"degree {2 * l} exceeds the rank {conn.algebroid.rank}")
    return invariant_of(Q, curvature(conn))


def _gauss_legendre01(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _interpolate(c0: AConnectionModel, c1: AConnectionModel, t: float) -> AConnectionModel:
    omega = {
        ch: [
            [[add(mul(1.0 - t, c0.omega[ch][a][p][q]), mul(t, c1.omega[ch][a][p][q])) for q in range(c0.n)] for p in range(c0.n)]
            for a in range(c0.algebroid.rank)
        ]
        for ch in c0.charts
        if ch in c1.omega
    }
    return AConnectionModel(c0.algebroid, c0.n, omega, fibre=c0.fibre, lift=c0.lift, name=f"t={t:.6g}")


def transgression(
    connA: AConnectionModel, connB: AConnectionModel, Q: InvariantPoly, action: LieAlgebraAction, xi, order: int = 8
) -> ACochain:
    """``q = int_0^1 (d/ds) Q(R^g_t + s (omega_B - omega_A)) dt`` on the
    straight path, with Gauss-Legendre nodes in t."""
    if order < 1:
        raise ValueError("quadrature order must be positive")
    if connA.fibre != connB.fibre or connA.n != connB.n:
        raise ConnectionError("connections live on different bundles")
    diff = connB.one_section() - connA.one_section()
    k = Q.max_index
    top = connA.algebroid.rank
    ts, ws = _gauss_legendre01(order)
    out: Dict[str, List[Coeffs]] = {ch: [] for ch in diff.data}
    for t, w in zip(ts, ws):
        ct = _interpolate(connA, connB, float(t))
        Rg = equivariant_curvature(ct, action, xi, check=False).total
        for ch in out:
            e, de = _sigmas(Rg.data[ch], k, diff.data[ch], top)
            _, dq = _poly_value(Q, e, de, top)
            out[ch].append(c_scale(dq, float(w)))
    return ACochain(top, {ch: c_add(*parts) for ch, parts in out.items()})


def transgression_residual(connA, connB, Q, action, xi, order: int = 8, samples: int = 100, seed: int = 0) -> float:
    """``Q(R^g_B) - Q(R^g_A) - delta_g q`` at sample points."""
    from .equivariant import delta_g

    q = transgression(connA, connB, Q, action, xi, order)
    QA = invariant_of(Q, equivariant_curvature(connA, action, xi, check=False).total)
    QB = invariant_of(Q, equivariant_curvature(connB, action, xi, check=False).total)
    return sample_max(connA.algebroid.manifold, QB - QA - delta_g(action, q, xi), samples, seed)


# ordinary Chern-Weil forms and the comparison diagram ----------------------


def ordinary_curvature(M: ManifoldModel, zeta: Mapping[str, List[Matrix]]) -> List:
    """``d zeta + zeta ^ zeta`` via differential forms only."""
    m = M.dim
    out = {}
    for ch, comps in zeta.items():
        n = len(comps[0])
        forms = [[DiffForm(m, {ch: {(i,): comps[i][p][q] for i in range(m)}}) for q in range(n)] for p in range(n)]
        curv = []
        for p in range(n):
            row = []
            for q in range(n):
                acc = exterior_derivative(M, forms[p][q])
                for k in range(n):
                    acc = acc + wedge_forms(forms[p][k], forms[k][q])
                row.append(acc.coeffs(ch))
            curv.append(row)
        out[ch] = curv
    res = MatrixCochain.zero(m, len(next(iter(zeta.values()))[0]) if zeta else 0, ())
    res.data = out
    return res


def ordinary_chern_weil(M: ManifoldModel, zeta, Q: InvariantPoly) -> DiffForm:
    F = ordinary_curvature(M, zeta)
    return DiffForm(M.dim, {})._like(invariant_of(Q, F).data)


def diagram_residual(A: AlgebroidModel, zeta, Q: InvariantPoly, samples: int = 100, seed: int = 0) -> float:
    """``lambda_Q(a* zeta) - a*(ordinary Chern-Weil form of zeta)``."""
    conn = from_ordinary_connection(A, zeta)
    lam = chern_weil(conn, Q)
    pulled = anchor_pullback(A, ordinary_chern_weil(A.manifold, {ch: z for ch, z in zeta.items() if ch in A.anchor}, Q))
    return sample_max(A.manifold, lam - pulled, samples, seed)


def fixed_point_invariants(conn, action, xi, record, k: int | None = None) -> np.ndarray:
    """``sigma_i(R^g)`` degree-0 parts at a fixed point, ``i = 0..k``."""
    mu = moment_map(conn, action, xi)
    ch = record.chart
    chart = conn.algebroid.manifold.chart(ch)
    env = {x: np.array([v]) for x, v in zip(chart.coords, record.coords)}
    mat = np.array([[float(np.asarray(evaluate(mu.data[ch][p][q].get((), ZERO), env)).ravel()[0]) for q in range(conn.n)] for p in range(conn.n)])
    k = conn.n if k is None else k
    # sigma_i of the full R^g restricted to degree 0 only sees mu
    Rg = equivariant_curvature(conn, action, xi, check=False).total.part(0)
    e, _ = _sigmas(Rg.data[ch], k, None, 0)
    vals = [float(np.asarray(evaluate(c.get((), ZERO), env)).ravel()[0]) for c in e]
    return np.array(vals), mat


def connection_from_spec(spec) -> AConnectionModel:
    """The connection described by an example's ``connection`` block.

    Only ``kind: levi_civita`` (of the example's metric, pulled back through
    the anchor) is supported.
    """
    kind = (spec.connection or {}).get("kind")
    if kind is None:
        raise ConnectionError(f"example {spec.name!r} declares no connection")
    if kind != "levi_civita":
        raise ConnectionError(f"unsupported connection kind {kind!r}")
    if not spec.metric:
        raise ConnectionError("a Levi-Civita connection needs a metric block")
    A = spec.algebroid
    zeta = levi_civita(A.manifold, {ch: g for ch, g in spec.metric.items() if ch in A.anchor})
    return from_ordinary_connection(A, zeta, name=f"{spec.name}:levi_civita")


def killing_residual(M: ManifoldModel, metric: Mapping[str, Matrix], X, samples: int = 100, seed: int = 0) -> float:
    """``L_X g`` at sample points; zero when the flow of X is isometric."""
    data = {}
    for ch, g in metric.items():
        if ch not in X.data:
            continue
        xs = M.chart(ch).coords
        m = len(xs)
        g = [[as_expr(v) for v in row] for row in g]
        Xc = X.data[ch]
        entries = {}
        for i in range(m):
            for j in range(i, m):
                entries[(i, j)] = add(
                    *(mul(Xc[k], partial(g[i][j], xs[k])) for k in range(m)),
                    *(mul(g[k][j], partial(Xc[k], xs[i])) for k in range(m)),
                    *(mul(g[i][k], partial(Xc[k], xs[j])) for k in range(m)),
                )
        data[ch] = entries
    return sample_max(M, SimpleNamespace(data=data), samples, seed)
