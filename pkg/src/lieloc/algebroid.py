"""Lie algebroids on local frames and their cochain complex.

Each chart carries a local frame ``e_0 .. e_{r-1}`` of A, the anchor matrix
``a^i_alpha`` and structure functions ``c^gamma_{alpha beta}`` with
``{e_alpha, e_beta} = c^gamma_{alpha beta} e_gamma``.  Everything else (the
differential, contractions, Lie derivatives, pullbacks) is expressed in
those terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .exterior import (
    Alternating,
    Coeffs,
    c_add,
    c_cartan,
    c_contract,
    c_transform,
    c_wedge,
)
from .expr import ONE, ZERO, Expr, add, as_expr, evaluate, mul, neg, partial, sub
from .geometry import (
    Chart,
    DegreeError,
    DiffForm,
    ManifoldModel,
    QUADRATURE,
    EVALUATION,
    sample_points,
)

__all__ = [
    "AlgebroidModel",
    "AxiomError",
    "ASection",
    "ACochain",
    "AMultiSection",
    "build_algebroid",
    "tangent_algebroid",
    "poisson_cotangent_algebroid",
    "atiyah_trivial_bundle_algebroid",
    "lie_algebra_point_algebroid",
    "custom_algebroid",
    "point_manifold",
    "check_axioms",
    "delta",
    "wedge",
    "contract",
    "bracket",
    "lie_multisection",
    "anchor_pullback",
    "anchor_of",
    "induce_from_differential",
    "cochain_from_function",
]

Structure = Dict[Tuple[int, int], Dict[int, Expr]]


class AxiomError(ValueError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class AlgebroidModel:
    rank: int
    manifold: ManifoldModel
    anchor: Dict[str, List[List[Expr]]]  # anchor[chart][alpha][i]
    structure: Dict[str, Structure]  # structure[chart][(a, b)][gamma], a < b
    kind: str = "custom"
    frame_maps: Dict[Tuple[str, str], List[List[Expr]]] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        m = self.manifold.dim
        for ch, cols in self.anchor.items():
            if len(cols) != self.rank or any(len(c) != m for c in cols):
                raise ValueError(f"anchor on chart {ch} must be {self.rank} columns of length {m}")
        clean: Dict[str, Structure] = {}
        for ch, table in self.structure.items():
            clean[ch] = _normalise_structure(table, self.rank)
        self.structure = clean
        for ch in self.anchor:
            self.structure.setdefault(ch, {})

    @property
    def charts(self) -> Tuple[str, ...]:
        return tuple(self.anchor)

    def coords(self, chart: str) -> Tuple[str, ...]:
        return self.manifold.chart(chart).coords

    def c(self, chart: str, a: int, b: int) -> Dict[int, Expr]:
        """Bracket coefficients of ``{e_a, e_b}`` (any order)."""
        if a == b:
            return {}
        if a < b:
            return self.structure[chart].get((a, b), {})
        return {g: neg(v) for g, v in self.structure[chart].get((b, a), {}).items()}

    def apply_anchor(self, chart: str, alpha: int, f: Expr) -> Expr:
        """``a(e_alpha)(f)``."""
        col = self.anchor[chart][alpha]
        return add(*(mul(a, partial(f, x)) for a, x in zip(col, self.coords(chart)) if not a.is_zero))


def _normalise_structure(table, r) -> Structure:
    out: Structure = {}
    for (a, b), comps in table.items():
        if a == b:
            if any(not as_expr(v).is_zero for v in comps.values()):
                raise AxiomError("structure functions must be antisymmetric")
            continue
        sign = 1.0
        if a > b:
            a, b, sign = b, a, -1.0
        row = out.setdefault((a, b), {})
        for g, v in comps.items():
            if not 0 <= g < r:
                raise ValueError(f"structure index {g} out of range")
            v = as_expr(v)
            row[g] = add(row.get(g, ZERO), mul(sign, v))
    return {k: {g: v for g, v in row.items() if not v.is_zero} for k, row in out.items() if row}


class ASection:
    """Section of A: per-chart frame components ``s^alpha``."""

    __slots__ = ("rank", "data")

    def __init__(self, rank: int, data: Mapping[str, Sequence[object]]):
        self.rank = rank
        self.data = {}
        for ch, comps in data.items():
            comps = [as_expr(c) for c in comps]
            if len(comps) != rank:
                raise ValueError(f"section on chart {ch} needs {rank} components")
            self.data[ch] = comps

    def scale(self, s):
        return ASection(self.rank, {ch: [mul(s, c) for c in v] for ch, v in self.data.items()})

    def __add__(self, other):
        return ASection(
            self.rank,
            {ch: [add(a, b) for a, b in zip(v, other.data[ch])] for ch, v in self.data.items() if ch in other.data},
        )

    def __sub__(self, other):
        return self + other.scale(-1.0)


class ACochain(Alternating):
    """Element of Gamma(Lambda A*), coefficients on the dual frame."""

    __slots__ = ()


class AMultiSection(Alternating):
    """Element of Gamma(Lambda A), coefficients on the frame."""

    __slots__ = ()


# constructors -----------------------------------------------------------


def point_manifold(name: str = "point") -> ManifoldModel:
    chart = Chart("pt", (), frozenset({QUADRATURE, EVALUATION}), domain=(), sample_box=())
    return ManifoldModel(0, {"pt": chart}, name=name)


def _inverse(m: List[List[Expr]]) -> List[List[Expr]]:
    from .exterior import _det

    n = len(m)
    d = _det(m)
    inv = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(m) if k != i]
            cof = _det(minor)
            inv[j][i] = (cof if (i + j) % 2 == 0 else neg(cof)) / d
    return inv


def _jacobians(M: ManifoldModel):
    from .geometry import jacobian

    return {(t.source, t.target): jacobian(M, t) for t in M.transitions}


def tangent_algebroid(M: ManifoldModel, charts: Sequence[str] | None = None, validate: bool = True) -> AlgebroidModel:
    charts = list(charts or M.charts)
    m = M.dim
    anchor = {ch: [[ONE if i == a else ZERO for i in range(m)] for a in range(m)] for ch in charts}
    A = AlgebroidModel(m, M, anchor, {ch: {} for ch in charts}, kind="tangent", frame_maps=_jacobians(M))
    return _validated(A, validate)


def poisson_cotangent_algebroid(
    M: ManifoldModel, poisson: Mapping[str, Mapping[Tuple[int, int], object]], validate: bool = True
) -> AlgebroidModel:
    """T*M with ``{dx^a, dx^b} = d Pi^{ab}`` and anchor ``Pi(dx^a, .)``.

    ``poisson[chart][(i, j)]`` lists ``Pi^{ij}`` (antisymmetry implied).
    """
    m = M.dim
    anchor, structure = {}, {}
    for ch, entries in poisson.items():
        P = [[ZERO] * m for _ in range(m)]
        for (i, j), v in entries.items():
            v = as_expr(v)
            P[i][j] = add(P[i][j], v)
            P[j][i] = add(P[j][i], neg(v))
        coords = M.chart(ch).coords
        anchor[ch] = [[P[a][i] for i in range(m)] for a in range(m)]
        structure[ch] = {
            (a, b): {g: partial(P[a][b], coords[g]) for g in range(m)} for a, b in combinations(range(m), 2)
        }
    frames = {k: [list(r) for r in zip(*_inverse(J))] for k, J in _jacobians(M).items()}
    A = AlgebroidModel(m, M, anchor, structure, kind="poisson_cotangent", frame_maps=frames)
    return _validated(A, validate)


def atiyah_trivial_bundle_algebroid(M: ManifoldModel, fibre_dim: int = 1, validate: bool = True) -> AlgebroidModel:
    """Diff^1_0 of a trivial rank-n bundle on a trivialising chart.

    Frame: coordinate fields followed by the gl(n) basis ``E_pq`` (row-major);
    anchor projects onto the first block, brackets are matrix commutators.
    """
    m, n = M.dim, fibre_dim
    r = m + n * n

    def E(p, q):
        return m + p * n + q

    anchor = {}
    structure = {}
    for ch in M.charts:
        anchor[ch] = [[ONE if (a == i) else ZERO for i in range(m)] for a in range(r)]
        table: Structure = {}
        for p in range(n):
            for q in range(n):
                for s in range(n):
                    for t in range(n):
                        a, b = E(p, q), E(s, t)
                        if a >= b:
                            continue
                        comps: Dict[int, Expr] = {}
                        # [E_pq, E_st] = delta_qs E_pt - delta_tp E_sq
                        if q == s:
                            comps[E(p, t)] = add(comps.get(E(p, t), ZERO), ONE)
                        if t == p:
                            comps[E(s, q)] = add(comps.get(E(s, q), ZERO), as_expr(-1.0))
                        comps = {g: v for g, v in comps.items() if not v.is_zero}
                        if comps:
                            table[(a, b)] = comps
        structure[ch] = table
    frames = {}
    for key, J in _jacobians(M).items():
        G = [[ZERO] * r for _ in range(r)]
        for i in range(m):
            for j in range(m):
                G[i][j] = J[i][j]
        for k in range(m, r):
            G[k][k] = ONE
        frames[key] = G
    A = AlgebroidModel(r, M, anchor, structure, kind="atiyah_trivial_bundle", frame_maps=frames)
    return _validated(A, validate)


def lie_algebra_point_algebroid(
    structure_constants: Mapping[Tuple[int, int], Mapping[int, object]], dim: int, validate: bool = True
) -> AlgebroidModel:
    M = point_manifold()
    A = AlgebroidModel(dim, M, {"pt": [[] for _ in range(dim)]}, {"pt": dict(structure_constants)}, kind="lie_algebra_point")
    return _validated(A, validate)


def custom_algebroid(
    M: ManifoldModel,
    rank: int,
    anchor: Mapping[str, Sequence[Sequence[object]]],
    structure: Mapping[str, Mapping[Tuple[int, int], Mapping[int, object]]] | None = None,
    frame_maps=None,
    validate: bool = True,
) -> AlgebroidModel:
    anc = {ch: [[as_expr(v) for v in col] for col in cols] for ch, cols in anchor.items()}
    st = {ch: dict((structure or {}).get(ch, {})) for ch in anc}
    A = AlgebroidModel(rank, M, anc, st, kind="custom", frame_maps=dict(frame_maps or {}))
    return _validated(A, validate)


def build_algebroid(kind: str, manifold: ManifoldModel | None = None, **params) -> AlgebroidModel:
    """Dispatch on ``kind`` in {tangent, poisson_cotangent,
    atiyah_trivial_bundle, lie_algebra_point, custom}."""
    if kind == "tangent":
        return tangent_algebroid(manifold, **params)
    if kind == "poisson_cotangent":
        return poisson_cotangent_algebroid(manifold, params.pop("poisson"), **params)
    if kind == "atiyah_trivial_bundle":
        return atiyah_trivial_bundle_algebroid(manifold, **params)
    if kind == "lie_algebra_point":
        return lie_algebra_point_algebroid(params.pop("structure_constants"), params.pop("dim"), **params)
    if kind == "custom":
        return custom_algebroid(manifold, **params)
    raise ValueError(f"unknown algebroid kind {kind!r}")


def _validated(A: AlgebroidModel, validate: bool, tol: float = 1e-9) -> AlgebroidModel:
    if validate:
        rep = check_axioms(A, samples=50)
        if rep["anchor_homomorphism"] > tol or rep["jacobi"] > tol:
            raise AxiomError(
                f"{A.kind} algebroid fails its axioms (anchor {rep['anchor_homomorphism']:.3g}, "
                f"jacobi {rep['jacobi']:.3g})",
                rep,
            )
    return A


# axioms -------------------------------------------------------------------


def anchor_residuals(A: AlgebroidModel, chart: str) -> List[Expr]:
    """``a({e_a, e_b}) - [a(e_a), a(e_b)]`` components for a < b."""
    out = []
    m = A.manifold.dim
    cols = A.anchor[chart]
    for a, b in combinations(range(A.rank), 2):
        cab = A.c(chart, a, b)
        for i in range(m):
            lhs = add(*(mul(v, cols[g][i]) for g, v in cab.items()))
            rhs = sub(A.apply_anchor(chart, a, cols[b][i]), A.apply_anchor(chart, b, cols[a][i]))
            out.append(sub(lhs, rhs))
    return out


def jacobi_residuals(A: AlgebroidModel, chart: str) -> List[Expr]:
    """Components of the cyclic sum of ``{e_a, {e_b, e_c}}``."""
    out = []
    r = A.rank
    for a, b, c in combinations(range(r), 3):
        acc: Dict[int, List[Expr]] = {}
        for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
            for d, cyz in A.c(chart, y, z).items():
                # {e_x, c^d_yz e_d} = a_x(c^d_yz) e_d + c^d_yz c^e_xd e_e
                acc.setdefault(d, []).append(A.apply_anchor(chart, x, cyz))
                for e, cxd in A.c(chart, x, d).items():
                    acc.setdefault(e, []).append(mul(cyz, cxd))
        out.extend(add(*v) for v in acc.values())
    return out


def _max_abs(exprs, env) -> float:
    best = 0.0
    for e in exprs:
        if e.is_zero:
            continue
        v = np.max(np.abs(evaluate(e, env)))
        best = max(best, float(v))
    return best


def check_axioms(A: AlgebroidModel, samples: int = 200, seed: int = 0, bindings=None) -> Dict[str, float]:
    """Residuals of the anchor homomorphism and Jacobi identities.

    Reports per-chart values and the overall maxima under the keys
    ``anchor_homomorphism`` and ``jacobi``.
    """
    rng = np.random.default_rng(seed)
    rep: Dict[str, float] = {"anchor_homomorphism": 0.0, "jacobi": 0.0}
    for ch in A.charts:
        chart = A.manifold.chart(ch)
        env = dict(bindings or {})
        if chart.dim:
            env.update(sample_points(chart, samples, rng))
        ra = _max_abs(anchor_residuals(A, ch), env)
        rj = _max_abs(jacobi_residuals(A, ch), env)
        rep[f"anchor_homomorphism[{ch}]"] = ra
        rep[f"jacobi[{ch}]"] = rj
        rep["anchor_homomorphism"] = max(rep["anchor_homomorphism"], ra)
        rep["jacobi"] = max(rep["jacobi"], rj)
    return rep


# cochain operations -----------------------------------------------------


def delta(A: AlgebroidModel, xi: ACochain) -> ACochain:
    """The algebroid differential, chart by chart on the local frame."""
    ds = xi.degrees()
    if ds and min(ds) >= A.rank:
        raise DegreeError(f"cannot apply delta to a degree-{A.rank} cochain (rank {A.rank})")
    out = {}
    for ch, c in xi.data.items():
        out[ch] = c_cartan(c, A.rank, A.coords(ch), A.anchor[ch], A.structure[ch])
    return xi._like(out)


def wedge(a: Alternating, b: Alternating) -> Alternating:
    """Exterior product; the result has the type of the right factor so that
    ``wedge(cochain, twisted)`` is twisted."""
    if a.dim != b.dim:
        raise ValueError("frame sizes differ")
    charts = [ch for ch in b.data if ch in a.data]
    return b._like({ch: c_wedge(a.coeffs(ch), b.coeffs(ch)) for ch in charts})


def contract(s: ASection, xi: Alternating) -> Alternating:
    """``i_s xi``: a degree -1 antiderivation."""
    ds = xi.degrees()
    if ds and max(ds) == 0 and min(ds) == 0:
        raise DegreeError("cannot contract a section into a 0-cochain")
    return xi._like({ch: c_contract(s.data[ch], c) for ch, c in xi.data.items() if ch in s.data})


def bracket(A: AlgebroidModel, s: ASection, t: ASection) -> ASection:
    """``{s, t}`` for sections with function coefficients."""
    out = {}
    for ch in s.data:
        if ch not in t.data:
            continue
        sv, tv = s.data[ch], t.data[ch]
        comps: List[List[Expr]] = [[] for _ in range(A.rank)]
        for a in range(A.rank):
            if sv[a].is_zero:
                continue
            for b in range(A.rank):
                if tv[b].is_zero:
                    continue
                for g, v in A.c(ch, a, b).items():
                    comps[g].append(mul(sv[a], tv[b], v))
                comps[b].append(mul(sv[a], A.apply_anchor(ch, a, tv[b])))
                comps[a].append(neg(mul(tv[b], A.apply_anchor(ch, b, sv[a]))))
        out[ch] = [add(*c) for c in comps]
    return ASection(A.rank, out)


def lie_multisection(A: AlgebroidModel, s: ASection, X: AMultiSection) -> AMultiSection:
    """``L_s X = {s, X}`` extended to multisections as a derivation."""
    out = {}
    r = A.rank
    for ch, coeffs in X.data.items():
        sv = s.data[ch]
        # {s, e_b} = s^a c^g_ab e_g - a_b(s^a) e_a
        brackets = []
        for b in range(r):
            comp: Dict[int, List[Expr]] = {}
            for a in range(r):
                if sv[a].is_zero:
                    continue
                for g, v in A.c(ch, a, b).items():
                    comp.setdefault(g, []).append(mul(sv[a], v))
                comp.setdefault(a, []).append(neg(A.apply_anchor(ch, b, sv[a])))
            brackets.append({g: add(*v) for g, v in comp.items()})
        terms: List[Coeffs] = []
        for idx, f in coeffs.items():
            df = add(*(mul(sv[a], A.apply_anchor(ch, a, f)) for a in range(r) if not sv[a].is_zero))
            terms.append({idx: df})
            for pos, b in enumerate(idx):
                for g, v in brackets[b].items():
                    new = idx[:pos] + (g,) + idx[pos + 1:]
                    if g in idx[:pos] + idx[pos + 1:]:
                        continue
                    # reorder new to sorted position
                    from .exterior import perm_sign

                    sgn = perm_sign(new)
                    term = mul(f, v)
                    terms.append({tuple(sorted(new)): term if sgn > 0 else neg(term)})
        out[ch] = c_add(*terms)
    return X._like(out)


def anchor_pullback(A: AlgebroidModel, w: DiffForm) -> ACochain:
    """``(a* w)(e_1, ...) = w(a(e_1), ...)``."""
    out = {}
    for ch, c in w.data.items():
        if ch not in A.anchor:
            continue
        g = [[A.anchor[ch][a][i] for a in range(A.rank)] for i in range(A.manifold.dim)]
        out[ch] = c_transform(c, g)
    return ACochain(A.rank, out)


def anchor_of(A: AlgebroidModel, s: ASection):
    """Vector field ``a(s)`` (component lists per chart)."""
    from .geometry import VectorField

    m = A.manifold.dim
    return VectorField(
        m,
        {
            ch: [add(*(mul(A.anchor[ch][a][i], v[a]) for a in range(A.rank))) for i in range(m)]
            for ch, v in s.data.items()
        },
    )


def cochain_from_function(A: AlgebroidModel, f: Mapping[str, object]) -> ACochain:
    return ACochain(A.rank, {ch: {(): as_expr(v)} for ch, v in f.items()})


def induce_from_differential(
    M: ManifoldModel,
    rank: int,
    on_coordinates: Mapping[str, Sequence[Sequence[object]]],
    on_generators: Mapping[str, Sequence[Mapping[Tuple[int, int], object]]],
    samples: int = 50,
    tol: float = 1e-9,
    seed: int = 0,
) -> AlgebroidModel:
    """Rebuild anchor and bracket from a square-zero derivation.

    ``on_coordinates[chart][i]`` lists ``(D x^i)(e_alpha)`` over alpha and
    ``on_generators[chart][gamma]`` maps ``(alpha, beta)`` to
    ``(D e^gamma)(e_alpha, e_beta)``.  Then ``a^i_alpha = (D x^i)(e_alpha)``
    and ``c^gamma_{alpha beta} = -(D e^gamma)(e_alpha, e_beta)`` because the
    frame pairings are constant.  Raises :class:`AxiomError` when the
    derivation does not square to zero at the sampled points.
    """
    anchor = {}
    structure = {}
    for ch, rows in on_coordinates.items():
        m = len(rows)
        anchor[ch] = [[as_expr(rows[i][a]) for i in range(m)] for a in range(rank)]
        table: Dict[Tuple[int, int], Dict[int, Expr]] = {}
        for g, entries in enumerate(on_generators.get(ch, [])):
            for (a, b), v in entries.items():
                v = as_expr(v)
                if a > b:
                    a, b, v = b, a, neg(v)
                table.setdefault((a, b), {})[g] = add(table.get((a, b), {}).get(g, ZERO), neg(v))
        structure[ch] = table
    A = AlgebroidModel(rank, M, anchor, structure, kind="custom")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for ch in A.charts:
        chart = M.chart(ch)
        env = sample_points(chart, samples, rng) if chart.dim else {}
        gens = []
        for i, x in enumerate(chart.coords):
            gens.append(ACochain(rank, {ch: {(a,): anchor[ch][a][i] for a in range(rank)}}))
        for g in range(rank):
            gens.append(ACochain(rank, {ch: {(g,): ONE}}))
        for xi in gens:
            first = delta(A, xi)
            if first.is_zero() or min(first.degrees()) >= rank:
                continue
            dd = delta(A, first)
            worst = max(worst, _max_abs(dd.coeffs(ch).values(), env))
        for i, x in enumerate(chart.coords):
            f = ACochain(rank, {ch: {(): as_expr(x) if False else _sym(x)}})
            worst = max(worst, _max_abs(delta(A, delta(A, f)).coeffs(ch).values(), env) if rank > 1 else 0.0)
    if worst > tol:
        raise AxiomError(f"derivation does not square to zero (residual {worst:.3g})", {"d_squared": worst})
    return A


def _sym(name):
    from .expr import Symbol

    return Symbol(name)
