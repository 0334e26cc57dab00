"""YAML example files: manifold charts, algebroid, action, cocycles.

Every node keeps its source position so that errors point at a line and
column.  Built-in examples ship as package data in the same format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import hashlib
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from .algebroid import AlgebroidModel, build_algebroid
from .equivariant import EquivTwistedCochain, LieAlgebraAction
from .expr import Expr, ParseError, as_expr, evaluate, parse_expr
from .geometry import EVALUATION, QUADRATURE, Chart, ManifoldModel, Transition
from .localization import FixedPointRecord
from .twisted import TwistedCochain

__all__ = ["SpecError", "ExampleSpec", "load_spec", "load_builtin", "builtin_names", "load_example"]


class SpecError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None, source: str = ""):
        where = ""
        if line is not None:
            where = f"{source or '<spec>'}:{line}:{column}: "
        super().__init__(where + message)
        self.line = line
        self.column = column


# located YAML ----------------------------------------------------------------


class _Str(str):
    mark = None


class _Map(dict):
    mark = None


class _Seq(list):
    mark = None


class _Num(float):
    mark = None


def _located(node, loader):
    if isinstance(node, yaml.MappingNode):
        out = _Map()
        out.mark = node.start_mark
        for k, v in node.value:
            key = _located(k, loader)
            if isinstance(key, float) and key.is_integer():
                mark, key = key.mark, _Str(str(int(key)))
                key.mark = mark
            elif not isinstance(key, str):
                key = str(key)
            if key in out:
                raise SpecError(f"duplicate key {key!r}", k.start_mark.line + 1, k.start_mark.column + 1)
            out[key] = _located(v, loader)
        return out
    if isinstance(node, yaml.SequenceNode):
        out = _Seq(_located(v, loader) for v in node.value)
        out.mark = node.start_mark
        return out
    value = loader.construct_object(node, deep=True)
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, (int, float)):
        v = _Num(value)
        v.mark = node.start_mark
        return v
    v = _Str(str(value))
    v.mark = node.start_mark
    return v


class _Ctx:
    def __init__(self, source: str):
        self.source = source

    def error(self, message: str, obj=None) -> SpecError:
        mark = getattr(obj, "mark", None)
        if mark is None:
            return SpecError(message, source=self.source)
        return SpecError(message, mark.line + 1, mark.column + 1, self.source)

    def require(self, m: Dict, key: str, kind=None):
        if not isinstance(m, dict):
            raise self.error("expected a mapping", m)
        if key not in m:
            raise self.error(f"missing required key {key!r}", m)
        v = m[key]
        if kind is not None and not isinstance(v, kind):
            raise self.error(f"key {key!r} has the wrong type", v)
        return v

    def expr(self, value, symbols) -> Expr:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return as_expr(float(value))
        if not isinstance(value, str):
            raise self.error("expected an expression", value)
        try:
            return parse_expr(value, allowed_symbols=symbols)
        except ParseError as exc:
            mark = getattr(value, "mark", None)
            if mark is None:
                raise SpecError(str(exc), source=self.source) from None
            pos = getattr(exc, "position", 0) or 0
            # quoted scalars start one column earlier than their content
            raise SpecError(str(exc), mark.line + 1, mark.column + 2 + pos, self.source) from None

    def number(self, value) -> float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if isinstance(value, str):
            e = self.expr(value, {"pi"})
            return float(evaluate(e, {"pi": math.pi}))
        raise self.error("expected a number", value)

    def box(self, value, dim) -> Tuple[Tuple[float, float], ...]:
        if not isinstance(value, list) or len(value) != dim:
            raise self.error(f"expected {dim} intervals", value)
        out = []
        for iv in value:
            if not isinstance(iv, list) or len(iv) != 2:
                raise self.error("expected an interval [lo, hi]", iv)
            lo, hi = self.number(iv[0]), self.number(iv[1])
            if not lo < hi:
                raise self.error("empty interval", iv)
            out.append((lo, hi))
        return tuple(out)


def _index(ctx: _Ctx, key, rank: int) -> Tuple[int, ...]:
    s = str(key).strip()
    if s in ("", "()", "-"):
        return ()
    try:
        idx = tuple(int(p) for p in s.replace(" ", "").split(","))
    except ValueError:
        raise ctx.error(f"bad index {key!r}; use comma-separated frame indices", key) from None
    if any(i < 0 or i >= rank for i in idx):
        raise ctx.error(f"index {key!r} out of range for rank {rank}", key)
    return idx


# the parsed example ------------------------------------------------------------


@dataclass
class ExampleSpec:
    name: str
    description: str
    manifold: ManifoldModel
    algebroid: AlgebroidModel
    action: Optional[LieAlgebraAction] = None
    xi: Optional[np.ndarray] = None
    fixed_points: List[FixedPointRecord] = field(default_factory=list)
    cocycles: Dict[str, EquivTwistedCochain] = field(default_factory=dict)
    default_cocycle: Optional[str] = None
    metric: Dict[str, List[List[Expr]]] = field(default_factory=dict)
    random: Dict[str, Any] = field(default_factory=dict)
    connection: Dict[str, Any] = field(default_factory=dict)
    bott: Dict[str, Any] = field(default_factory=dict)
    expected: Dict[str, Any] = field(default_factory=dict)
    source: str = ""
    digest: str = ""

    @property
    def cocycle(self) -> Optional[EquivTwistedCochain]:
        if self.default_cocycle is None:
            return None
        return self.cocycles[self.default_cocycle]

    def fresh_fixed_points(self) -> List[FixedPointRecord]:
        """Copies of the declared fixed points (validation mutates records)."""
        return [
            FixedPointRecord(r.chart, r.coords, None if r.L is None else r.L.copy(), r.orientation, r.metric.copy(), r.label)
            for r in self.fixed_points
        ]


def _manifold(ctx: _Ctx, node) -> ManifoldModel:
    dim = int(ctx.number(ctx.require(node, "dim")))
    charts = {}
    for cn in ctx.require(node, "charts", list):
        cid = str(ctx.require(cn, "id"))
        if cid in charts:
            raise ctx.error(f"duplicate chart id {cid!r}", cn["id"])
        coords = tuple(str(c) for c in ctx.require(cn, "coords", list))
        if len(coords) != dim:
            raise ctx.error(f"chart {cid} needs {dim} coordinates", cn["coords"])
        roles = cn.get("roles", ["evaluation"])
        bad = [r for r in roles if r not in (QUADRATURE, EVALUATION)]
        if bad:
            raise ctx.error(f"unknown chart role {bad[0]!r}", bad[0])
        domain = ctx.box(cn["domain"], dim) if "domain" in cn else None
        sample = ctx.box(cn["sample_box"], dim) if "sample_box" in cn else None
        orient = int(ctx.number(cn.get("orientation", 1)))
        try:
            charts[cid] = Chart(
                cid,
                coords,
                frozenset(str(r) for r in roles),
                domain=domain if dim else (),
                sample_box=sample if dim else (),
                quad_order=int(ctx.number(cn.get("quad_order", 32))),
                orientation=orient,
            )
        except ValueError as exc:
            raise ctx.error(str(exc), cn) from None
    transitions = []
    for tn in node.get("transitions", []) or []:
        src, tgt = str(ctx.require(tn, "source")), str(ctx.require(tn, "target"))
        for c in (src, tgt):
            if c not in charts:
                raise ctx.error(f"transition refers to unknown chart {c!r}", tn)
        syms = set(charts[src].coords)
        cmap = tuple(ctx.expr(e, syms) for e in ctx.require(tn, "map", list))
        if len(cmap) != dim:
            raise ctx.error("transition map has the wrong length", tn["map"])
        transitions.append(Transition(src, tgt, cmap, ctx.box(ctx.require(tn, "region"), dim)))
    try:
        return ManifoldModel(dim, charts, transitions, name=str(node.get("name", "")))
    except ValueError as exc:
        raise ctx.error(str(exc), node) from None


def _per_chart(ctx: _Ctx, node, M: ManifoldModel, fn):
    if not isinstance(node, dict):
        raise ctx.error("expected a mapping from chart id", node)
    out = {}
    for ch, v in node.items():
        if ch not in M.charts:
            raise ctx.error(f"unknown chart {ch!r}", ch)
        out[str(ch)] = fn(str(ch), v)
    return out


def _matrix(ctx, node, rows, cols, syms):
    if not isinstance(node, list) or len(node) != rows or any(not isinstance(r, list) or len(r) != cols for r in node):
        raise ctx.error(f"expected a {rows}x{cols} matrix", node)
    return [[ctx.expr(v, syms) for v in r] for r in node]


def _structure(ctx, node, rank, syms):
    out = {}
    for key, comps in (node or {}).items():
        idx = _index(ctx, key, rank)
        if len(idx) != 2:
            raise ctx.error("structure keys are pairs 'a,b'", key)
        out[idx] = {_frame_index(ctx, g, rank): ctx.expr(v, syms) for g, v in comps.items()}
    return out


def _frame_index(ctx, g, rank) -> int:
    try:
        i = int(str(g))
    except ValueError:
        raise ctx.error(f"bad frame index {g!r}", g) from None
    if not 0 <= i < rank:
        raise ctx.error(f"frame index {i} out of range", g)
    return i


def _algebroid(ctx: _Ctx, node, M: ManifoldModel) -> AlgebroidModel:
    from .algebroid import AxiomError

    kind = str(ctx.require(node, "kind"))
    sym = lambda ch: set(M.chart(ch).coords)
    try:
        if kind == "tangent":
            return build_algebroid("tangent", M)
        if kind == "poisson_cotangent":
            poisson = _per_chart(
                ctx,
                ctx.require(node, "poisson"),
                M,
                lambda ch, v: {_index(ctx, k, M.dim): ctx.expr(e, sym(ch)) for k, e in v.items()},
            )
            return build_algebroid("poisson_cotangent", M, poisson=poisson)
        if kind == "atiyah_trivial_bundle":
            return build_algebroid("atiyah_trivial_bundle", M, fibre_dim=int(ctx.number(node.get("fibre_dim", 1))))
        if kind == "lie_algebra_point":
            dim = int(ctx.number(ctx.require(node, "dim")))
            sc = _structure(ctx, ctx.require(node, "structure_constants"), dim, set())
            return build_algebroid("lie_algebra_point", structure_constants=sc, dim=dim)
        if kind == "custom":
            rank = int(ctx.number(ctx.require(node, "rank")))
            anchor = _per_chart(
                ctx, ctx.require(node, "anchor"), M, lambda ch, v: _matrix(ctx, v, rank, M.dim, sym(ch))
            )
            structure = _per_chart(ctx, node.get("structure", {}) or {}, M, lambda ch, v: _structure(ctx, v, rank, sym(ch)))
            frames = {}
            for fm in node.get("frame_maps", []) or []:
                src, tgt = str(fm["source"]), str(fm["target"])
                frames[(src, tgt)] = _matrix(ctx, fm["matrix"], rank, rank, sym(src))
            return build_algebroid("custom", M, rank=rank, anchor=anchor, structure=structure, frame_maps=frames)
    except AxiomError as exc:
        raise ctx.error(str(exc), node) from None
    raise ctx.error(f"unknown algebroid kind {kind!r}", node["kind"])


def _coeff_table(ctx, node, rank, syms):
    if not isinstance(node, dict):
        raise ctx.error("expected a mapping from index to expression", node)
    return {_index(ctx, k, rank): ctx.expr(v, syms) for k, v in node.items()}


def _cochain(ctx, node, A: AlgebroidModel, extra_syms=()):
    M = A.manifold
    data = _per_chart(ctx, node, M, lambda ch, v: _coeff_table(ctx, v, A.rank, set(M.chart(ch).coords) | set(extra_syms)))
    return TwistedCochain(A.rank, data)


def _action(ctx, node, A: AlgebroidModel):
    M = A.manifold
    dim = int(ctx.number(ctx.require(node, "dim")))
    params = tuple(str(p) for p in node.get("params", [f"x{i + 1}" for i in range(dim)]))
    sc = _structure(ctx, node.get("structure_constants", {}) or {}, dim, set())
    sc = {k: {g: float(evaluate(v, {})) for g, v in comps.items()} for k, comps in sc.items()}
    b = _per_chart(
        ctx, ctx.require(node, "b"), M, lambda ch, v: _matrix(ctx, v, dim, A.rank, set(M.chart(ch).coords))
    )
    fundamental = None
    if "fundamental" in node:
        fundamental = _per_chart(
            ctx, node["fundamental"], M, lambda ch, v: _matrix(ctx, v, dim, M.dim, set(M.chart(ch).coords))
        )
    try:
        return LieAlgebraAction(A, dim, b, sc, params, fundamental)
    except ValueError as exc:
        raise ctx.error(str(exc), node) from None


def _parse(ctx: _Ctx, root) -> ExampleSpec:
    if not isinstance(root, dict):
        raise ctx.error("the spec file must be a mapping", root)
    name = str(root.get("name", ""))
    if M_node := root.get("manifold"):
        M = _manifold(ctx, M_node)
    else:
        from .algebroid import point_manifold

        M = point_manifold()
    A = _algebroid(ctx, ctx.require(root, "algebroid"), M)
    if A.manifold is not M:
        M = A.manifold
    spec = ExampleSpec(name, str(root.get("description", "")).strip(), M, A, source=ctx.source)
    if "metric" in root:
        spec.metric = _per_chart(ctx, root["metric"], M, lambda ch, v: _matrix(ctx, v, M.dim, M.dim, set(M.chart(ch).coords)))
    if "action" in root:
        an = root["action"]
        spec.action = _action(ctx, an, A)
        if "xi" in an:
            xi = an["xi"]
            xi = xi if isinstance(xi, list) else [xi]
            spec.xi = np.array([ctx.number(v) for v in xi])
            if spec.xi.shape != (spec.action.dim,):
                raise ctx.error("xi has the wrong length", an["xi"])
        for fp in an.get("fixed_points", []) or []:
            ch = str(ctx.require(fp, "chart"))
            if ch not in M.charts:
                raise ctx.error(f"unknown chart {ch!r}", fp["chart"])
            coords = [ctx.number(c) for c in ctx.require(fp, "coords", list)]
            metric = None
            if "metric" in fp:
                metric = np.array([[ctx.number(v) for v in row] for row in fp["metric"]])
            elif ch in spec.metric:
                env = {x: np.array([c]) for x, c in zip(M.chart(ch).coords, coords)}
                metric = np.array([[float(np.asarray(evaluate(e, env)).ravel()[0]) for e in row] for row in spec.metric[ch]])
            L = np.array([[ctx.number(v) for v in row] for row in fp["L"]]) if "L" in fp else None
            spec.fixed_points.append(
                FixedPointRecord(
                    ch, coords, L, orientation=M.chart(ch).orientation, metric=metric, label=str(fp.get("label", ""))
                )
            )
    if "cocycles" in root:
        if spec.action is None:
            raise ctx.error("cocycles need an action", root["cocycles"])
        for cname, cn in root["cocycles"].items():
            terms = []
            for tn in ctx.require(cn, "terms", list):
                P = ctx.expr(tn.get("poly", "1"), set(spec.action.params))
                beta = _cochain(ctx, ctx.require(tn, "coeffs"), A)
                terms.append((P, beta))
            try:
                spec.cocycles[str(cname)] = EquivTwistedCochain(spec.action, terms)
            except ValueError as exc:
                raise ctx.error(str(exc), cn) from None
        spec.default_cocycle = str(root.get("default_cocycle", next(iter(spec.cocycles), None)))
        if spec.default_cocycle not in spec.cocycles:
            raise ctx.error(f"unknown default cocycle {spec.default_cocycle!r}", root.get("default_cocycle"))
    if "random" in root:
        spec.random = _random(ctx, root["random"], A)
    if "connection" in root:
        spec.connection = dict(root["connection"])
    if "bott" in root:
        spec.bott = dict(root["bott"])
    if "expected" in root:
        spec.expected = {str(k): v for k, v in root["expected"].items()}
    return spec


def _random(ctx, node, A: AlgebroidModel) -> Dict[str, Any]:
    M = A.manifold
    out: Dict[str, Any] = {}
    if "functions" in node:
        out["functions"] = _per_chart(
            ctx, node["functions"], M, lambda ch, v: [ctx.expr(e, set(M.chart(ch).coords)) for e in v]
        )
    gens = []
    for g in node.get("generators", []) or []:
        gens.append(
            _per_chart(ctx, g, M, lambda ch, v: _coeff_table(ctx, v, A.rank, set(M.chart(ch).coords)))
        )
    out["generators"] = gens
    if "twist" in node:
        out["twist"] = _per_chart(ctx, node["twist"], M, lambda ch, v: ctx.expr(v, set(M.chart(ch).coords)))
    out["differentials"] = bool(node.get("differentials", True))
    return out


def load_spec(source, name: str = "") -> ExampleSpec:
    """Parse a spec from a path or a YAML string."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).exists()):
        path = Path(source)
        text = path.read_text()
        name = name or str(path)
    else:
        text = str(source)
    ctx = _Ctx(name)
    try:
        loader = yaml.SafeLoader(text)
        try:
            node = loader.get_single_node()
            if node is None:
                raise SpecError("empty spec file", source=name)
            root = _located(node, loader)
        finally:
            loader.dispose()
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise SpecError(f"YAML syntax error: {exc.problem}", mark.line + 1 if mark else None, mark.column + 1 if mark else None, name) from None
    spec = _parse(ctx, root)
    spec.digest = hashlib.sha256(text.encode()).hexdigest()
    return spec


def builtin_names() -> List[str]:
    files = resources.files("lieloc").joinpath("builtins")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".yaml"))


_CACHE: Dict[str, ExampleSpec] = {}


def load_builtin(name: str) -> ExampleSpec:
    if name not in _CACHE:
        res = resources.files("lieloc").joinpath("builtins").joinpath(f"{name}.yaml")
        if not res.is_file():
            raise KeyError(f"unknown built-in example {name!r}; known: {', '.join(builtin_names())}")
        _CACHE[name] = load_spec(res.read_text(), name=f"{name}.yaml")
    return _CACHE[name]


def load_example(name_or_path: str) -> ExampleSpec:
    """A built-in name or a path to a spec file."""
    if name_or_path in builtin_names():
        return load_builtin(name_or_path)
    p = Path(name_or_path)
    if not p.exists():
        raise SpecError(f"no built-in or file named {name_or_path!r}")
    return load_spec(p)
