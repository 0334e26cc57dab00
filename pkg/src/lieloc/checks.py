"""Check suites run on whole examples; shared by the CLI and the tests.

Each suite returns a report dict with an entry per check
(``{"value", "tol", "pass"}``) and an overall ``pass`` flag.
"""

from __future__ import annotations

import math
from typing import Dict, Optional

import numpy as np

from .algebroid import check_axioms, delta
from .bott import verify_bott
from .connection import (
    InvariantPoly,
    bianchi_residual,
    chern_weil,
    connection_from_spec,
    diagram_residual,
    equivariance_residual,
    equivariant_bianchi_residual,
    fixed_point_invariants,
    levi_civita,
    moment_map_residual,
    sample_max,
)
from .bott import chern_of_endomorphism
from .equivariant import _sample_residual, check_action, p_identity_check
from .geometry import transition_consistency_check
from .localization import closedness_residual, validate_fixed_points, verify_localization
from .randomize import RandomCochains
from .specfile import ExampleSpec
from .twisted import QSection, chain_map_residual, delta_twisted, stokes_check

__all__ = [
    "axiom_suite",
    "complex_suite",
    "localization_run",
    "connection_suite",
    "bott_run",
    "default_xi",
]


def _entry(value: float, tol: float) -> Dict[str, object]:
    value = float(value)
    return {"value": value, "tol": tol, "pass": bool(value <= tol and math.isfinite(value))}


def _finish(checks: Dict[str, Dict[str, object]], **extra) -> Dict[str, object]:
    out = {"checks": checks, "pass": all(c["pass"] for c in checks.values())}
    out.update(extra)
    return out


def default_xi(spec: ExampleSpec, xi=None):
    if xi is not None:
        return np.atleast_1d(np.asarray(xi, dtype=float))
    if spec.xi is not None:
        return np.asarray(spec.xi, dtype=float)
    return np.ones(spec.action.dim) if spec.action else None


def axiom_suite(
    spec: ExampleSpec, samples: int = 200, n_cochains: int = 50, cochain_samples: int = 20, seed: int = 0, tol: float = 1e-9
) -> Dict[str, object]:
    """Anchor homomorphism, Jacobi, the action's Lie map and ``delta^2 = 0``."""
    A = spec.algebroid
    checks: Dict[str, Dict[str, object]] = {}
    ax = check_axioms(A, samples=samples, seed=seed)
    checks["anchor_homomorphism"] = _entry(ax["anchor_homomorphism"], tol)
    checks["jacobi"] = _entry(ax["jacobi"], tol)
    if spec.action is not None:
        act = check_action(spec.action, samples=samples, seed=seed)
        checks["action_lie_map"] = _entry(act["lie_map"], tol)
        if spec.action.fundamental is not None:
            checks["action_fundamental"] = _entry(act["fundamental"], tol)
    rnd = RandomCochains(A, spec.random, seed=seed)
    rng = np.random.default_rng(seed + 1)
    for k in range(0, A.rank - 1):
        worst = 0.0
        for _ in range(n_cochains):
            c = rnd.cochain(k)
            if c.is_zero():
                continue
            worst = max(worst, _sample_residual(A, delta(A, delta(A, c)), cochain_samples, rng))
        checks[f"delta_squared[{k}]"] = _entry(worst, tol)
    return _finish(checks, example=spec.name)


def complex_suite(
    spec: ExampleSpec,
    n_cochains: int = 50,
    n_stokes: int = 20,
    n_equivariant: int = 5,
    samples: int = 20,
    order: Optional[int] = 48,
    seed: int = 0,
    tol: float = 1e-9,
    stokes_tol: float = 1e-7,
    xi=None,
) -> Dict[str, object]:
    """Twisted complex checks: ``delta~^2``, the chain map, Stokes, the
    equivariant identity and closedness of the declared cocycles."""
    A = spec.algebroid
    r, m = A.rank, A.manifold.dim
    checks: Dict[str, Dict[str, object]] = {}
    rnd = RandomCochains(A, spec.random, seed=seed)
    rng = np.random.default_rng(seed + 2)
    for k in range(0, r - 1):
        worst = 0.0
        for _ in range(n_cochains):
            c = rnd.twisted(k)
            if not c.is_zero():
                worst = max(worst, _sample_residual(A, delta_twisted(A, delta_twisted(A, c)), samples, rng))
        checks[f"twisted_delta_squared[{k}]"] = _entry(worst, tol)
    for k in range(max(0, r - m), r):
        worst = 0.0
        for i in range(n_cochains):
            worst = max(worst, chain_map_residual(A, rnd.twisted(k), samples=samples, seed=seed + i))
        checks[f"chain_map[{k}]"] = _entry(worst, tol)
    if n_stokes:
        worst = 0.0
        for _ in range(n_stokes):
            worst = max(worst, stokes_check(A, rnd.twisted(r - 1), order=order))
        checks["stokes"] = _entry(worst, stokes_tol)
    if spec.action is not None:
        worst = 0.0
        for deg in range(max(0, r - m), r + 3):
            for _ in range(n_equivariant):
                try:
                    g = rnd.equivariant_twisted(spec.action, deg)
                except ValueError:
                    continue
                x = rng.normal(size=spec.action.dim)
                worst = max(worst, p_identity_check(spec.action, g, x, samples=samples, seed=int(rng.integers(1 << 30))))
        checks["equivariant_identity"] = _entry(worst, tol)
        x = default_xi(spec, xi)
        for name, cocycle in spec.cocycles.items():
            checks[f"cocycle_closed[{name}]"] = _entry(closedness_residual(spec.action, cocycle, x, samples=samples), tol)
            rep = transition_consistency_check(
                A.manifold, cocycle(x), frame_maps=A.frame_maps, twisted=True, seed=seed
            )
            checks[f"cocycle_transitions[{name}]"] = _entry(max(rep.values(), default=0.0), 1e-8)
    return _finish(checks, example=spec.name)


def localization_run(
    spec: ExampleSpec, xi=None, cocycle: Optional[str] = None, order=None, rtol: float = 1e-5, atol: float = 1e-7
) -> Dict[str, object]:
    if spec.action is None or not spec.cocycles:
        raise ValueError(f"example {spec.name!r} has no action or cocycle to localize")
    x = default_xi(spec, xi)
    gamma = spec.cocycles[cocycle or spec.default_cocycle]
    rep = verify_localization(spec.action, gamma, x, spec.fresh_fixed_points(), order=order, rtol=rtol, atol=atol)
    rep["xi"] = [float(v) for v in x]
    rep["cocycle"] = cocycle or spec.default_cocycle
    if spec.expected.get("lhs") is not None:
        rep["expected_lhs"] = float(spec.expected["lhs"])
    return rep


def connection_suite(spec: ExampleSpec, xi=None, samples: int = 100, seed: int = 0, tol: float = 1e-9) -> Dict[str, object]:
    """Bianchi identities, Chern-Weil closedness, the comparison diagram and
    the fixed-point curvature identity for the example's connection."""
    A = spec.algebroid
    conn = connection_from_spec(spec)
    x = default_xi(spec, xi)
    checks: Dict[str, Dict[str, object]] = {}
    checks["bianchi"] = _entry(bianchi_residual(conn, samples, seed), tol)
    if spec.action is not None:
        checks["equivariance"] = _entry(equivariance_residual(conn, spec.action, x, samples, seed), 1e-8)
        checks["moment_map"] = _entry(moment_map_residual(conn, spec.action, x, samples, seed), tol)
        checks["equivariant_bianchi"] = _entry(equivariant_bianchi_residual(conn, spec.action, x, samples, seed), tol)
    zeta = levi_civita(A.manifold, {ch: g for ch, g in spec.metric.items() if ch in A.anchor})
    for i in range(1, A.rank // 2 + 1):
        Q = InvariantPoly.sigma(i)
        lam = chern_weil(conn, Q)
        if 2 * i < A.rank:
            checks[f"chern_weil_closed[{i}]"] = _entry(sample_max(A.manifold, delta(A, lam), samples, seed), tol)
        checks[f"diagram[{i}]"] = _entry(diagram_residual(A, zeta, Q, samples, seed), tol)
    if spec.action is not None and spec.fixed_points:
        recs = spec.fresh_fixed_points()
        validate_fixed_points(spec.action, x, recs, allow_degenerate=True)
        worst = 0.0
        for rec in recs:
            sig, _ = fixed_point_invariants(conn, spec.action, x, rec)
            worst = max(worst, max(abs(sig[i] - chern_of_endomorphism(rec.L, i)) for i in range(len(sig))))
        checks["fixed_point_identity"] = _entry(worst, 1e-8)
    return _finish(checks, example=spec.name)


def bott_run(
    spec: ExampleSpec, phi: Optional[str] = None, xi=None, order=None, rtol: float = 1e-5, atol: float = 1e-7, cocycle=None
) -> Dict[str, object]:
    """Bott-type formula with ``Xi`` the unit twist when Phi has positive
    weight, or the default cocycle (or ``cocycle``) otherwise."""
    from .bott import parse_phi

    A = spec.algebroid
    phi_text = phi or str(spec.bott.get("phi", "1"))
    poly = parse_phi(phi_text)
    if xi is None and spec.bott.get("xi") is not None:
        xi = [float(v) for v in spec.bott["xi"]]
    x = default_xi(spec, xi)
    conn = connection_from_spec(spec)
    if cocycle is not None:
        Xi = spec.cocycles[cocycle]
    elif poly.weight == A.rank and spec.random.get("twist"):
        Xi = QSection(spec.random["twist"]).as_cochain(A.rank)
    elif poly.weight == 0 and spec.cocycle is not None:
        Xi = spec.cocycle
    else:
        raise ValueError(f"no twisted cocycle of degree {A.rank - poly.weight} available in {spec.name!r}")
    rep = verify_bott(conn, spec.action, x, poly, Xi, spec.fresh_fixed_points(), order=order, rtol=rtol, atol=atol, metric=spec.metric)
    rep["xi"] = [float(v) for v in x]
    return rep
