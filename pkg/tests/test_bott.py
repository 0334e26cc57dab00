import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lieloc.bott import (
    PhiError,
    WeightedPoly,
    chern_of_endomorphism,
    parse_phi,
    phi_equivariant,
    phi_number,
    total_weight,
    verify_bott,
)
from lieloc.connection import AConnectionModel, connection_from_spec
from lieloc.equivariant import LieAlgebraAction
from lieloc.geometry import DegreeError
from lieloc.localization import verify_localization
from lieloc.twisted import TwistedCochain, pairing_integral, twisted_from_q
from lieloc.algebroid import ACochain
from lieloc.expr import parse_expr


def test_total_weight():
    assert total_weight(WeightedPoly.monomial(())) == 0
    assert total_weight("x1^2") == 8
    assert total_weight("l2*l4") == 12
    assert total_weight("x1*x2") == 12
    with pytest.raises(PhiError):
        total_weight("x1 + x2")


def test_parse_errors():
    for bad in ("", "x1 +", "l3", "x0", "y1", "x1^-1"):
        with pytest.raises(PhiError):
            parse_phi(bad)
    assert str(parse_phi("2*x1 + x1")) == "3*x1"


def test_chern_of_endomorphism_examples():
    lam = 1.7
    R = np.array([[0.0, lam], [-lam, 0.0]])
    assert chern_of_endomorphism(R, 0) == 1.0
    assert chern_of_endomorphism(R, 1) == pytest.approx(0.0)
    assert chern_of_endomorphism(R, 2) == pytest.approx(lam**2)
    B = np.zeros((4, 4))
    B[0, 1], B[1, 0], B[2, 3], B[3, 2] = 1.0, -1.0, 2.0, -2.0
    assert chern_of_endomorphism(B, 2) == pytest.approx(5.0)
    assert chern_of_endomorphism(B, 4) == pytest.approx(4.0)
    assert chern_of_endomorphism(B, 5) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_chern_classes_are_elementary_symmetric_in_eigenvalues(n, seed):
    L = np.random.default_rng(seed).normal(size=(n, n))
    ev = np.linalg.eigvals(L)
    for i in range(n + 1):
        e = sum(np.prod([ev[j] for j in S]) for S in _subsets(n, i))
        assert chern_of_endomorphism(L, i) == pytest.approx(float(np.real(e)), abs=1e-9)


def _subsets(n, k):
    import itertools

    return itertools.combinations(range(n), k)


def test_phi_number_reductions(s2, s2xs2):
    conn = connection_from_spec(s2)
    vol = twisted_from_q(s2.algebroid, {"sph": "sin(th)"})
    one = ACochain(2, {ch: {(): parse_expr("1")} for ch in s2.algebroid.charts})
    want = pairing_integral(s2.algebroid, one, vol) / (-2 * math.pi)
    assert phi_number(conn, "1", vol) == pytest.approx(want, rel=1e-12)
    # flat connection on S^2 x S^2 has vanishing classes
    A = s2xs2.algebroid
    flat = AConnectionModel(A, 4, {"sph2": [[["0"] * 4 for _ in range(4)] for _ in range(4)]})
    unit = TwistedCochain(4, {"sph2": {(): parse_expr("1")}})
    assert phi_number(flat, "x1", unit, check_closed=False) == 0.0
    with pytest.raises(DegreeError):
        phi_number(connection_from_spec(s2xs2), "x1", s2xs2.cocycle(np.zeros(2)))
    with pytest.raises(PhiError):
        phi_number(conn, "x1", vol)


def test_phi_equivariant_at_zero_and_for_trivial_actions(s2xs2):
    conn = connection_from_spec(s2xs2)
    act = s2xs2.action
    g = s2xs2.cocycle
    base = phi_number(conn, "1", g(np.zeros(2)))
    assert phi_equivariant(conn, act, "1", g, [0.0, 0.0]) == pytest.approx(base, abs=1e-12)
    A = s2xs2.algebroid
    trivial = LieAlgebraAction(A, 2, {ch: [["0"] * 4, ["0"] * 4] for ch in A.charts})
    unit = TwistedCochain(4, {ch: {(): parse_expr("1")} for ch in A.charts if ch == "sph2"})
    for xi in ([0.3, -1.1], [2.0, 0.5]):
        assert phi_equivariant(conn, trivial, "x1", unit, xi) == pytest.approx(phi_number(conn, "x1", unit, check_closed=False), abs=1e-12)


def test_bott_on_the_product_of_spheres(s2xs2):
    """p_1 of S^2 x S^2 vanishes; the pole residues are c_2(L)/Pf(L) = 5/(+-2)."""
    conn = connection_from_spec(s2xs2)
    unit = TwistedCochain(4, {ch: {(): parse_expr("1")} for ch in s2xs2.algebroid.charts})
    rep = verify_bott(conn, s2xs2.action, [1.0, 2.0], "x1", unit, s2xs2.fresh_fixed_points())
    assert rep["pass"] and len(rep["terms"]) == 4
    assert sorted(t["contribution"] for t in rep["terms"]) == pytest.approx([-2.5, -2.5, 2.5, 2.5])
    assert all(t["chern"] == pytest.approx([5.0]) for t in rep["terms"])
    assert abs(rep["lhs"]) <= 1e-7 and rep["rhs"] == pytest.approx(math.fsum(t["contribution"] for t in rep["terms"]))
    assert all(t["curvature_identity_gap"] <= 1e-8 for t in rep["terms"])


@pytest.mark.parametrize("name,xi", [("s2-tangent-rotation", [1.0]), ("s2xs2-tangent", [1.0, 2.0])])
def test_phi_one_reduces_to_localization(name, xi):
    from lieloc.specfile import load_builtin

    spec = load_builtin(name)
    m = spec.manifold.dim
    loc = verify_localization(spec.action, spec.cocycle, xi, spec.fresh_fixed_points())
    bott = verify_bott(connection_from_spec(spec), spec.action, xi, "1", spec.cocycle, spec.fresh_fixed_points())
    scale = (-2 * math.pi) ** (m / 2)
    assert bott["pass"] and loc["pass"]
    assert bott["lhs"] * scale == pytest.approx(loc["lhs"], rel=1e-9)
    assert bott["rhs"] * scale == pytest.approx(loc["rhs"], rel=1e-9)


def test_classical_two_pole_sum(s2):
    """Area of the round sphere from the poles: 2 * (2 pi lam cos) / lam."""
    lam = 1.3
    rep = verify_bott(connection_from_spec(s2), s2.action, [lam], "1", s2.cocycle, s2.fresh_fixed_points())
    classical = (4 * math.pi) / (-2 * math.pi)
    assert rep["rhs"] == pytest.approx(classical, rel=1e-12)
    assert rep["lhs"] == pytest.approx(classical, rel=1e-9)


def test_bott_rejects_non_invariant_connections(poisson):
    from lieloc.connection import from_ordinary_connection, levi_civita

    A = poisson.algebroid
    conn = from_ordinary_connection(A, levi_civita(A.manifold, {ch: g for ch, g in poisson.metric.items() if ch in A.anchor}))
    with pytest.raises(PhiError):
        verify_bott(conn, poisson.action, poisson.xi, "1", poisson.cocycle, poisson.fresh_fixed_points())
