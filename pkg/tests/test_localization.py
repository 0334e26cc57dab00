import itertools
import math

import numpy as np
import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from lieloc.algebroid import custom_algebroid
from lieloc.equivariant import EquivTwistedCochain, LieAlgebraAction, delta_g_twisted
from lieloc.expr import parse_expr
from lieloc.localization import (
    FixedPointError,
    FixedPointRecord,
    linearization,
    localization_lhs,
    localization_rhs,
    pfaffian,
    sqrt_det,
    validate_fixed_points,
    verify_localization,
)
from lieloc.specfile import builtin_names, load_builtin, load_spec
from lieloc.twisted import TwistedCochain


def pf_by_permutations(a):
    """Pfaffian from its defining sum over all permutations."""
    n = a.shape[0]
    k = n // 2
    total = 0.0
    for perm in itertools.permutations(range(n)):
        sign = np.linalg.det(np.eye(n)[list(perm)])
        prod = 1.0
        for i in range(k):
            prod *= a[perm[2 * i], perm[2 * i + 1]]
        total += sign * prod
    return total / (2 ** k * math.factorial(k))


# fixed points ---------------------------------------------------------------


def test_rotation_poles_validate_with_expected_linearization(s2):
    act = s2.action
    lam = 1.7
    recs = s2.fresh_fixed_points()
    rep = validate_fixed_points(act, [lam], recs)
    assert [p["label"] for p in rep["points"]] == ["N", "S"]
    # xi* = lam (-v, u) in the north chart, so L = -d(xi*) = lam [[0, 1], [-1, 0]]
    assert np.allclose(recs[0].L, lam * np.array([[0.0, 1.0], [-1.0, 0.0]]))
    assert np.allclose(recs[0].L, linearization(act, [lam], "north", (0.0, 0.0)))


def test_empty_fixed_set_is_accepted(t2):
    assert validate_fixed_points(t2.action, [0.9], [])["points"] == []
    assert localization_rhs(t2.action, [0.9], t2.cocycle, [])["value"] == 0.0


def test_bad_fixed_points_are_rejected(s2):
    act = s2.action
    with pytest.raises(FixedPointError):
        validate_fixed_points(act, [1.0], [FixedPointRecord("north", (0.3, 0.0))])
    with pytest.raises(FixedPointError):
        validate_fixed_points(act, [1.0], [FixedPointRecord("north", (0.0, 0.0), L=np.eye(2))])
    # at xi = 0 every point is a degenerate zero
    with pytest.raises(FixedPointError):
        validate_fixed_points(act, [0.0], [FixedPointRecord("north", (0.0, 0.0))])


# square-root determinant ------------------------------------------------------


def test_sqrt_det_examples():
    lam = 2.5
    L = np.array([[0.0, -lam], [lam, 0.0]])
    assert sqrt_det(FixedPointRecord("c", (0.0, 0.0), L=L)) == pytest.approx(-lam)
    assert sqrt_det(FixedPointRecord("c", (0.0, 0.0), L=L, orientation=-1)) == pytest.approx(lam)
    l1, l2 = 1.5, -0.7
    B = np.zeros((4, 4))
    B[0, 1], B[1, 0], B[2, 3], B[3, 2] = l1, -l1, l2, -l2
    rec = FixedPointRecord("c", (0.0,) * 4, L=B)
    assert sqrt_det(rec) == pytest.approx(l1 * l2)
    assert pf_by_permutations(B) == pytest.approx(l1 * l2)


def test_sqrt_det_uses_an_orthonormal_frame():
    # metric diag(4, 1): L skew for g means g L is antisymmetric
    g = np.diag([4.0, 1.0])
    L = np.array([[0.0, 0.5], [-2.0, 0.0]])
    rec = FixedPointRecord("c", (0.0, 0.0), L=L, metric=g)
    assert sqrt_det(rec) ** 2 == pytest.approx(np.linalg.det(L))
    with pytest.raises(FixedPointError):
        sqrt_det(FixedPointRecord("c", (0.0, 0.0), L=L))
    with pytest.raises(FixedPointError):
        sqrt_det(FixedPointRecord("c", (0.0, 0.0), L=L, metric=np.diag([1.0, -1.0])))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([2, 4, 6]), st.integers(0, 2**31 - 1))
def test_pfaffian_matches_definition_and_squares_to_det(n, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, n))
    a = X - X.T
    pf = pfaffian(a)
    assert pf ** 2 == pytest.approx(np.linalg.det(a), rel=1e-9, abs=1e-12)
    if n <= 4:
        assert pf == pytest.approx(pf_by_permutations(a), rel=1e-9, abs=1e-12)
    # sqrt_det with a random SPD metric
    C = np.tril(rng.normal(size=(n, n))) + n * np.eye(n)
    g = C @ C.T
    L = np.linalg.solve(g, a)
    s = sqrt_det(FixedPointRecord("c", (0.0,) * n, L=L, metric=g))
    assert s ** 2 == pytest.approx(np.linalg.det(L), rel=1e-9, abs=1e-12)


# both sides ---------------------------------------------------------------------


def test_sphere_area_both_sides(s2):
    rep = verify_localization(s2.action, s2.cocycle, [1.3], s2.fresh_fixed_points())
    assert rep["pass"] and rep["rel_diff"] <= 1e-6
    assert rep["lhs"] == pytest.approx(4 * math.pi, rel=1e-9)


def test_lhs_converges_under_refinement(s2):
    a = localization_lhs(s2.action, s2.cocycle, [1.3], order=32)["value"]
    b = localization_lhs(s2.action, s2.cocycle, [1.3], order=64)["value"]
    assert abs(a - b) <= 1e-9 * abs(b)


def test_torus_both_sides_vanish(t2):
    rep = verify_localization(t2.action, t2.cocycle, [0.9], [])
    assert rep["pass"] and rep["rhs"] == 0.0 and abs(rep["lhs"]) <= 1e-7


def test_poisson_poles_contribute_nothing(poisson):
    rep = localization_rhs(poisson.action, poisson.xi, poisson.cocycle, poisson.fresh_fixed_points())
    assert rep["value"] == 0.0
    assert all(t["numerator"] == 0.0 for t in rep["terms"])


def test_atiyah_rank_above_dimension(atiyah):
    A = atiyah.algebroid
    assert A.rank > A.manifold.dim
    rep = verify_localization(atiyah.action, atiyah.cocycle, atiyah.xi, atiyah.fresh_fixed_points())
    assert rep["pass"] and rep["rel_diff"] <= 1e-5


def test_rank_below_dimension_vanishes(s2):
    M = s2.manifold
    A = custom_algebroid(M, 1, {"sph": [["0", "1"]]})
    act = LieAlgebraAction(A, 1, {"sph": [["1"]]})
    g = EquivTwistedCochain(act, [("1", TwistedCochain(1, {"sph": {(0,): parse_expr("sin(th)")}}))])
    out = localization_lhs(act, g, [1.0])
    assert out["value"] == 0.0 and out["reason"]


def _invariant_one_cochain():
    # minus the metric dual of xi* so that p gives g(xi*, .)
    return TwistedCochain(
        2,
        {
            "sph": {(1,): parse_expr("-sin(th)^2")},
            "north": {(0,): parse_expr("4*v/(1 + u^2 + v^2)^2"), (1,): parse_expr("-4*u/(1 + u^2 + v^2)^2")},
            "south": {(0,): parse_expr("4*vs/(1 + us^2 + vs^2)^2"), (1,): parse_expr("-4*us/(1 + us^2 + vs^2)^2")},
        },
    )


def test_exact_cocycles_localize_to_zero_and_do_not_shift(s2):
    act, xi = s2.action, [1.3]
    exact = delta_g_twisted(act, _invariant_one_cochain(), xi)
    assert not exact.is_zero()
    rep = verify_localization(act, exact, xi, s2.fresh_fixed_points())
    assert abs(rep["lhs"]) <= 1e-6 and abs(rep["rhs"]) <= 1e-6
    base = verify_localization(act, s2.cocycle, xi, s2.fresh_fixed_points())
    shifted = verify_localization(act, s2.cocycle(xi) + exact.scale(0.8), xi, s2.fresh_fixed_points())
    assert shifted["lhs"] == pytest.approx(base["lhs"], abs=1e-6)
    assert shifted["rhs"] == pytest.approx(base["rhs"], abs=1e-6)


def test_rhs_does_not_depend_on_the_evaluation_chart():
    """Add a reflected copy of the north chart (opposite orientation) and
    evaluate the north pole there instead."""
    from importlib import resources

    doc = yaml.safe_load(resources.files("lieloc").joinpath("builtins/s2-tangent-rotation.yaml").read_text())
    doc["manifold"]["charts"].append(
        {"id": "refl", "coords": ["p", "q"], "roles": ["evaluation"], "sample_box": [[-1.5, 1.5], [-1.5, 1.5]], "orientation": -1}
    )
    doc["manifold"]["transitions"].append({"source": "north", "target": "refl", "map": ["v", "u"], "region": [[-1, 1], [-1, 1]]})
    doc["metric"]["refl"] = [["4/(1 + p^2 + q^2)^2", "0"], ["0", "4/(1 + p^2 + q^2)^2"]]
    doc["action"]["b"]["refl"] = [["q", "-p"]]
    doc["action"]["fundamental"]["refl"] = [["q", "-p"]]
    area = doc["cocycles"]["area"]["terms"]
    area[0]["coeffs"]["refl"] = {"0,1": "-4/(1 + p^2 + q^2)^2"}
    area[1]["coeffs"]["refl"] = {"": "(1 - p^2 - q^2)/(1 + p^2 + q^2)"}
    for key in ("functions",):
        doc["random"][key]["refl"] = ["2*q/(1 + p^2 + q^2)", "2*p/(1 + p^2 + q^2)", "(1 - p^2 - q^2)/(1 + p^2 + q^2)"]
    doc["random"]["twist"]["refl"] = "1"
    doc["action"]["fixed_points"] = [
        {"label": "N", "chart": "refl", "coords": [0, 0]},
        {"label": "S", "chart": "south", "coords": [0, 0]},
    ]
    spec = load_spec(yaml.safe_dump(doc), name="s2-reflected")
    base = load_builtin("s2-tangent-rotation")
    xi = [1.3]
    a = localization_rhs(base.action, xi, base.cocycle, base.fresh_fixed_points())
    b = localization_rhs(spec.action, xi, spec.cocycle, spec.fresh_fixed_points())
    assert b["value"] == pytest.approx(a["value"], abs=1e-9)
    assert b["terms"][0]["contribution"] == pytest.approx(a["terms"][0]["contribution"], abs=1e-9)


@pytest.mark.parametrize("name", [n for n in builtin_names() if load_builtin(n).cocycles])
def test_builtin_localization(name):
    spec = load_builtin(name)
    rep = verify_localization(spec.action, spec.cocycle, spec.xi, spec.fresh_fixed_points())
    assert rep["pass"]
    if spec.expected.get("lhs") is not None:
        assert rep["lhs"] == pytest.approx(spec.expected["lhs"], abs=1e-7, rel=1e-8)
