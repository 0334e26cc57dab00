import math

import numpy as np
import pytest

from lieloc.expr import evaluate, parse_expr
from lieloc.geometry import (
    DegreeError,
    DiffForm,
    VectorField,
    exterior_derivative,
    integrate_top_form,
    interior_product,
    lie_derivative,
    transition_consistency_check,
)

from conftest import max_abs


def form(dim, chart, coeffs):
    return DiffForm(dim, {chart: {k: parse_expr(v) for k, v in coeffs.items()}})


def test_exterior_derivative_examples(s2):
    M = s2.manifold
    assert exterior_derivative(M, form(2, "sph", {(): "3"})).is_zero()
    d = exterior_derivative(M, form(2, "sph", {(): "cos(th)"}))
    assert set(d.coeffs("sph")) == {(0,)}
    assert evaluate(d.coeffs("sph")[(0,)], {"th": 0.4}) == pytest.approx(-math.sin(0.4))
    assert exterior_derivative(M, form(2, "sph", {(0, 1): "sin(th)*ph"})).is_zero()


def test_d_squared_vanishes(s2):
    M = s2.manifold
    w = form(2, "north", {(): "u^3*exp(v)/(1 + u^2)"})
    assert max_abs(M, exterior_derivative(M, exterior_derivative(M, w)), samples=200) <= 1e-9
    w1 = form(2, "sph", {(0,): "sin(ph)*th^2", (1,): "cos(th)*sin(2*ph)"})
    assert max_abs(M, exterior_derivative(M, exterior_derivative(M, w1)), samples=200) <= 1e-9


def test_interior_product_examples(s2):
    dph = VectorField(2, {"sph": ["0", "1"]})
    dth = VectorField(2, {"sph": ["1", "0"]})
    area = form(2, "sph", {(0, 1): "1"})
    out = interior_product(dph, area).coeffs("sph")
    assert set(out) == {(0,)} and evaluate(out[(0,)], {}) == -1.0
    out = interior_product(dth, form(2, "sph", {(0, 1): "sin(th)"})).coeffs("sph")
    assert set(out) == {(1,)} and evaluate(out[(1,)], {"th": 0.7}) == pytest.approx(math.sin(0.7))
    with pytest.raises(DegreeError):
        interior_product(dph, form(2, "sph", {(): "th"}))
    X = VectorField(2, {"sph": ["sin(ph)", "th"]})
    twice = interior_product(X, interior_product(X, form(2, "sph", {(0, 1): "cos(th)"})))
    assert max_abs(s2.manifold, twice) <= 1e-12


def test_integration_examples(s2, t2):
    area = form(2, "sph", {(0, 1): "sin(th)"})
    v32 = integrate_top_form(s2.manifold, area, order=32)
    assert v32 == pytest.approx(4 * math.pi, abs=1e-8)
    assert abs(integrate_top_form(s2.manifold, area, order=64) - v32) <= 1e-7 * 4 * math.pi
    assert integrate_top_form(s2.manifold, DiffForm(2, {"sph": {}})) == 0.0
    flat = DiffForm(2, {"flat": {(0, 1): parse_expr("1")}})
    assert integrate_top_form(t2.manifold, flat) == pytest.approx((2 * math.pi) ** 2, rel=1e-12)
    with pytest.raises(DegreeError):
        integrate_top_form(s2.manifold, form(2, "sph", {(0,): "1"}))


def test_integration_is_deterministic(s2):
    w = form(2, "sph", {(0, 1): "sin(th)*cos(th)^2*(1 + sin(ph))"})
    assert integrate_top_form(s2.manifold, w) == integrate_top_form(s2.manifold, w)


def test_transition_check_on_rotation_field(s2):
    M = s2.manifold
    X = VectorField(2, {"sph": ["0", "1"], "north": ["-v", "u"], "south": ["-vs", "us"]})
    rep = transition_consistency_check(M, X)
    assert rep and max(rep.values()) < 1e-9
    bad = VectorField(2, {"sph": ["0", "1"], "north": ["-v", "1.1*u"], "south": ["-vs", "us"]})
    assert max(transition_consistency_check(M, bad).values()) > 1e-3
    single = VectorField(2, {"sph": ["0", "1"]})
    assert transition_consistency_check(M, single) == {}


def _flow(field, x, t, steps=20):
    h = t / steps
    x = np.array(x, dtype=float)
    for _ in range(steps):
        k1 = field(x)
        k2 = field(x + 0.5 * h * k1)
        k3 = field(x + 0.5 * h * k2)
        k4 = field(x + h * k3)
        x = x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
    return x


def test_cartan_formula_matches_flow_pullback(s2):
    """``L_X w`` against a centred difference of the pulled-back form."""
    M = s2.manifold
    Xs = ["sin(u)*v", "1 + u^2"]
    X = VectorField(2, {"north": Xs})
    Xe = [parse_expr(c) for c in Xs]

    def field(p):
        env = {"u": p[0], "v": p[1]}
        return np.array([float(evaluate(c, env)) for c in Xe])

    w = form(2, "north", {(0,): "u*v^2", (1,): "sin(u) + v"})
    comps = [w.coeffs("north")[(0,)], w.coeffs("north")[(1,)]]
    L = lie_derivative(M, X, w).coeffs("north")

    def pulled(p, t, eps=1e-5):
        q = _flow(field, p, t)
        J = np.empty((2, 2))
        for i in range(2):
            e = np.zeros(2)
            e[i] = eps
            J[:, i] = (_flow(field, p + e, t) - _flow(field, p - e, t)) / (2 * eps)
        wq = np.array([float(evaluate(c, {"u": q[0], "v": q[1]})) for c in comps])
        return wq @ J

    rng = np.random.default_rng(3)
    for _ in range(5):
        p = rng.uniform(-0.8, 0.8, 2)
        h = 1e-3
        fd = (pulled(p, h) - pulled(p, -h)) / (2 * h)
        exact = [float(evaluate(L.get((i,), parse_expr("0")), {"u": p[0], "v": p[1]})) for i in range(2)]
        assert np.allclose(fd, exact, atol=1e-5)
