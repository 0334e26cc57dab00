import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lieloc.expr import (
    ParseError,
    Point,
    SingularEvaluationError,
    UnboundParameterError,
    UnknownSymbolError,
    evaluate,
    evaluate_at,
    parse_expr,
    partial,
    substitute,
    to_string,
)

SYMS = ("th", "ph")


def test_parse_valid_expressions():
    e = parse_expr("sin(th)*cos(ph)", SYMS)
    assert e.free_symbols == {"th", "ph"}
    p = parse_expr("th^2 + 3", SYMS)
    assert evaluate(p, {"th": 2.0}) == pytest.approx(7.0)


def test_unknown_symbol_reports_position():
    with pytest.raises(UnknownSymbolError) as info:
        parse_expr("sin(q)", ("th",))
    assert info.value.position == 4


@pytest.mark.parametrize("bad", ["sin(th", "th +", "th ^ 1.5", "2 $ th", ")"])
def test_syntax_errors(bad):
    with pytest.raises(ParseError):
        parse_expr(bad, SYMS)


def test_partial_basic_identities():
    th = "th"
    assert evaluate(partial(parse_expr("sin(th)"), th), {"th": 0.3}) == pytest.approx(math.cos(0.3))
    assert partial(parse_expr("th^2"), "ph").is_zero
    d = partial(parse_expr("th*cos(th)"), th)
    fd = (0.0 + 1e-6) * math.cos(1e-6) - (-1e-6) * math.cos(-1e-6)
    assert evaluate(d, {"th": 0.0}) == pytest.approx(fd / 2e-6, abs=1e-9)
    assert evaluate(d, {"th": 0.0}) == pytest.approx(1.0)


def test_evaluation_examples_and_errors():
    assert evaluate_at(parse_expr("sin(th)"), ["th"], Point("c", [math.pi / 2])) == pytest.approx(1.0)
    lam = parse_expr("lam*cos(th)")
    assert evaluate_at(lam, ["th"], Point("c", [0.0]), {"lam": 2.0}) == pytest.approx(2.0)
    with pytest.raises(UnboundParameterError):
        evaluate(lam, {"th": 0.0})
    with pytest.raises(SingularEvaluationError):
        evaluate(parse_expr("1/th"), {"th": 0.0})
    with pytest.raises(SingularEvaluationError):
        evaluate(parse_expr("sqrt(th)"), {"th": -1.0})


def test_constant_overflow_is_a_parse_error():
    with pytest.raises(ParseError):
        parse_expr("exp(exp(10))")


def test_substitute_composes():
    e = parse_expr("th^2 + ph")
    s = substitute(e, {"th": parse_expr("2*ph")})
    assert evaluate(s, {"ph": 1.5}) == pytest.approx(4 * 2.25 + 1.5)


# random expressions ----------------------------------------------------------

_leaf = st.one_of(
    st.sampled_from(["th", "ph"]),
    st.integers(1, 5).map(str),
    st.floats(0.1, 3.0).map(lambda v: f"{v:.3f}"),
)


def _grow(children):
    return st.one_of(
        st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        st.tuples(st.sampled_from(["sin", "cos"]), children).map(lambda t: f"{t[0]}({t[1]})"),
        children.map(lambda c: f"exp(0.3*sin({c}))"),
        children.map(lambda c: f"({c})^2"),
        children.map(lambda c: f"({c})/(2 + sin({c}))"),
        children.map(lambda c: f"sqrt(1 + ({c})^2)"),
    )


expressions = st.recursive(_leaf, _grow, max_leaves=12)


@settings(max_examples=150, deadline=None)
@given(expressions, st.sampled_from(["th", "ph"]), st.integers(0, 2**31 - 1))
def test_derivative_matches_finite_difference(src, var, seed):
    e = parse_expr(src, SYMS)
    rng = np.random.default_rng(seed)
    env = {"th": rng.uniform(-1.5, 1.5, 8), "ph": rng.uniform(-1.5, 1.5, 8)}
    h = 1e-5
    up = dict(env, **{var: env[var] + h})
    dn = dict(env, **{var: env[var] - h})
    fd = (np.broadcast_to(evaluate(e, up), (8,)) - np.broadcast_to(evaluate(e, dn), (8,))) / (2 * h)
    exact = np.broadcast_to(evaluate(partial(e, var), env), (8,))
    assert np.all(np.abs(exact - fd) <= 1e-6 * (1 + np.abs(exact)) + 1e-5 * np.abs(fd))


@settings(max_examples=150, deadline=None)
@given(expressions)
def test_print_parse_is_idempotent(src):
    once = parse_expr(src, SYMS)
    text = to_string(once)
    again = parse_expr(text, SYMS)
    assert to_string(again) == text
    env = {"th": np.linspace(-1, 1, 5), "ph": np.linspace(0.2, 1.1, 5)}
    assert np.allclose(evaluate(once, env), evaluate(again, env), rtol=1e-12, atol=1e-12)
