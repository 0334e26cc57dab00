import numpy as np
import pytest

from lieloc.expr import evaluate
from lieloc.geometry import sample_points
from lieloc.specfile import load_builtin


@pytest.fixture(scope="session")
def s2():
    return load_builtin("s2-tangent-rotation")


@pytest.fixture(scope="session")
def s2xs2():
    return load_builtin("s2xs2-tangent")


@pytest.fixture(scope="session")
def t2():
    return load_builtin("t2-tangent-translation")


@pytest.fixture(scope="session")
def poisson():
    return load_builtin("s2-poisson")


@pytest.fixture(scope="session")
def atiyah():
    return load_builtin("s2-atiyah-line")


@pytest.fixture(scope="session")
def su2():
    return load_builtin("su2-point")


def max_abs(M, obj, samples=50, seed=0):
    """Largest coefficient of an alternating object at random chart points."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for ch, co in obj.data.items():
        chart = M.chart(ch)
        env = sample_points(chart, samples, rng) if chart.dim else {}
        for v in co.values():
            worst = max(worst, float(np.max(np.abs(np.asarray(evaluate(v, env), dtype=float)))))
    return worst


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
