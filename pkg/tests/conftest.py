import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def cgauss(rng, n, scale=None):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return z / np.sqrt(2.0 * n) if scale is None else z * scale


def opnorm(x):
    """Operator norm; works on stacks."""
    return np.linalg.norm(x, 2, axis=(-2, -1))


def maxabs(x):
    return float(np.max(np.abs(x)))


@st.composite
def complex_matrices(draw, n=None, max_n=4, bound=2.0):
    """Hypothesis strategy: square complex matrices with bounded entries."""
    n = n or draw(st.integers(1, max_n))
    floats = st.floats(-bound, bound, allow_nan=False, allow_infinity=False)
    re = draw(st.lists(floats, min_size=n * n, max_size=n * n))
    im = draw(st.lists(floats, min_size=n * n, max_size=n * n))
    return (np.array(re) + 1j * np.array(im)).reshape(n, n)


@st.composite
def seeds(draw):
    return draw(st.integers(0, 2**32 - 1))


ACCEPTANCE_LINES = []


def record(criterion, title, checks):
    """Log one acceptance line; ``checks`` maps a label to ``(value, bound, ok)``."""
    ok = all(c[2] for c in checks.values())
    detail = "; ".join(f"{k}={v:.3g} (bound {b:g})" if isinstance(v, float) else f"{k}={v}"
                       for k, (v, b, _) in checks.items())
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
