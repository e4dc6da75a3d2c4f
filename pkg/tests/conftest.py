import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from choquard.grid import TensorGrid
from choquard.riesz import RieszOperator

settings.register_profile("default", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid3():
    return TensorGrid(3, 16, 2.0)


@pytest.fixture(scope="session")
def op3(grid3):
    return RieszOperator(grid3, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def smooth_random(grid, rng, corr=0.4, decay=0.8):
    """Smooth random field, damped towards the box faces."""
    import scipy.fft as sfft
    w = rng.standard_normal(grid.shape)
    f = sfft.irfftn(np.exp(-0.5 * corr**2 * grid.k2()) * sfft.rfftn(w), s=grid.shape)
    return f * np.exp(-grid.r2() / (2 * decay**2))


# --- acceptance summary -----------------------------------------------------

ACCEPTANCE = {}


def record(criterion, ok, detail):
    """Store one pass/fail line for the acceptance summary and echo it."""
    ACCEPTANCE.setdefault(criterion, []).append((bool(ok), detail))
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[k]
        ok = all(p[0] for p in parts)
        detail = "; ".join(p[1] for p in parts)
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
