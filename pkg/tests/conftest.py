from __future__ import annotations

import numpy as np
import pytest

from pgfoil.autodiff import Graph


def central_diff(fn, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar numpy function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        up, dn = x.copy(), x.copy()
        up[i] += h
        dn[i] -= h
        out[i] = (fn(up) - fn(dn)) / (2 * h)
    return out


def rel_err(auto, ref) -> float:
    auto, ref = np.asarray(auto), np.asarray(ref)
    return float(np.max(np.abs(auto - ref) / (np.abs(ref) + 1e-8), initial=0.0))


def scalar_of(build):
    """Wrap ``build(graph, var) -> node`` as a plain float function of an array."""

    def fn(x):
        g = Graph()
        return float(build(g, g.variable(x)).value)

    return fn


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def assert_grad_close(auto, ref, rtol: float, atol: float = 1e-9) -> None:
    """Relative check with an absolute floor so exact zeros are not judged against FD noise."""
    np.testing.assert_allclose(np.asarray(auto).reshape(np.shape(ref)), ref, rtol=rtol, atol=atol)


# acceptance results, printed once at the end of the session
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
