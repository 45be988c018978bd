from __future__ import annotations

import os
import stat
import sys
import textwrap

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgfoil.airfoil import Airfoil, NacaCode, naca4, zigzag
from pgfoil.cae import (CountingOracle, FlowConditions, OracleResult, PanelOracle, XfoilOracle,
                        batch_evaluate, make_oracle, panel_evaluate, xfoil_evaluate)
from pgfoil.cae import base
from pgfoil.cae.panel import self_intersects, signed_area
from pgfoil.cae.xfoil import command_stream, parse_polar

INVISCID = FlowConditions(angle_of_attack=5.0)


def joukowski(mx: float, my: float, n: int = 248):
    """Joukowski section (chord-normalized) and its exact inviscid lift slope factors."""
    a = np.hypot(1 + mx, my)
    c0 = complex(-mx, my)
    t = np.angle(1 - c0) + 2 * np.pi * np.arange(n) / (n - 1)
    zeta = c0 + a * np.exp(1j * t)
    z = zeta + 1 / zeta
    pts = np.column_stack([z.real, z.imag])
    lo, hi = pts[:, 0].min(), pts[:, 0].max()
    pts = (pts - [lo, 0.0]) / (hi - lo)
    return Airfoil(pts), a / (hi - lo), np.arcsin(my / a)


def joukowski_cl(mx, my, alpha_deg):
    _, a_over_c, beta = joukowski(mx, my)
    return 8 * np.pi * a_over_c * np.sin(np.radians(alpha_deg) + beta)


def test_result_contract():
    with pytest.raises(ValueError):
        OracleResult()
    with pytest.raises(ValueError):
        OracleResult(cl=1.0, reason="x")
    with pytest.raises(ValueError):
        OracleResult(cl=float("nan"))
    assert base.Converged(0.3).converged and not base.NotConverged("io").converged


def test_naca0012_zero_alpha_symmetric():
    r = panel_evaluate(naca4(NacaCode(0, 0, 12)), FlowConditions(angle_of_attack=0.0))
    assert r.converged and abs(r.cl) < 1e-6


def test_naca0012_five_degrees_near_thin_airfoil():
    r = panel_evaluate(naca4(NacaCode(0, 0, 12)), INVISCID)
    thin = 2 * np.pi * np.sin(np.radians(5.0))
    assert abs(r.cl - thin) / thin < 0.15


@pytest.mark.parametrize("alpha", [0.0, 5.0, 10.0])
def test_symmetric_joukowski_matches_exact(alpha):
    af, _, _ = joukowski(0.08, 0.0)
    r = panel_evaluate(af, FlowConditions(angle_of_attack=alpha))
    exact = joukowski_cl(0.08, 0.0, alpha)
    assert abs(r.cl - exact) <= 1e-3 * max(1.0, abs(exact))


@pytest.mark.parametrize("mx,my", [(0.1, 0.05), (0.05, 0.1)])
def test_cambered_joukowski_close_to_exact(mx, my):
    af, _, _ = joukowski(mx, my)
    r = panel_evaluate(af, INVISCID)
    exact = joukowski_cl(mx, my, 5.0)
    # the cusped trailing edge is the hardest case for a panel method
    assert abs(r.cl - exact) / exact < 0.05


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 12.0), st.sampled_from(["0012", "0009", "0021"]))
def test_symmetric_sections_antisymmetric_in_alpha(alpha, code):
    af = naca4(NacaCode.parse(code))
    up = panel_evaluate(af, FlowConditions(angle_of_attack=alpha)).cl
    dn = panel_evaluate(af, FlowConditions(angle_of_attack=-alpha)).cl
    assert abs(up + dn) < 1e-9


def test_camber_raises_lift():
    sym = panel_evaluate(naca4(NacaCode(0, 0, 12)), INVISCID).cl
    cam = panel_evaluate(naca4(NacaCode(2, 4, 12)), INVISCID).cl
    assert cam > sym


def test_degenerate_flat_plate():
    r = panel_evaluate(naca4(NacaCode(0, 0, 0)), INVISCID)
    assert r.reason == base.DEGENERATE_PANEL


def test_zigzag_generator_like_shape_not_converged(rng):
    # noisy shapes like an untrained generator's cross over themselves
    af = naca4(NacaCode(2, 4, 12))
    noisy = Airfoil(af.points + rng.normal(scale=0.02, size=af.points.shape))
    assert panel_evaluate(noisy, INVISCID).reason == base.SELF_INTERSECTION


def test_mild_zigzag_still_solves():
    assert panel_evaluate(zigzag(naca4(NacaCode(0, 0, 12))), INVISCID).converged


def test_non_finite_input():
    pts = naca4(NacaCode(0, 0, 12)).points.copy()
    pts[5, 1] = np.nan
    assert not panel_evaluate(Airfoil(pts), INVISCID).converged


def test_geometry_helpers():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    assert signed_area(sq) == pytest.approx(1.0)
    assert not self_intersects(sq)
    bow = np.array([[0, 0], [1, 1], [1, 0], [0, 1]], dtype=float)
    assert self_intersects(bow)


def test_batch_order_and_parallel_purity():
    shapes = [naca4(NacaCode(m, 4, t)) for m in range(0, 10, 2) for t in range(6, 26)][:100]
    seq = [panel_evaluate(s, INVISCID) for s in shapes]
    assert batch_evaluate(shapes, INVISCID, PanelOracle(), 1) == seq
    assert batch_evaluate(shapes, INVISCID, PanelOracle(), 8) == seq
    assert batch_evaluate([], INVISCID, PanelOracle(), 4) == []
    with pytest.raises(ValueError):
        batch_evaluate(shapes, INVISCID, PanelOracle(), 0)


def test_counting_oracle():
    c = CountingOracle(PanelOracle())
    batch_evaluate([naca4(NacaCode(0, 0, 12))] * 7, INVISCID, c, 3)
    assert c.calls == 7


def test_make_oracle():
    assert isinstance(make_oracle("panel"), PanelOracle)
    assert isinstance(make_oracle("xfoil", "/nope"), XfoilOracle)
    with pytest.raises(ValueError):
        make_oracle("cfd")


def test_flow_conditions_validate():
    with pytest.raises(ValueError):
        FlowConditions(max_iterations=0)
    with pytest.raises(ValueError):
        FlowConditions(reynolds=0.0)


# --- XFoil adapter against a scripted stand-in executable -----------------

FAKE = textwrap.dedent("""\
    #!{python}
    import os, sys, time
    mode = os.environ.get("FAKE_XFOIL_MODE", "ok")
    stdin = sys.stdin.read()
    with open("stdin.log", "w") as fh:
        fh.write(stdin)
    lines = stdin.splitlines()
    polar = lines[lines.index("PACC") + 1]
    if mode == "sleep":
        time.sleep(5)
    if mode == "nopolar":
        sys.exit(0)
    with open(polar, "w") as fh:
        if mode == "garbage":
            fh.write("nothing useful here\\n")
        else:
            fh.write("   XFOIL  polar\\n\\n  alpha    CL        CD       CDp       CM\\n")
            fh.write(" ------- -------- --------- --------- --------\\n")
            if mode == "ok":
                fh.write("   5.000   0.8123   0.00712   0.00210  -0.0510\\n")
    """)


@pytest.fixture
def fake_xfoil(tmp_path):
    exe = tmp_path / "xfoil"
    exe.write_text(FAKE.format(python=sys.executable))
    exe.chmod(exe.stat().st_mode | stat.S_IEXEC)
    return str(exe)


@pytest.mark.parametrize("mode,expect", [("ok", 0.8123), ("empty", "solver"), ("nopolar", "parse"),
                                         ("garbage", "parse")])
def test_fake_xfoil_outcomes(fake_xfoil, monkeypatch, mode, expect):
    monkeypatch.setenv("FAKE_XFOIL_MODE", mode)
    r = xfoil_evaluate(naca4(NacaCode(2, 4, 12)), FlowConditions(), fake_xfoil)
    if isinstance(expect, float):
        assert r.cl == expect
    else:
        assert r.reason == expect


def test_fake_xfoil_timeout(fake_xfoil, monkeypatch):
    monkeypatch.setenv("FAKE_XFOIL_MODE", "sleep")
    r = xfoil_evaluate(naca4(NacaCode(0, 0, 12)), FlowConditions(), fake_xfoil, timeout=0.5)
    assert r.reason == base.TIMEOUT


def test_missing_executable_is_io(tmp_path):
    assert xfoil_evaluate(naca4(NacaCode(0, 0, 12)), FlowConditions(), str(tmp_path / "none")).reason == base.IO


def test_env_variable_resolves(fake_xfoil, monkeypatch):
    monkeypatch.setenv("PGFOIL_XFOIL", fake_xfoil)
    monkeypatch.setenv("FAKE_XFOIL_MODE", "ok")
    assert XfoilOracle().evaluate(naca4(NacaCode(0, 0, 12)), FlowConditions()).cl == 0.8123


def test_command_stream_contents():
    text = command_stream(FlowConditions(angle_of_attack=5.0, reynolds=3e6, max_iterations=100))
    lines = text.splitlines()
    assert "LOAD foil.dat" in lines and "VISC 3e+06" in lines and "ITER 100" in lines
    assert "ALFA 5" in lines and lines[-1] == "QUIT" and "PANE" not in lines
    inv = command_stream(FlowConditions(viscous=False), repanel=True)
    assert "PANE" in inv and "VISC" not in inv


def test_parse_polar_handles_reordered_columns():
    text = "  CL   alpha\n ---- ----\n 0.5  2.0\n"
    assert parse_polar(text) == 0.5
    assert parse_polar("alpha CL\n----- ---\n") is None
    with pytest.raises(ValueError):
        parse_polar("no header")


@pytest.mark.skipif(not os.environ.get("PGFOIL_XFOIL"), reason="needs a real XFoil (set PGFOIL_XFOIL)")
def test_real_xfoil_naca2412():
    r = XfoilOracle().evaluate(naca4(NacaCode(2, 4, 12)), FlowConditions())
    assert r.converged and 0 < r.cl < 2
