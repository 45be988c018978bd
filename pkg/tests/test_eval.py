from __future__ import annotations

import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgfoil.airfoil import NacaCode, flatten, naca4
from pgfoil.cae import PanelOracle
from pgfoil.eval import (EvalReport, SampleRecord, compare_models, evaluate_generator, evaluate_shapes,
                         sample_labels, scatter_export, write_report)
from pgfoil.nn import MlpParams, init_mlp

from stubs import ConstantOracle, ThicknessOracle


def perfect_generator(latent_dim: int = 4) -> MlpParams:
    """Linear generator whose thickness (and so the stub's C_L) equals the label."""
    base = naca4(NacaCode(0, 0, 12))
    w = np.zeros((latent_dim + 1, 496))
    w[-1, 248:] = base.y / (5.0 * np.ptp(base.y))
    b = np.concatenate([base.x, np.zeros(248)])
    return MlpParams((w,), (b,), ("linear",))


def test_perfect_generator_scores_perfectly():
    rep = evaluate_generator(perfect_generator(), (0.2, 1.5), 50, ThicknessOracle())
    assert rep.success_rate == 1.0 and rep.failure_rate == 0.0 and rep.not_converged_rate == 0.0
    assert rep.mae < 1e-12
    assert abs(rep.mean_phi - 2 * np.pi) < 1e-9


def test_all_not_converged_has_no_mae():
    rep = evaluate_generator(perfect_generator(), (0.2, 1.5), 10, ConstantOracle(None))
    assert rep.mae is None and rep.not_converged_rate == 1.0
    assert "n/a" in rep.summary()


def test_rates_and_mae_by_hand():
    recs = [SampleRecord(0.6, 0.62, None, 1.0), SampleRecord(0.6, 0.8, None, 2.0),
            SampleRecord(0.7, None, "solver", 3.0), SampleRecord(0.7, 0.7, None, float("nan"))]
    rep = EvalReport.from_records(recs)
    assert (rep.success_rate, rep.failure_rate, rep.not_converged_rate) == (0.5, 0.25, 0.25)
    assert rep.mae == pytest.approx((0.02 + 0.2 + 0.0) / 3)
    assert rep.mean_phi == pytest.approx(2.0)
    strict = rep.with_threshold(0.01)
    assert strict.success_rate == 0.25 and strict.failure_rate == 0.5
    with pytest.raises(ValueError):
        EvalReport.from_records([])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.one_of(st.none(), st.floats(-1, 3)), min_size=1, max_size=30), st.floats(0.001, 0.5))
def test_rates_sum_to_one(cls, thr):
    recs = [SampleRecord(0.6, c, None if c is not None else "solver", 6.3) for c in cls]
    rep = EvalReport.from_records(recs, thr)
    assert rep.success_rate + rep.failure_rate + rep.not_converged_rate == pytest.approx(1.0)
    if rep.mae is not None:
        assert rep.mae >= 0


def test_untrained_generator_mostly_not_converged():
    gen = init_mlp([11, 32, 32, 496], seed=0)
    rep = evaluate_generator(gen, (0.01, 1.58), 40, PanelOracle())
    assert rep.not_converged_rate >= 0.95


def test_sample_labels():
    rng = np.random.default_rng(0)
    r = sample_labels((0.5, 0.7), 100, rng)
    assert r.min() >= 0.5 and r.max() <= 0.7
    assert sample_labels([0.6, 0.7], 5, rng).tolist() == [0.6, 0.7, 0.6, 0.7, 0.6]
    with pytest.raises(ValueError):
        sample_labels((0.7, 0.5), 3, rng)
    with pytest.raises(ValueError):
        sample_labels([], 3, rng)


def test_evaluate_generator_deterministic_and_validates():
    a = evaluate_generator(perfect_generator(), (0.2, 1.5), 8, ThicknessOracle(), seed=5)
    b = evaluate_generator(perfect_generator(), (0.2, 1.5), 8, ThicknessOracle(), seed=5)
    assert a.shapes.tobytes() == b.shapes.tobytes()
    with pytest.raises(ValueError):
        evaluate_generator(perfect_generator(), (0.2, 1.5), 0, ThicknessOracle())
    with pytest.raises(ValueError):
        evaluate_generator(perfect_generator(), (0.2, 1.5), 3, None)


def test_evaluate_shapes_parallel_matches():
    shapes = np.stack([flatten(naca4(NacaCode(m, 4, 12))) for m in range(6)])
    t = np.full(6, 0.8)
    a = evaluate_shapes(shapes, t, PanelOracle(), parallel=1)
    b = evaluate_shapes(shapes, t, PanelOracle(), parallel=3)
    assert a.records == b.records


def test_scatter_export(tmp_path):
    rep = evaluate_generator(perfect_generator(), (0.2, 1.5), 12, ThicknessOracle())
    csv_path, svg_path = scatter_export(rep, tmp_path / "scatter.csv")
    rows = list(csv.reader(open(csv_path)))
    assert rows[0] == ["target_cl", "cl"] and len(rows) == 13
    assert all(abs(float(a) - float(b)) < 1e-12 for a, b in rows[1:])
    assert svg_path.read_text().startswith("<svg")
    empty = evaluate_generator(perfect_generator(), (0.2, 1.5), 3, ConstantOracle(None))
    csv2, _ = scatter_export(empty, tmp_path / "empty")
    assert csv2.read_text() == "target_cl,cl\n"


def test_compare_models(tmp_path):
    rep = evaluate_generator(perfect_generator(), (0.2, 1.5), 5, ThicknessOracle())
    txt, csv_path = compare_models([("convex", rep)], tmp_path / "cmp")
    lines = txt.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2 and "2.00π" in lines[1]
    rows = list(csv.DictReader(open(csv_path)))
    assert len(rows) == 1 and rows[0]["model"] == "convex" and float(rows[0]["success_pct"]) == 100.0
    txt2, _ = compare_models([("a", rep), ("b", rep)], tmp_path / "cmp2")
    assert len(txt2.read_text(encoding="utf-8").splitlines()) == 3


def test_write_report(tmp_path):
    rep = evaluate_generator(perfect_generator(), (0.2, 1.5), 4, ThicknessOracle())
    write_report(rep, tmp_path)
    assert "success         100.00 %" in (tmp_path / "summary.txt").read_text()
    assert len((tmp_path / "samples.csv").read_text().splitlines()) == 5
