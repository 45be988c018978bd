from __future__ import annotations

import csv
from dataclasses import replace

import numpy as np
import pytest

from pgfoil import checkpoint
from pgfoil.airfoil import NacaCode, flatten, naca4
from pgfoil.cae import CountingOracle, PanelOracle
from pgfoil.eval import evaluate_generator
from pgfoil.nn import Architecture
from pgfoil.training import (MetricLog, TrainConfig, TrainingDiverged, TrainState, new_state, pg_train_approx,
                             pg_train_exact, pretrain, start_phase)
from pgfoil.training.loops import CHECKPOINT_NAME, DIVERGED_NAME, METRICS_NAME

from stubs import ThicknessOracle

TINY = Architecture(g_hidden=(8,), d_hidden=(8,))


@pytest.fixture(scope="module")
def data():
    codes = [NacaCode(m, 4, t) for m in (0, 2, 4) for t in (8, 12, 16, 20)]
    x = np.stack([flatten(naca4(c)) for c in codes])
    y = np.array([5.0 * np.ptp(naca4(c).y) for c in codes])
    return x, y


def cfg(**kw):
    base = dict(arch=TINY, pretrain_iters=4, exact_iters_per_stage=2, approx_iters_per_stage=3,
                shapes_per_label=4, batch=4, n_critic=2, checkpoint_every=2, seed=3)
    base.update(kw)
    return TrainConfig(**base)


def ckpt_bytes(state: TrainState) -> bytes:
    return checkpoint.encode(state.to_tensors())


def test_state_roundtrip_bit_exact(tmp_path, data):
    st = pretrain(data, cfg())
    st.save(tmp_path / "a.ckpt")
    back = TrainState.load(tmp_path / "a.ckpt")
    assert ckpt_bytes(back) == ckpt_bytes(st)
    # the restored RNG continues the same stream
    assert back.rng.random() == st.rng.random()


def test_state_roundtrip_with_pools(tmp_path, data):
    st = pretrain(data, cfg())
    c = cfg(approx_iters_per_stage=1, eps_array=(0.5,))
    st = pg_train_approx(st, ThicknessOracle(), c)
    st.save(tmp_path / "p.ckpt")
    assert ckpt_bytes(TrainState.load(tmp_path / "p.ckpt")) == ckpt_bytes(st)


def test_missing_tensor_is_reported(tmp_path, data):
    st = pretrain(data, cfg())
    tensors = st.to_tensors()
    tensors.pop("norm.mean")
    checkpoint.save(tmp_path / "bad.ckpt", tensors)
    with pytest.raises(checkpoint.CheckpointError):
        TrainState.load(tmp_path / "bad.ckpt")


def test_pretrain_deterministic(tmp_path, data):
    a = pretrain(data, cfg(), out_dir=tmp_path / "a")
    pretrain(data, cfg(), out_dir=tmp_path / "b")
    assert (tmp_path / "a" / CHECKPOINT_NAME).read_bytes() == (tmp_path / "b" / CHECKPOINT_NAME).read_bytes()
    assert (tmp_path / "a" / METRICS_NAME).read_text() == (tmp_path / "b" / METRICS_NAME).read_text()
    c = pretrain(data, cfg(seed=4))
    assert ckpt_bytes(a) != ckpt_bytes(c)


def test_pretrain_resume_matches_uninterrupted(tmp_path, data):
    full = pretrain(data, cfg(pretrain_iters=6), out_dir=tmp_path / "full")
    half = pretrain(data, cfg(pretrain_iters=3), out_dir=tmp_path / "part")
    # an interrupted run leaves its last checkpoint behind; resume from it
    resumed = pretrain(data, cfg(pretrain_iters=6), state=TrainState.load(tmp_path / "part" / CHECKPOINT_NAME),
                       out_dir=tmp_path / "part")
    assert half.total_iterations == 3
    assert ckpt_bytes(resumed) == ckpt_bytes(full)
    assert (tmp_path / "part" / METRICS_NAME).read_text() == (tmp_path / "full" / METRICS_NAME).read_text()


def test_resume_drops_rows_after_checkpoint(tmp_path, data):
    pretrain(data, cfg(pretrain_iters=6, checkpoint_every=4), out_dir=tmp_path / "full")
    run = tmp_path / "crash"
    pretrain(data, cfg(pretrain_iters=5, checkpoint_every=4), out_dir=run)
    # simulate a crash after epoch 5: the checkpoint on disk is from epoch 4
    st = pretrain(data, cfg(pretrain_iters=4, checkpoint_every=4))
    st.save(run / CHECKPOINT_NAME)
    pretrain(data, cfg(pretrain_iters=6, checkpoint_every=4), state=TrainState.load(run / CHECKPOINT_NAME),
             out_dir=run)
    assert (run / METRICS_NAME).read_text() == (tmp_path / "full" / METRICS_NAME).read_text()


def test_approx_oracle_calls_and_stage_order(data):
    st = pretrain(data, cfg())
    oracle = CountingOracle(ThicknessOracle())
    c = cfg()
    log = MetricLog()
    out = pg_train_approx(st, oracle, c, metrics=log)
    expected = len(c.eps_array) * len(c.control_labels) * c.shapes_per_label
    assert oracle.calls == expected == out.oracle_calls
    eps_seen = [r["eps"] for r in log.rows]
    stages = list(dict.fromkeys(eps_seen))
    assert stages == list(c.eps_array)
    assert all(a > b for a, b in zip(stages, stages[1:]))
    assert len(log.rows) == len(c.eps_array) * c.approx_iters_per_stage
    # pool budget does not depend on the update budget
    oracle2 = CountingOracle(ThicknessOracle())
    pg_train_approx(st, oracle2, replace(c, approx_iters_per_stage=7))
    assert oracle2.calls == expected


def test_exact_pools_every_critic_update(data):
    st = pretrain(data, cfg())
    oracle = CountingOracle(ThicknessOracle())
    c = cfg()
    out = pg_train_exact(st, oracle, c)
    per_pass = len(c.control_labels) * c.shapes_per_label
    assert oracle.calls == len(c.eps_array) * c.exact_iters_per_stage * c.n_critic * per_pass
    assert out.oracle_calls == oracle.calls and out.phase == "exact"


def test_approx_resume_mid_stage(tmp_path, data):
    st = pretrain(data, cfg())
    c = cfg(approx_iters_per_stage=4, checkpoint_every=3)
    full = pg_train_approx(st, ThicknessOracle(), c, out_dir=tmp_path / "full")
    mid = _mid_stage_state(st, c, tmp_path / "mid")
    resumed = pg_train_approx(mid, ThicknessOracle(), c, out_dir=tmp_path / "mid")
    assert ckpt_bytes(resumed) == ckpt_bytes(full)
    assert (tmp_path / "mid" / METRICS_NAME).read_text() == (tmp_path / "full" / METRICS_NAME).read_text()


def _mid_stage_state(st, c, out_dir):
    """Run the approximate loop until the first periodic checkpoint, then abort."""

    class Abort(Exception):
        pass

    class AbortingOracle(ThicknessOracle):
        def evaluate(self, shape, cond):
            # the second pooling pass happens after epoch 4 > checkpoint at epoch 3
            if self.calls >= len(c.control_labels) * c.shapes_per_label:
                raise Abort
            return super().evaluate(shape, cond)

    with pytest.raises(Abort):
        pg_train_approx(st, AbortingOracle(), c, out_dir=out_dir)
    mid = TrainState.load(out_dir / CHECKPOINT_NAME)
    assert mid.total_iterations == 3 and mid.pools is not None and mid.work_generator is not None
    return mid


def test_divergence_aborts_with_checkpoint(tmp_path, data):
    with pytest.raises(TrainingDiverged) as exc:
        pretrain(data, cfg(divergence_limit=1e-12), out_dir=tmp_path)
    assert DIVERGED_NAME in str(exc.value) and (tmp_path / DIVERGED_NAME).exists()


def test_start_phase_rules(data):
    st = pretrain(data, cfg())
    ex = start_phase(st, "exact", cfg())
    assert ex.phase == "exact" and ex.total_iterations == 0 and ex.g_adam.t == 0
    assert ex.shape_mean is st.shape_mean
    assert start_phase(ex, "exact", cfg()) is ex
    with pytest.raises(ValueError):
        start_phase(ex, "pretrain", cfg())


def test_metrics_csv_columns(tmp_path, data):
    pretrain(data, cfg(), out_dir=tmp_path)
    with open(tmp_path / METRICS_NAME) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4 and [int(r["epoch"]) for r in rows] == [1, 2, 3, 4]
    assert all(r["phase"] == "pretrain" for r in rows)


def test_new_state_needs_data_when_normalizing():
    with pytest.raises(ValueError):
        new_state(cfg())
    st = new_state(cfg(normalize=False))
    assert st.shape_mean is None


def test_untrained_raw_generator_does_not_converge():
    # raw-coordinate output of a freshly initialized generator is zigzag noise
    st = new_state(TrainConfig(normalize=False, seed=0))
    rep = evaluate_generator(st, (0.01, 1.58), 50, PanelOracle())
    assert rep.not_converged_rate >= 0.95
