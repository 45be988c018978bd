"""Pretraining and the two physics-guided fine-tuning loops."""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np

from pgfoil.airfoil import unflatten
from pgfoil.autodiff import Graph
from pgfoil.cae.base import FlowConditions, batch_evaluate
from pgfoil.nn import AdamState, MlpParams, adam_step, bind, generate
from pgfoil.training.config import TrainConfig
from pgfoil.training.losses import critic_loss, generator_loss
from pgfoil.training.pools import ClassifiedPools, build_pools, classify_result
from pgfoil.training.state import PHASES, TrainState

log = logging.getLogger(__name__)

CHECKPOINT_NAME = "state.ckpt"
DIVERGED_NAME = "diverged.ckpt"
METRICS_NAME = "metrics.csv"
METRIC_FIELDS = ["phase", "epoch", "stage", "eps", "critic_loss", "wasserstein", "penalty",
                 "generator_loss", "batch_phi", "n_desirable", "n_undesirable", "n_not_converged",
                 "fallback", "oracle_calls"]


class TrainingDiverged(RuntimeError):
    pass


class MetricLog:
    """One row per generator update, kept in memory and optionally mirrored to CSV.

    On resume, rows written after the last checkpoint are dropped so the file
    matches an uninterrupted run.
    """

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self.rows: list[dict] = []

    def sync(self, state: TrainState) -> None:
        if self.path is None or not self.path.exists():
            return
        with open(self.path, newline="") as fh:
            old = list(csv.DictReader(fh))
        keep = [r for r in old if PHASES.index(r["phase"]) < PHASES.index(state.phase)
                or (r["phase"] == state.phase and int(r["epoch"]) <= state.total_iterations)]
        self._write(keep, "w")

    def append(self, row: dict) -> None:
        self.rows.append(row)
        if self.path is not None:
            self._write([row], "a")

    def _write(self, rows, mode):
        fresh = mode == "w" or not self.path.exists()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, mode, newline="") as fh:
            w = csv.DictWriter(fh, METRIC_FIELDS, lineterminator="\n")
            if fresh:
                w.writeheader()
            for r in rows:
                w.writerow({k: _fmt(r[k]) for k in METRIC_FIELDS})


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _seeds(seed: int) -> tuple[int, int, int]:
    g, d, r = np.random.SeedSequence(seed).generate_state(3)
    return int(g), int(d), int(r)


def _fresh_adam(params: MlpParams, cfg: TrainConfig, alpha: float | None = None) -> AdamState:
    return AdamState.zeros_like(params, cfg.alpha if alpha is None else alpha, cfg.beta1, cfg.beta2)


def new_state(cfg: TrainConfig, data_shapes: np.ndarray | None = None) -> TrainState:
    """Randomly initialized networks, ready for pretraining.

    With ``cfg.normalize`` the networks work on shapes standardized by the
    per-coordinate mean and spread of ``data_shapes``.
    """
    gs, ds, rs = _seeds(cfg.seed)
    gen = cfg.arch.init_generator(gs)
    crit = cfg.arch.init_critic(ds)
    mean = scale = None
    if cfg.normalize:
        if data_shapes is None:
            raise ValueError("normalization needs the training shapes")
        mean = data_shapes.mean(axis=0)
        scale = np.maximum(data_shapes.std(axis=0), cfg.scale_floor)
    return TrainState("pretrain", gen, crit, _fresh_adam(gen, cfg), _fresh_adam(crit, cfg, cfg.critic_alpha),
                      np.random.default_rng(rs), cfg.latent, shape_mean=mean, shape_scale=scale)


def start_phase(state: TrainState, phase: str, cfg: TrainConfig) -> TrainState:
    """Continue ``state`` if it is already in ``phase``, else begin it from these weights.

    A new phase keeps the networks, resets counters and optimizer moments,
    and reseeds the RNG from the config seed.
    """
    if state.phase == phase:
        return state
    if PHASES.index(state.phase) > 0 and phase == "pretrain":
        raise ValueError(f"cannot pretrain from a {state.phase} state")
    gen = state.trained_generator
    return TrainState(phase, gen, state.critic, _fresh_adam(gen, cfg), _fresh_adam(state.critic, cfg, cfg.critic_alpha),
                      np.random.default_rng([cfg.seed, PHASES.index(phase)]), state.latent,
                      shape_mean=state.shape_mean, shape_scale=state.shape_scale)


class _Runner:
    def __init__(self, state: TrainState, cfg: TrainConfig, out_dir, metrics: MetricLog | None):
        self.state = state
        self.cfg = cfg
        self.out_dir = Path(out_dir) if out_dir is not None else None
        if metrics is None:
            metrics = MetricLog(self.out_dir / METRICS_NAME if self.out_dir else None)
        self.metrics = metrics
        self.metrics.sync(state)

    def critic_step(self, x_real, y_real, x_fake, y_fake):
        st, cfg = self.state, self.cfg
        delta = st.rng.uniform(0.0, 1.0, size=len(x_real))
        g = Graph()
        bound = bind(g, st.critic, trainable=True)
        res = critic_loss(g, st.critic, bound, x_real, y_real, x_fake, y_fake, delta, cfg.lambda_gp)
        self.guard("critic", res.loss.value)
        grads = [n.value for n in g.backward(res.loss, bound)]
        st.critic, st.d_adam = adam_step(st.critic, grads, st.d_adam)
        return res

    def generator_step(self, z, labels):
        st, cfg = self.state, self.cfg
        params = st.trained_generator
        g = Graph()
        bound = bind(g, params, trainable=True)
        res = generator_loss(g, params, bound, st.critic, z, labels, cfg.lambda_phi,
                             st.shape_mean, st.shape_scale)
        self.guard("generator", res.loss.value)
        grads = [n.value for n in g.backward(res.loss, bound)]
        params, st.g_adam = adam_step(params, grads, st.g_adam)
        if st.work_generator is not None:
            st.work_generator = params
        else:
            st.generator = params
        return res

    def guard(self, what: str, value) -> None:
        v = float(np.asarray(value))
        if abs(v) > self.cfg.divergence_limit:
            where = ""
            if self.out_dir is not None:
                path = self.out_dir / DIVERGED_NAME
                self.state.save(path)
                where = f"; state saved to {path}"
            raise TrainingDiverged(f"{what} loss {v:.4g} exceeds {self.cfg.divergence_limit:g} at epoch "
                                   f"{self.state.total_iterations}{where}")

    def record(self, crit, gen, eps=None, pools: ClassifiedPools | None = None):
        st = self.state
        st.iteration += 1
        st.total_iterations += 1
        self.metrics.append({
            "phase": st.phase, "epoch": st.total_iterations, "stage": st.stage,
            "eps": float(eps) if eps is not None else "",
            "critic_loss": float(crit.loss.value), "wasserstein": crit.wasserstein, "penalty": crit.penalty,
            "generator_loss": float(gen.loss.value), "batch_phi": gen.batch_phi,
            "n_desirable": pools.n_desirable if pools else "", "n_undesirable": pools.n_undesirable if pools else "",
            "n_not_converged": pools.n_not_converged if pools else "",
            "fallback": int(pools.fallback) if pools else "", "oracle_calls": st.oracle_calls,
        })
        if self.out_dir is not None and st.total_iterations % self.cfg.checkpoint_every == 0:
            self.checkpoint()

    def checkpoint(self):
        if self.out_dir is not None:
            self.state.save(self.out_dir / CHECKPOINT_NAME)

    def pooling_pass(self, generator: MlpParams, eps: float, oracle, cond: FlowConditions) -> ClassifiedPools:
        st, cfg = self.state, self.cfg
        labels = np.repeat(np.array(cfg.control_labels), cfg.shapes_per_label)
        z = st.latent.sample(st.rng, len(labels))
        shapes = generate(generator, z, labels)
        physical = st.to_physical(shapes)
        results = batch_evaluate([unflatten(s) for s in physical], cond, oracle, cfg.parallel)
        st.oracle_calls += len(results)
        verdicts = [classify_result(r, c, eps) for r, c in zip(results, labels)]
        pools = build_pools(z, labels, shapes, verdicts, cfg.batch)
        if pools.fallback:
            log.info("eps=%g: no desirable shapes, using the %d closest as provisional desirables",
                     eps, len(pools.des_y))
        return pools

    def sample_pools(self, pools: ClassifiedPools):
        rng, m = self.state.rng, self.cfg.batch
        di = rng.integers(0, len(pools.des_y), m)
        ui = rng.integers(0, len(pools.undes_y), m)
        return pools.des_x[di], pools.des_y[di], pools.undes_z[ui], pools.undes_y[ui]


def _dataset_arrays(dataset):
    if isinstance(dataset, tuple):
        x, y = dataset
    else:
        x, y = dataset.shapes(), dataset.labels()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(x) == 0:
        raise ValueError("pretraining needs a non-empty dataset")
    if len(x) != len(y):
        raise ValueError(f"{len(x)} shapes but {len(y)} labels")
    return x, y


def pretrain(dataset, cfg: TrainConfig, state: TrainState | None = None, out_dir=None,
             metrics: MetricLog | None = None) -> TrainState:
    """Conditional WGAN-gp on labeled data for ``cfg.pretrain_iters`` generator updates.

    ``dataset`` is a Dataset or an ``(shapes, labels)`` pair.  Passing a
    ``state`` from a checkpoint resumes where it stopped.
    """
    x_all, y_all = _dataset_arrays(dataset)
    state = start_phase(state or new_state(cfg, x_all), "pretrain", cfg)
    x_all = state.to_network(x_all)
    run = _Runner(state, cfg, out_dir, metrics)
    rng, m = state.rng, cfg.batch
    while state.iteration < cfg.pretrain_iters:
        for _ in range(cfg.n_critic):
            idx = rng.integers(0, len(y_all), m)
            z = state.latent.sample(rng, m)
            fake = generate(state.generator, z, y_all[idx])
            crit = run.critic_step(x_all[idx], y_all[idx], fake, y_all[idx])
        z = state.latent.sample(rng, m)
        labels = y_all[rng.integers(0, len(y_all), m)]
        gen = run.generator_step(z, labels)
        run.record(crit, gen)
    run.checkpoint()
    return state


def pg_train_exact(pretrained: TrainState, oracle, cfg: TrainConfig, cond: FlowConditions | None = None,
                   out_dir=None, metrics: MetricLog | None = None) -> TrainState:
    """Physics-guided fine-tuning that re-pools with the oracle before every critic update."""
    cond = cond or FlowConditions()
    state = start_phase(pretrained, "exact", cfg)
    run = _Runner(state, cfg, out_dir, metrics)
    while state.stage < len(cfg.eps_array):
        eps = cfg.eps_array[state.stage]
        if state.iteration == 0:
            log.info("exact: stage %d, eps=%g", state.stage, eps)
        while state.iteration < cfg.exact_iters_per_stage:
            for _ in range(cfg.n_critic):
                pools = run.pooling_pass(state.generator, eps, oracle, cond)
                x, y, zu, yu = run.sample_pools(pools)
                crit = run.critic_step(x, y, generate(state.generator, zu, yu), yu)
            _, _, zu, yu = run.sample_pools(pools)
            gen = run.generator_step(zu, yu)
            run.record(crit, gen, eps, pools)
        state.stage += 1
        state.iteration = 0
    run.checkpoint()
    return state


def pg_train_approx(pretrained: TrainState, oracle, cfg: TrainConfig, cond: FlowConditions | None = None,
                    out_dir=None, metrics: MetricLog | None = None) -> TrainState:
    """Physics-guided fine-tuning that pools once per eps stage with a frozen generator.

    Oracle calls total ``len(eps_array) * len(control_labels) * shapes_per_label``
    whatever the per-stage update budget.
    """
    cond = cond or FlowConditions()
    state = start_phase(pretrained, "approx", cfg)
    run = _Runner(state, cfg, out_dir, metrics)
    while state.stage < len(cfg.eps_array):
        eps = cfg.eps_array[state.stage]
        if state.pools is None:
            log.info("approx: stage %d, eps=%g", state.stage, eps)
            state.pools = run.pooling_pass(state.generator, eps, oracle, cond)
            state.work_generator = state.generator
        pools = state.pools
        while state.iteration < cfg.approx_iters_per_stage:
            for _ in range(cfg.n_critic):
                x, y, zu, yu = run.sample_pools(pools)
                crit = run.critic_step(x, y, generate(state.work_generator, zu, yu), yu)
            _, _, zu, yu = run.sample_pools(pools)
            gen = run.generator_step(zu, yu)
            run.record(crit, gen, eps, pools)
        state.generator = state.work_generator
        state.work_generator = None
        state.pools = None
        state.stage += 1
        state.iteration = 0
    run.checkpoint()
    return state


__all__ = ["MetricLog", "TrainingDiverged", "new_state", "start_phase", "pretrain", "pg_train_exact",
           "pg_train_approx"]
