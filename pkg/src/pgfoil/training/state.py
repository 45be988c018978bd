"""Checkpointable training state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pgfoil import checkpoint
from pgfoil.nn import ACTIVATIONS, AdamState, LatentSpec, MlpParams, generate
from pgfoil.training.pools import ClassifiedPools

PHASES = ("pretrain", "exact", "approx")
DISTRIBUTIONS = ("uniform", "normal")
WORD = 2**32


@dataclass
class TrainState:
    """Everything needed to resume a loop bit-exactly.

    During an approximate-algorithm stage ``generator`` is the frozen pooling
    generator and ``work_generator`` the one being trained; between stages
    ``work_generator`` is None.

    When ``shape_mean``/``shape_scale`` are set the networks see standardized
    shapes ``(x - mean) / scale``; ``generate`` returns physical coordinates.
    """

    phase: str
    generator: MlpParams
    critic: MlpParams
    g_adam: AdamState
    d_adam: AdamState
    rng: np.random.Generator
    latent: LatentSpec
    stage: int = 0
    iteration: int = 0
    total_iterations: int = 0
    oracle_calls: int = 0
    work_generator: MlpParams | None = None
    pools: ClassifiedPools | None = None
    shape_mean: np.ndarray | None = None
    shape_scale: np.ndarray | None = None

    def to_network(self, shapes) -> np.ndarray:
        shapes = np.asarray(shapes, dtype=np.float64)
        if self.shape_mean is None:
            return shapes
        return (shapes - self.shape_mean) / self.shape_scale

    def to_physical(self, shapes) -> np.ndarray:
        shapes = np.asarray(shapes, dtype=np.float64)
        if self.shape_mean is None:
            return shapes
        return shapes * self.shape_scale + self.shape_mean

    def generate(self, z, labels) -> np.ndarray:
        """Physical (batch, 496) shapes from the generator being trained."""
        return self.to_physical(generate(self.trained_generator, z, labels))

    @property
    def trained_generator(self) -> MlpParams:
        return self.work_generator if self.work_generator is not None else self.generator

    def to_tensors(self) -> dict[str, np.ndarray]:
        t: dict[str, np.ndarray] = {}
        t["counters"] = np.array([PHASES.index(self.phase), self.stage, self.iteration,
                                  self.total_iterations, self.oracle_calls], dtype=np.float64)
        t["latent"] = np.array([self.latent.dim, DISTRIBUTIONS.index(self.latent.distribution)], dtype=np.float64)
        t["rng"] = _rng_words(self.rng)
        _put_mlp(t, "G", self.generator)
        _put_mlp(t, "D", self.critic)
        _put_adam(t, "G.adam", self.g_adam)
        _put_adam(t, "D.adam", self.d_adam)
        if self.work_generator is not None:
            _put_mlp(t, "G2", self.work_generator)
        if self.shape_mean is not None:
            t["norm.mean"] = self.shape_mean
            t["norm.scale"] = self.shape_scale
        if self.pools is not None:
            p = self.pools
            t["pool.des_x"] = p.des_x
            t["pool.des_y"] = p.des_y
            t["pool.des_c"] = p.des_c
            t["pool.undes_z"] = p.undes_z
            t["pool.undes_y"] = p.undes_y
            t["pool.info"] = np.array([p.n_desirable, p.n_undesirable, p.n_not_converged,
                                       p.fallback, p.undes_fallback], dtype=np.float64)
        return t

    @classmethod
    def from_tensors(cls, t: dict[str, np.ndarray]) -> "TrainState":
        if ("norm.mean" in t) != ("norm.scale" in t):
            raise checkpoint.CheckpointError("checkpoint has only half of the shape normalization")
        try:
            c = t["counters"].astype(np.int64)
            lat = t["latent"].astype(np.int64)
            pools = None
            if "pool.info" in t:
                info = t["pool.info"].astype(np.int64)
                pools = ClassifiedPools(t["pool.des_x"], t["pool.des_y"], t["pool.des_c"], t["pool.undes_z"],
                                        t["pool.undes_y"], int(info[0]), int(info[1]), int(info[2]),
                                        bool(info[3]), bool(info[4]))
            generator = _get_mlp(t, "G")
            critic = _get_mlp(t, "D")
            return cls(
                phase=PHASES[int(c[0])],
                generator=generator,
                critic=critic,
                g_adam=_get_adam(t, "G.adam", len(generator.arrays())),
                d_adam=_get_adam(t, "D.adam", len(critic.arrays())),
                rng=_rng_from_words(t["rng"]),
                latent=LatentSpec(int(lat[0]), DISTRIBUTIONS[int(lat[1])]),
                stage=int(c[1]), iteration=int(c[2]), total_iterations=int(c[3]), oracle_calls=int(c[4]),
                work_generator=_get_mlp(t, "G2") if "G2.acts" in t else None,
                pools=pools,
                shape_mean=t.get("norm.mean"),
                shape_scale=t.get("norm.scale"),
            )
        except (KeyError, IndexError) as exc:
            raise checkpoint.CheckpointError(f"checkpoint is missing training state field {exc}") from None

    def save(self, path) -> None:
        checkpoint.save(path, self.to_tensors())

    @classmethod
    def load(cls, path) -> "TrainState":
        return cls.from_tensors(checkpoint.load(path))


def _put_mlp(t: dict, prefix: str, p: MlpParams) -> None:
    t[f"{prefix}.acts"] = np.array([ACTIVATIONS.index(a) for a in p.activations], dtype=np.float64)
    t[f"{prefix}.slope"] = np.array([p.slope])
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        t[f"{prefix}.w{i}"] = w
        t[f"{prefix}.b{i}"] = b


def _get_mlp(t: dict, prefix: str) -> MlpParams:
    acts = tuple(ACTIVATIONS[int(a)] for a in t[f"{prefix}.acts"])
    ws = tuple(t[f"{prefix}.w{i}"] for i in range(len(acts)))
    bs = tuple(t[f"{prefix}.b{i}"] for i in range(len(acts)))
    return MlpParams(ws, bs, acts, float(t[f"{prefix}.slope"][0]))


def _put_adam(t: dict, prefix: str, a: AdamState) -> None:
    t[f"{prefix}.hyper"] = np.array([a.t, a.alpha, a.beta1, a.beta2, a.eps])
    for i, (m, v) in enumerate(zip(a.m, a.v)):
        t[f"{prefix}.m{i}"] = m
        t[f"{prefix}.v{i}"] = v


def _get_adam(t: dict, prefix: str, n: int) -> AdamState:
    h = t[f"{prefix}.hyper"]
    return AdamState([t[f"{prefix}.m{i}"] for i in range(n)], [t[f"{prefix}.v{i}"] for i in range(n)],
                     int(h[0]), float(h[1]), float(h[2]), float(h[3]), float(h[4]))


def _split(value: int, words: int) -> list[float]:
    return [float((value >> (32 * k)) % WORD) for k in range(words)]


def _join(words) -> int:
    return sum(int(w) << (32 * k) for k, w in enumerate(words))


def _rng_words(rng: np.random.Generator) -> np.ndarray:
    st = rng.bit_generator.state
    if st["bit_generator"] != "PCG64":
        raise ValueError("only PCG64 generators can be checkpointed")
    words = _split(st["state"]["state"], 4) + _split(st["state"]["inc"], 4)
    words += [float(st["has_uint32"]), float(st["uinteger"])]
    return np.array(words)


def _rng_from_words(words: np.ndarray) -> np.random.Generator:
    w = [int(v) for v in words]
    bg = np.random.PCG64()
    bg.state = {"bit_generator": "PCG64", "state": {"state": _join(w[0:4]), "inc": _join(w[4:8])},
                "has_uint32": w[8], "uinteger": w[9]}
    return np.random.Generator(bg)
