from __future__ import annotations

from dataclasses import dataclass, field

from pgfoil.nn import Architecture, LatentSpec

DEFAULT_EPS = (0.2, 0.1367, 0.0733, 0.01)
LABEL_RANGE = (0.01, 1.58)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for all three training loops.

    Defaults for the GAN/Adam settings and the epsilon curriculum are the
    published ones; loop budgets are desk-scale choices.
    """

    lambda_gp: float = 10.0
    n_critic: int = 5
    batch: int = 10
    alpha: float = 1e-4
    alpha_critic: float | None = None
    beta1: float = 0.0
    beta2: float = 0.9
    eps_array: tuple[float, ...] = DEFAULT_EPS
    lambda_phi: float = 0.0
    control_labels: tuple[float, ...] = (0.6, 0.7)
    pretrain_iters: int = 2000
    exact_iters_per_stage: int = 10
    approx_iters_per_stage: int = 5000
    shapes_per_label: int = 125
    checkpoint_every: int = 1000
    divergence_limit: float = 1e6
    normalize: bool = True
    scale_floor: float = 1e-6
    parallel: int = 1
    seed: int = 0
    arch: Architecture = field(default_factory=Architecture)

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_array)
        object.__setattr__(self, "eps_array", eps)
        object.__setattr__(self, "control_labels", tuple(float(c) for c in self.control_labels))
        if not eps or any(e <= 0 for e in eps) or any(a <= b for a, b in zip(eps, eps[1:])):
            raise ValueError(f"eps_array must be positive and strictly decreasing, got {eps}")
        lo, hi = LABEL_RANGE
        if not self.control_labels or any(not lo <= c <= hi for c in self.control_labels):
            raise ValueError(f"control labels must lie in [{lo}, {hi}], got {self.control_labels}")
        if self.scale_floor <= 0:
            raise ValueError("scale_floor must be positive")
        if self.lambda_phi < 0:
            raise ValueError("lambda_phi must be >= 0")
        if self.n_critic < 1 or self.batch < 1 or self.shapes_per_label < 1:
            raise ValueError("n_critic, batch and shapes_per_label must be >= 1")

    @property
    def critic_alpha(self) -> float:
        return self.alpha if self.alpha_critic is None else self.alpha_critic

    @property
    def latent(self) -> LatentSpec:
        return self.arch.latent
