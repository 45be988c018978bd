"""Pretraining and physics-guided fine-tuning of the conditional generator."""

from pgfoil.training.config import DEFAULT_EPS, TrainConfig
from pgfoil.training.loops import (
    MetricLog,
    TrainingDiverged,
    new_state,
    pg_train_approx,
    pg_train_exact,
    pretrain,
    start_phase,
)
from pgfoil.training.losses import critic_loss, distortion_node, generator_loss
from pgfoil.training.pools import ClassifiedPools, Verdict, build_pools, classify, classify_result
from pgfoil.training.state import TrainState

__all__ = [
    "DEFAULT_EPS", "TrainConfig", "MetricLog", "TrainingDiverged", "new_state", "pg_train_approx",
    "pg_train_exact", "pretrain", "start_phase", "critic_loss", "distortion_node", "generator_loss",
    "ClassifiedPools", "Verdict", "build_pools", "classify", "classify_result", "TrainState",
]
