"""Desirable/undesirable classification of generated shapes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pgfoil.airfoil import Airfoil
from pgfoil.cae.base import FlowConditions, OracleResult

DESIRABLE = "desirable"
UNDESIRABLE = "undesirable"
NOT_CONVERGED = "not-converged"


class PoolingError(RuntimeError):
    pass


@dataclass(frozen=True)
class Verdict:
    kind: str
    c_l: float | None = None
    reason: str | None = None


def classify_result(result: OracleResult, label: float, eps: float) -> Verdict:
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not result.converged:
        return Verdict(NOT_CONVERGED, reason=result.reason)
    kind = DESIRABLE if abs(label - result.cl) <= eps else UNDESIRABLE
    return Verdict(kind, result.cl)


def classify(shape: Airfoil, label: float, eps: float, oracle, cond: FlowConditions | None = None) -> Verdict:
    """Evaluate ``shape`` and test ``|label - c_l| <= eps``."""
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return classify_result(oracle.evaluate(shape, cond or FlowConditions()), label, eps)


@dataclass
class ClassifiedPools:
    """Label-aligned pools from one pooling pass.

    ``des_x[i]`` pairs with ``des_y[i]``; ``undes_z[i]`` pairs with ``undes_y[i]``.
    Not-converged shapes sit in the undesirable pool (their latent vectors).
    """

    des_x: np.ndarray
    des_y: np.ndarray
    des_c: np.ndarray
    undes_z: np.ndarray
    undes_y: np.ndarray
    n_desirable: int
    n_undesirable: int
    n_not_converged: int
    fallback: bool = False
    undes_fallback: bool = False

    @property
    def total(self) -> int:
        return self.n_desirable + self.n_undesirable + self.n_not_converged


def build_pools(z: np.ndarray, labels: np.ndarray, shapes: np.ndarray, verdicts: list[Verdict],
                fallback_k: int) -> ClassifiedPools:
    """Split one generated batch into the two pools.

    An empty desirable set falls back to the ``fallback_k`` converged shapes
    closest to their label; an empty undesirable set reuses every latent
    vector of the pass so the critic still sees generated samples.
    """
    labels = np.asarray(labels, dtype=np.float64).ravel()
    kinds = np.array([v.kind for v in verdicts])
    c = np.array([np.nan if v.c_l is None else v.c_l for v in verdicts])
    des = kinds == DESIRABLE
    n_nc = int(np.sum(kinds == NOT_CONVERGED))
    n_des = int(des.sum())
    n_und = len(verdicts) - n_des - n_nc
    fallback = False
    if not des.any():
        conv = np.flatnonzero(kinds != NOT_CONVERGED)
        if conv.size == 0:
            raise PoolingError(f"none of the {len(verdicts)} generated shapes converged; "
                               "the generator is too far from valid airfoils to pool")
        err = np.abs(labels[conv] - c[conv])
        des = np.zeros(len(verdicts), dtype=bool)
        des[conv[np.argsort(err, kind="stable")[:fallback_k]]] = True
        fallback = True
    undes = ~des
    undes_fallback = not undes.any()
    if undes_fallback:
        undes = np.ones(len(verdicts), dtype=bool)
    return ClassifiedPools(shapes[des].copy(), labels[des].copy(), c[des].copy(), z[undes].copy(),
                           labels[undes].copy(), n_des, n_und, n_nc, fallback, undes_fallback)
