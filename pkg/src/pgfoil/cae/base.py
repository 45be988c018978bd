"""Oracle contract shared by the built-in panel solver and the XFoil adapter."""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol, Sequence

from pgfoil.airfoil import Airfoil

# reason tags for NotConverged
SELF_INTERSECTION = "self-intersection"
DEGENERATE_PANEL = "degenerate-panel"
SINGULAR = "singular"
NON_FINITE = "non-finite"
SOLVER = "solver"
IO = "io"
TIMEOUT = "timeout"
PARSE = "parse"


@dataclass(frozen=True)
class FlowConditions:
    angle_of_attack: float = 5.0
    reynolds: float = 3.0e6
    max_iterations: int = 100
    viscous: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.viscous and not self.reynolds > 0:
            raise ValueError("reynolds must be positive for viscous runs")


@dataclass(frozen=True)
class OracleResult:
    """Either converged with a finite ``cl`` or not converged with a ``reason``."""

    cl: float | None = None
    reason: str | None = None

    def __post_init__(self):
        if (self.cl is None) == (self.reason is None):
            raise ValueError("exactly one of cl / reason must be set")
        if self.cl is not None and not math.isfinite(self.cl):
            raise ValueError("converged cl must be finite")

    @property
    def converged(self) -> bool:
        return self.cl is not None


def Converged(cl: float) -> OracleResult:
    return OracleResult(cl=float(cl))


def NotConverged(reason: str) -> OracleResult:
    return OracleResult(reason=reason)


class Oracle(Protocol):
    name: str

    def evaluate(self, shape: Airfoil, cond: FlowConditions) -> OracleResult: ...


class CountingOracle:
    """Wraps an oracle and counts its calls."""

    def __init__(self, inner: Oracle):
        self.inner = inner
        self.name = inner.name
        self.calls = 0
        self._lock = threading.Lock()

    def evaluate(self, shape: Airfoil, cond: FlowConditions) -> OracleResult:
        with self._lock:
            self.calls += 1
        return self.inner.evaluate(shape, cond)


def batch_evaluate(shapes: Sequence[Airfoil], cond: FlowConditions, oracle: Oracle,
                   parallelism: int = 1) -> list[OracleResult]:
    """Evaluate every shape; result ``i`` always belongs to ``shapes[i]``."""
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    shapes = list(shapes)
    if parallelism == 1 or len(shapes) < 2:
        return [oracle.evaluate(s, cond) for s in shapes]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(lambda s: oracle.evaluate(s, cond), shapes))
