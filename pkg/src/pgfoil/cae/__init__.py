"""Aerodynamic oracles: shape -> lift coefficient or a not-converged reason."""

from pgfoil.cae.base import (
    Converged,
    CountingOracle,
    FlowConditions,
    NotConverged,
    Oracle,
    OracleResult,
    batch_evaluate,
)
from pgfoil.cae.panel import PanelOracle, panel_evaluate
from pgfoil.cae.xfoil import XfoilOracle, xfoil_evaluate


def make_oracle(kind: str, xfoil_path: str | None = None, repanel: bool = False) -> Oracle:
    if kind == "panel":
        return PanelOracle()
    if kind == "xfoil":
        return XfoilOracle(xfoil_path, repanel=repanel)
    raise ValueError(f"unknown oracle kind {kind!r} (expected 'panel' or 'xfoil')")


__all__ = [
    "Converged", "CountingOracle", "FlowConditions", "NotConverged", "Oracle", "OracleResult",
    "PanelOracle", "XfoilOracle", "batch_evaluate", "make_oracle", "panel_evaluate", "xfoil_evaluate",
]
