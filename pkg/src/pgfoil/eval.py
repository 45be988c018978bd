"""Generator evaluation: success/failure/not-converged rates, MAE, distortion,
scatter export and model comparison tables."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pgfoil.airfoil import distortion, unflatten
from pgfoil.cae.base import FlowConditions, batch_evaluate
from pgfoil.nn import LatentSpec, MlpParams, generate

SUCCESS_THRESHOLD = 0.05
DEFAULT_RANGE = (0.01, 1.58)


@dataclass(frozen=True)
class SampleRecord:
    target: float
    c_l: float | None
    reason: str | None
    phi: float

    @property
    def converged(self) -> bool:
        return self.c_l is not None


@dataclass
class EvalReport:
    n_samples: int
    success_rate: float
    failure_rate: float
    not_converged_rate: float
    mae: float | None
    mean_phi: float
    threshold: float = SUCCESS_THRESHOLD
    records: list[SampleRecord] = field(default_factory=list)
    shapes: np.ndarray | None = None

    @classmethod
    def from_records(cls, records: list[SampleRecord], threshold: float = SUCCESS_THRESHOLD,
                     shapes: np.ndarray | None = None) -> "EvalReport":
        if not records:
            raise ValueError("cannot summarize an empty evaluation")
        n = len(records)
        errors = np.array([abs(r.target - r.c_l) for r in records if r.converged])
        n_conv = len(errors)
        n_ok = int(np.sum(errors <= threshold))
        phis = np.array([r.phi for r in records])
        finite = phis[np.isfinite(phis)]
        return cls(n, n_ok / n, (n_conv - n_ok) / n, (n - n_conv) / n,
                   float(np.mean(errors)) if n_conv else None,
                   float(np.mean(finite)) if finite.size else math.nan, threshold, records, shapes)

    def with_threshold(self, threshold: float) -> "EvalReport":
        return EvalReport.from_records(self.records, threshold, self.shapes)

    def summary(self) -> str:
        mae = "n/a (no converged samples)" if self.mae is None else f"{self.mae:.6f}"
        return (f"samples         {self.n_samples}\n"
                f"success         {100 * self.success_rate:.2f} %  (|target - C_L| <= {self.threshold:g})\n"
                f"failure         {100 * self.failure_rate:.2f} %\n"
                f"not converged   {100 * self.not_converged_rate:.2f} %\n"
                f"MAE             {mae}  (converged samples only)\n"
                f"mean distortion {self.mean_phi / np.pi:.4f} pi  (all samples)\n")


def sample_labels(labels, n: int, rng: np.random.Generator) -> np.ndarray:
    """``labels`` is a ``(lo, hi)`` range (uniform draws) or a list cycled evenly to ``n``."""
    if isinstance(labels, tuple) and len(labels) == 2:
        lo, hi = float(labels[0]), float(labels[1])
        if hi < lo:
            raise ValueError(f"label range is reversed: {lo} > {hi}")
        return rng.uniform(lo, hi, size=n)
    values = np.asarray(list(labels), dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("label list is empty")
    return np.resize(values, n)


def _phi(vector) -> float:
    try:
        return distortion(unflatten(vector))
    except ValueError:
        return math.nan


def evaluate_shapes(shapes: np.ndarray, targets: np.ndarray, oracle, cond: FlowConditions | None = None,
                    threshold: float = SUCCESS_THRESHOLD, parallel: int = 1) -> EvalReport:
    cond = cond or FlowConditions()
    results = batch_evaluate([unflatten(s) for s in shapes], cond, oracle, parallel)
    records = [SampleRecord(float(t), r.cl, r.reason, _phi(s)) for s, t, r in zip(shapes, targets, results)]
    return EvalReport.from_records(records, threshold, np.asarray(shapes))


def evaluate_generator(generator, labels=DEFAULT_RANGE, n: int = 1000, oracle=None,
                       cond: FlowConditions | None = None, seed: int = 0, latent: LatentSpec | None = None,
                       threshold: float = SUCCESS_THRESHOLD, parallel: int = 1) -> EvalReport:
    """Generate ``n`` shapes, evaluate each with ``oracle`` and summarize.

    ``generator`` is an MlpParams or a TrainState (its trained generator is
    used, with the state's shape standardization undone).
    Draws come from a private RNG seeded by ``seed``; the state is not touched.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if oracle is None:
        raise ValueError("an oracle is required")
    if isinstance(generator, MlpParams):
        latent = latent or LatentSpec(generator.dims[0] - 1)
        make = lambda z, c: generate(generator, z, c)  # noqa: E731
    else:
        latent = latent or generator.latent
        make = generator.generate
    rng = np.random.default_rng(seed)
    targets = sample_labels(labels, n, rng)
    z = latent.sample(rng, n)
    shapes = make(z, targets)
    return evaluate_shapes(shapes, targets, oracle, cond, threshold, parallel)


def write_report(report: EvalReport, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "summary.txt").write_text(report.summary())
    with open(directory / "samples.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["target_cl", "cl", "status", "phi"])
        for r in report.records:
            w.writerow([repr(r.target), "" if r.c_l is None else repr(r.c_l),
                        "converged" if r.converged else r.reason, repr(r.phi)])


def _svg(points: list[tuple[float, float]], size: int = 400, pad: int = 40) -> str:
    vals = [v for p in points for v in p]
    lo = min([0.0] + vals)
    hi = max([2.0] + vals)
    span = hi - lo

    def px(v):
        return pad + (v - lo) / span * (size - 2 * pad)

    def py(v):
        return size - px(v)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<line x1="{px(lo):.2f}" y1="{py(lo):.2f}" x2="{px(hi):.2f}" y2="{py(lo):.2f}" stroke="black"/>',
           f'<line x1="{px(lo):.2f}" y1="{py(lo):.2f}" x2="{px(lo):.2f}" y2="{py(hi):.2f}" stroke="black"/>',
           f'<line x1="{px(lo):.2f}" y1="{py(lo):.2f}" x2="{px(hi):.2f}" y2="{py(hi):.2f}" '
           'stroke="gray" stroke-dasharray="4 3"/>',
           f'<text x="{size / 2:.0f}" y="{size - 8}" text-anchor="middle" font-size="12">target C_L</text>',
           f'<text x="12" y="{size / 2:.0f}" font-size="12" transform="rotate(-90 12 {size / 2:.0f})" '
           'text-anchor="middle">computed C_L</text>',
           f'<text x="{px(lo):.2f}" y="{py(lo) + 14:.2f}" font-size="10">{lo:g}</text>',
           f'<text x="{px(hi):.2f}" y="{py(lo) + 14:.2f}" font-size="10" text-anchor="end">{hi:g}</text>']
    for t, c in points:
        out.append(f'<circle cx="{px(t):.2f}" cy="{py(c):.2f}" r="2" fill="steelblue"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scatter_export(report: EvalReport, path) -> tuple[Path, Path]:
    """CSV of (target, computed) for converged samples plus an SVG scatter with the diagonal."""
    path = Path(path)
    csv_path = path if path.suffix == ".csv" else path.with_suffix(".csv")
    svg_path = csv_path.with_suffix(".svg")
    points = [(r.target, r.c_l) for r in report.records if r.converged]
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["target_cl", "cl"])
        w.writerows([repr(t), repr(c)] for t, c in points)
    svg_path.write_text(_svg(points))
    return csv_path, svg_path


COMPARE_COLUMNS = ["model", "success_pct", "failure_pct", "not_converged_pct", "mae", "phi_over_pi"]


def compare_models(reports, path) -> tuple[Path, Path]:
    """Aligned text table and CSV, one row per ``(name, report)`` in the given order."""
    path = Path(path)
    txt_path = path.with_suffix(".txt")
    csv_path = path.with_suffix(".csv")
    rows = []
    for name, r in reports:
        rows.append([name, f"{100 * r.success_rate:.1f} %", f"{100 * r.failure_rate:.1f} %",
                     f"{100 * r.not_converged_rate:.1f} %", "n/a" if r.mae is None else f"{r.mae:.4f}",
                     f"{r.mean_phi / np.pi:.2f}π"])
    head = ["model", "success", "failure", "not converged", "MAE", "phi"]
    widths = [max(len(str(c)) for c in col) for col in zip(head, *rows)]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(line, widths)).rstrip() for line in [head] + rows]
    txt_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARE_COLUMNS)
        for name, r in reports:
            w.writerow([name, repr(100 * r.success_rate), repr(100 * r.failure_rate),
                        repr(100 * r.not_converged_rate), "" if r.mae is None else repr(r.mae),
                        repr(r.mean_phi / np.pi)])
    return txt_path, csv_path
