"""Labeled NACA four-digit training set: build, filter, persist, summarize."""

from __future__ import annotations

import csv
import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pgfoil.airfoil import N_POINTS, Airfoil, NacaCode, naca4
from pgfoil.cae.base import DEGENERATE_PANEL, IO, PARSE, TIMEOUT, FlowConditions, NotConverged, Oracle, batch_evaluate

log = logging.getLogger(__name__)

FORMAT = "pgfoil-dataset"
FORMAT_VERSION = 1
CL_MIN, CL_MAX = 0.0, 2.0
CSV_NAME = "dataset.csv"
MANIFEST_NAME = "manifest.txt"
ENVIRONMENT_FAILURES = {IO, TIMEOUT, PARSE}


class DatasetError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LabeledShape:
    airfoil: Airfoil
    c_l: float
    source: NacaCode | str


@dataclass
class DatasetManifest:
    oracle: str
    cond: FlowConditions
    attempted: int = 0
    converged: int = 0
    filtered: int = 0
    retained: int = 0
    seed: int = 0
    format_version: int = FORMAT_VERSION

    def reconciles(self) -> bool:
        return self.retained == self.converged - self.filtered and self.converged <= self.attempted

    def to_text(self) -> str:
        rows = [
            ("format", FORMAT),
            ("format_version", self.format_version),
            ("oracle", self.oracle),
            ("alpha_deg", repr(self.cond.angle_of_attack)),
            ("reynolds", repr(self.cond.reynolds)),
            ("max_iter", self.cond.max_iterations),
            ("viscous", str(self.cond.viscous).lower()),
            ("attempted", self.attempted),
            ("converged", self.converged),
            ("filtered", self.filtered),
            ("retained", self.retained),
            ("seed", self.seed),
        ]
        return "".join(f"{k} = {v}\n" for k, v in rows)

    @classmethod
    def from_text(cls, text: str) -> "DatasetManifest":
        kv = {}
        for line in text.splitlines():
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if "=" not in line:
                raise DatasetError(f"manifest: malformed line {line!r}")
            k, v = line.split("=", 1)
            kv[k.strip()] = v.strip()
        if kv.get("format") != FORMAT:
            raise DatasetError("manifest: bad magic (format key missing or wrong)")
        version = int(kv.get("format_version", -1))
        if version != FORMAT_VERSION:
            raise DatasetError(f"manifest: unsupported format_version {version}")
        try:
            cond = FlowConditions(float(kv["alpha_deg"]), float(kv["reynolds"]), int(kv["max_iter"]),
                                  kv["viscous"] == "true")
            return cls(kv["oracle"], cond, int(kv["attempted"]), int(kv["converged"]),
                       int(kv["filtered"]), int(kv["retained"]), int(kv["seed"]), version)
        except KeyError as exc:
            raise DatasetError(f"manifest: missing key {exc}") from None


@dataclass
class Dataset:
    items: list[LabeledShape]
    manifest: DatasetManifest
    not_converged: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.items)

    def shapes(self) -> np.ndarray:
        """(N, 496) matrix of flattened contours."""
        if not self.items:
            return np.zeros((0, 2 * N_POINTS))
        return np.stack([np.concatenate([s.airfoil.x, s.airfoil.y]) for s in self.items])

    def labels(self) -> np.ndarray:
        return np.array([s.c_l for s in self.items], dtype=np.float64)


def enumerate_naca() -> list[NacaCode]:
    return [NacaCode(m, p, t) for m, p, t in itertools.product(range(10), range(10), range(100))]


def build_dataset(oracle: Oracle, cond: FlowConditions, parallelism: int = 1, codes=None,
                  seed: int = 0) -> Dataset:
    """Label every code with the oracle and keep converged shapes with 0 <= C_L <= 2."""
    codes = enumerate_naca() if codes is None else list(codes)
    shapes = [naca4(c) for c in codes]
    live = [i for i, s in enumerate(shapes) if not s.degenerate]
    results = [NotConverged(DEGENERATE_PANEL)] * len(shapes)
    for i, r in zip(live, batch_evaluate([shapes[i] for i in live], cond, oracle, parallelism)):
        results[i] = r

    env_failures = sum(1 for r in results if r.reason in ENVIRONMENT_FAILURES)
    if results and env_failures > 0.5 * len(results):
        raise DatasetError(
            f"oracle environment failures on {env_failures}/{len(results)} shapes; "
            "check the oracle installation (is the XFoil path correct?)"
        )

    items, reasons = [], {}
    converged = filtered = 0
    for code, shape, r in zip(codes, shapes, results):
        if not r.converged:
            reasons[r.reason] = reasons.get(r.reason, 0) + 1
            continue
        converged += 1
        if not CL_MIN <= r.cl <= CL_MAX:
            filtered += 1
            continue
        items.append(LabeledShape(shape, r.cl, code))
    manifest = DatasetManifest(oracle.name, cond, len(codes), converged, filtered, len(items), seed)
    log.info("dataset: %d attempted, %d converged, %d filtered, %d retained",
             manifest.attempted, converged, filtered, len(items))
    return Dataset(items, manifest, reasons)


def _header() -> list[str]:
    return ["m", "p", "tau", "cl"] + [f"x{i}" for i in range(1, N_POINTS + 1)] + [
        f"y{i}" for i in range(1, N_POINTS + 1)]


def save(dataset: Dataset, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / CSV_NAME, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_header())
        for item in dataset.items:
            src = item.source
            digits = [src.m, src.p, src.tau] if isinstance(src, NacaCode) else ["", "", ""]
            w.writerow(digits + [repr(float(item.c_l))] + [repr(float(v)) for v in item.airfoil.x]
                       + [repr(float(v)) for v in item.airfoil.y])
    (directory / MANIFEST_NAME).write_text(dataset.manifest.to_text())


def load(directory) -> Dataset:
    directory = Path(directory)
    try:
        manifest = DatasetManifest.from_text((directory / MANIFEST_NAME).read_text())
    except FileNotFoundError:
        raise DatasetError(f"{directory}: no {MANIFEST_NAME}") from None
    header = _header()
    items = []
    with open(directory / CSV_NAME, newline="") as fh:
        rows = csv.reader(fh)
        if next(rows, None) != header:
            raise DatasetError(f"{CSV_NAME}: unexpected header")
        for n, row in enumerate(rows, start=2):
            if len(row) != len(header):
                raise DatasetError(f"{CSV_NAME}:{n}: expected {len(header)} fields, got {len(row)} (truncated?)")
            vals = np.array(row[3:], dtype=np.float64)
            pts = np.column_stack([vals[1:N_POINTS + 1], vals[N_POINTS + 1:]])
            if row[0] != "":
                code = NacaCode(int(row[0]), int(row[1]), int(row[2]))
                airfoil = Airfoil(pts, name=f"NACA {code}", degenerate=code.tau == 0)
            else:
                code = "generated"
                airfoil = Airfoil(pts)
            items.append(LabeledShape(airfoil, float(vals[0]), code))
    if len(items) != manifest.retained:
        raise DatasetError(f"{CSV_NAME} has {len(items)} rows but the manifest records {manifest.retained}")
    return Dataset(items, manifest)


def histogram(dataset: Dataset, bins: int = 20) -> np.ndarray:
    if bins < 1:
        raise ValueError("bins must be >= 1")
    counts, _ = np.histogram(dataset.labels(), bins=bins, range=(CL_MIN, CL_MAX))
    return counts
