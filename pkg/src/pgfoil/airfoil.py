"""Airfoil geometry: NACA four-digit sections, the flat 496-vector layout,
the turning-angle distortion measure and Savitzky-Golay smoothing."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import savgol_filter

N_POINTS = 248
ZERO_SEGMENT = 1e-12


@dataclass(frozen=True, eq=False)
class Airfoil:
    """Closed contour, trailing edge -> upper -> leading edge -> lower -> trailing edge."""

    points: np.ndarray
    name: str = ""
    degenerate: bool = False

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"points must be an (n, 2) array, got {pts.shape}")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]

    def __len__(self) -> int:
        return len(self.points)

    def same_as(self, other: "Airfoil") -> bool:
        return np.array_equal(self.points, other.points)


@dataclass(frozen=True)
class NacaCode:
    m: int
    p: int
    tau: int

    def __post_init__(self):
        if not (0 <= self.m <= 9 and 0 <= self.p <= 9 and 0 <= self.tau <= 99):
            raise ValueError(f"invalid NACA digits {self.m}, {self.p}, {self.tau}")

    @classmethod
    def parse(cls, text: str) -> "NacaCode":
        text = text.strip().upper().removeprefix("NACA").strip()
        if len(text) != 4 or not text.isdigit():
            raise ValueError(f"expected four digits, got {text!r}")
        return cls(int(text[0]), int(text[1]), int(text[2:]))

    def __str__(self) -> str:
        return f"{self.m}{self.p}{self.tau:02d}"


def _camber(x: np.ndarray, m: float, p: float) -> tuple[np.ndarray, np.ndarray]:
    if m == 0.0:
        return np.zeros_like(x), np.zeros_like(x)
    # p == 0 has no forward segment: the aft branch covers the whole chord
    fwd = x < p
    pf = p if p > 0 else 1.0
    yc = np.where(fwd, m / pf**2 * (2 * p * x - x * x), m / (1 - p) ** 2 * ((1 - 2 * p) + 2 * p * x - x * x))
    dyc = np.where(fwd, 2 * m / pf**2 * (p - x), 2 * m / (1 - p) ** 2 * (p - x))
    return yc, dyc


def naca4(code: NacaCode, n_points: int = N_POINTS) -> Airfoil:
    """Four-digit section on cosine-spaced stations with a closed trailing edge.

    Thickness is applied normal to the camber line.  If that pushes the contour
    outside 0 <= x <= 1 (strongly cambered, thick sections) the whole contour is
    rescaled uniformly so the chord spans exactly [0, 1].
    """
    if n_points < 8 or n_points % 2:
        raise ValueError("n_points must be even and >= 8")
    half = n_points // 2
    beta = 2.0 * np.pi * np.arange(half) / (n_points - 1)
    x = 0.5 * (1.0 + np.cos(beta))
    m, p, t = code.m / 100.0, code.p / 10.0, code.tau / 100.0
    yt = 5 * t * (0.2969 * np.sqrt(x) - 0.1260 * x - 0.3516 * x**2 + 0.2843 * x**3 - 0.1036 * x**4)
    yt[0] = 0.0  # coefficients cancel at x = 1 only up to rounding
    yc, dyc = _camber(x, m, p)
    theta = np.arctan(dyc)
    xu, yu = x - yt * np.sin(theta), yc + yt * np.cos(theta)
    xl, yl = x + yt * np.sin(theta), yc - yt * np.cos(theta)
    pts = np.concatenate([np.column_stack([xu, yu]), np.column_stack([xl, yl])[::-1]])
    lo, hi = pts[:, 0].min(), pts[:, 0].max()
    if lo < 0.0 or hi > 1.0:
        pts = np.column_stack([(pts[:, 0] - lo) / (hi - lo), pts[:, 1] / (hi - lo)])
    return Airfoil(pts, name=f"NACA {code}", degenerate=code.tau == 0)


def flatten(shape: Airfoil) -> np.ndarray:
    """(x1..xN, y1..yN)."""
    return np.concatenate([shape.x, shape.y])


def unflatten(vector, n_points: int = N_POINTS, name: str = "") -> Airfoil:
    v = np.asarray(vector, dtype=np.float64).ravel()
    if v.size != 2 * n_points:
        raise ValueError(f"expected a vector of length {2 * n_points}, got {v.size}")
    return Airfoil(np.column_stack([v[:n_points], v[n_points:]]), name=name)


def _as_points(shape) -> np.ndarray:
    return shape.points if isinstance(shape, Airfoil) else np.asarray(shape, dtype=np.float64)


def turning_angles(shape) -> np.ndarray:
    """Absolute turning angle at every vertex of the closed polygon."""
    pts = _as_points(shape)
    if len(pts) < 3 or len(np.unique(pts, axis=0)) < 3:
        raise ValueError("distortion needs at least 3 distinct points")
    seg = np.roll(pts, -1, axis=0) - pts
    length = np.hypot(seg[:, 0], seg[:, 1])
    keep = length > ZERO_SEGMENT
    seg = seg[keep]
    nxt = np.roll(seg, -1, axis=0)
    # atan2 keeps full precision near straight runs and reversals, where arccos does not
    cross = seg[:, 0] * nxt[:, 1] - seg[:, 1] * nxt[:, 0]
    dot = np.einsum("ij,ij->i", seg, nxt)
    return np.arctan2(np.abs(cross), dot)


def distortion(shape) -> float:
    """Sum of absolute turning angles; 2*pi for a convex contour."""
    return float(np.sum(turning_angles(shape)))


def mean_distortion(shapes) -> float:
    shapes = list(shapes)
    if not shapes:
        raise ValueError("mean_distortion of an empty collection")
    return float(np.mean([distortion(s) for s in shapes]))


def savgol_smooth(shape: Airfoil, window: int = 7, order: int = 3, mode: str = "wrap") -> Airfoil:
    """Filter x and y independently with a local least-squares polynomial.

    ``mode="wrap"`` treats the contour as periodic; any other scipy mode
    (e.g. ``"interp"``) is passed through for open polylines.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be a positive odd integer, got {window}")
    if window == 1:
        return Airfoil(shape.points.copy(), shape.name, shape.degenerate)
    if not 0 <= order < window:
        raise ValueError(f"order must satisfy 0 <= order < window, got {order}")
    if window > len(shape):
        raise ValueError("window longer than the contour")
    xs = savgol_filter(shape.x, window, order, mode=mode)
    ys = savgol_filter(shape.y, window, order, mode=mode)
    return Airfoil(np.column_stack([xs, ys]), shape.name)


def zigzag(shape: Airfoil, amplitude: float = 0.004) -> Airfoil:
    """Alternate +/- offsets along the local normal.

    The offset fades out over the last tenth of the chord so the thin trailing
    edge does not fold over itself.
    """
    pts = shape.points
    tangent = np.gradient(pts, axis=0)
    normal = np.column_stack([-tangent[:, 1], tangent[:, 0]])
    normal /= np.maximum(np.hypot(normal[:, 0], normal[:, 1]), 1e-300)[:, None]
    sign = np.where(np.arange(len(pts)) % 2 == 0, 1.0, -1.0)
    sign[0] = sign[-1] = 0.0
    lo, hi = pts[:, 0].min(), pts[:, 0].max()
    taper = np.clip((hi - pts[:, 0]) / (0.1 * max(hi - lo, 1e-300)), 0.0, 1.0)
    sign *= taper
    return Airfoil(pts + amplitude * sign[:, None] * normal, name=f"{shape.name} zigzag".strip())


def write_dat(path, shape: Airfoil, name: str | None = None) -> None:
    lines = [name or shape.name or "airfoil"]
    lines += [f"{x:.8e} {y:.8e}" for x, y in shape.points]
    Path(path).write_text("\n".join(lines) + "\n")


def read_dat(path) -> Airfoil:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty airfoil file")
    rows = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{ln}: expected 'x y', got {line!r}")
        rows.append((float(parts[0]), float(parts[1])))
    return Airfoil(np.array(rows), name=lines[0].strip())
