"""Inviscid linear-strength vortex panel method.

Vortex strength varies linearly along each panel and is continuous at the
nodes, giving N+1 unknowns for N panels.  The N no-penetration equations at
panel midpoints are closed by the Kutta condition gamma_1 + gamma_{N+1} = 0,
i.e. equal and opposite tangential velocity on the two trailing-edge panels.
Influence coefficients follow the classic Kuethe & Chow formulation.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve

from pgfoil.airfoil import ZERO_SEGMENT, Airfoil
from pgfoil.cae.base import (
    DEGENERATE_PANEL,
    NON_FINITE,
    SELF_INTERSECTION,
    SINGULAR,
    Converged,
    FlowConditions,
    NotConverged,
    OracleResult,
)

MIN_PANEL = 1e-9
MAX_CONDITION = 1e12


def signed_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def self_intersects(points: np.ndarray) -> bool:
    """True if any two non-adjacent edges of the closed polygon cross or touch."""
    a = points
    b = np.roll(points, -1, axis=0)
    keep = np.hypot(*(b - a).T) > ZERO_SEGMENT
    a, b = a[keep], b[keep]
    n = len(a)
    if n < 4:
        return False

    ex, ey = (b - a).T
    # orientation of every endpoint of edge j relative to edge i (rows i, columns j)
    da = ex[:, None] * (a[None, :, 1] - a[:, None, 1]) - ey[:, None] * (a[None, :, 0] - a[:, None, 0])
    db = ex[:, None] * (b[None, :, 1] - a[:, None, 1]) - ey[:, None] * (b[None, :, 0] - a[:, None, 0])
    straddle = da * db <= 0
    crossing = straddle & straddle.T
    # collinear-but-disjoint pairs pass the sign test trivially; require bounding-box overlap
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    box = ((hi[:, None, 0] >= lo[None, :, 0]) & (hi[None, :, 0] >= lo[:, None, 0])
           & (hi[:, None, 1] >= lo[None, :, 1]) & (hi[None, :, 1] >= lo[:, None, 1]))
    pairs = np.triu(crossing & box, k=2)
    pairs[0, n - 1] = False
    return bool(pairs.any())


def influence_matrices(nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normal and tangential influence matrices (N x N+1) and panel angles."""
    X, Y = nodes[:, 0], nodes[:, 1]
    dx, dy = np.diff(X), np.diff(Y)
    S = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    xm = 0.5 * (X[:-1] + X[1:])
    ym = 0.5 * (Y[:-1] + Y[1:])
    n = len(S)

    rx = xm[:, None] - X[None, :-1]
    ry = ym[:, None] - Y[None, :-1]
    ci, si = (dx / S)[:, None], (dy / S)[:, None]
    cj, sj = ci.T, si.T
    c2j, s2j = cj * cj - sj * sj, 2.0 * sj * cj
    Sj = S[None, :]

    A = -rx * cj - ry * sj
    B = rx * rx + ry * ry
    C = si * cj - ci * sj  # sin(theta_i - theta_j)
    D = ci * cj + si * sj  # cos(theta_i - theta_j)
    E = rx * sj - ry * cj
    with np.errstate(divide="ignore", invalid="ignore"):
        F = np.log1p(Sj * (Sj + 2.0 * A) / B)
    G = np.arctan2(E * Sj, B + A * Sj)
    sin_two = si * c2j - ci * s2j  # sin(theta_i - 2 theta_j)
    cos_two = ci * c2j + si * s2j
    P = rx * sin_two + ry * cos_two
    Q = rx * cos_two - ry * sin_two

    cn2 = D + 0.5 * Q * F / Sj - (A * C + D * E) * G / Sj
    cn1 = 0.5 * D * F + C * G - cn2
    ct2 = C + 0.5 * P * F / Sj + (A * D - C * E) * G / Sj
    ct1 = 0.5 * C * F - D * G - ct2
    diag = np.arange(n)
    cn1[diag, diag], cn2[diag, diag] = -1.0, 1.0
    ct1[diag, diag] = ct2[diag, diag] = 0.5 * np.pi

    an = np.zeros((n, n + 1))
    at = np.zeros((n, n + 1))
    an[:, :-1] += cn1
    an[:, 1:] += cn2
    at[:, :-1] += ct1
    at[:, 1:] += ct2
    return an, at, theta


def solve(shape: Airfoil, alpha_deg: float) -> dict:
    """Solve the panel problem; returns gamma, surface Cp, lift and diagnostics.

    Raises ``ValueError`` with a reason tag for geometry the method rejects.
    """
    pts = np.asarray(shape.points, dtype=np.float64)
    if len(pts) < 8:
        raise ValueError(DEGENERATE_PANEL)
    if not np.all(np.isfinite(pts)):
        raise ValueError(NON_FINITE)
    seg = np.hypot(*np.diff(pts, axis=0).T)
    te = 0.5 * (pts[0] + pts[-1])
    chord = float(np.max(np.hypot(*(pts - te).T)))
    if chord <= 0 or np.min(seg) < MIN_PANEL * chord:
        raise ValueError(DEGENERATE_PANEL)
    if self_intersects(pts):
        raise ValueError(SELF_INTERSECTION)
    # the influence formulas assume clockwise node order (TE -> lower -> LE -> upper)
    nodes = pts[::-1] if signed_area(pts) > 0 else pts

    alpha = np.radians(alpha_deg)
    an, at, theta = influence_matrices(nodes)
    n = len(theta)
    mat = np.zeros((n + 1, n + 1))
    mat[:n] = an
    mat[n, 0] = mat[n, n] = 1.0
    rhs = np.zeros(n + 1)
    rhs[:n] = np.sin(theta - alpha)
    if not np.all(np.isfinite(mat)):
        raise ValueError(NON_FINITE)
    lu, piv = lu_factor(mat, check_finite=False)
    anorm = np.linalg.norm(mat, 1)
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    if info != 0 or rcond < 1.0 / MAX_CONDITION:
        raise ValueError(SINGULAR)
    gamma = lu_solve((lu, piv), rhs, check_finite=False)
    vt = np.cos(theta - alpha) + at @ gamma
    S = np.hypot(*np.diff(nodes, axis=0).T)
    # gamma is normalized by 2*pi*V_inf; Gamma / V_inf = 2*pi*sum(mean gamma * S)
    circulation = 2.0 * np.pi * float(np.sum(0.5 * (gamma[:-1] + gamma[1:]) * S))
    cl = 2.0 * circulation / chord
    if not np.isfinite(cl):
        raise ValueError(NON_FINITE)
    return {"gamma": gamma, "cp": 1.0 - vt * vt, "vt": vt, "nodes": nodes, "cl": cl,
            "chord": chord, "rcond": float(rcond)}


class PanelOracle:
    """Built-in oracle; flow conditions other than the angle of attack are ignored."""

    name = "panel"

    def evaluate(self, shape: Airfoil, cond: FlowConditions) -> OracleResult:
        try:
            out = solve(shape, cond.angle_of_attack)
        except ValueError as exc:
            return NotConverged(str(exc))
        return Converged(out["cl"])


def panel_evaluate(shape: Airfoil, cond: FlowConditions) -> OracleResult:
    return PanelOracle().evaluate(shape, cond)
