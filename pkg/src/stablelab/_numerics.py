"""Shared low-level numerics: quadrature rules, grid interpolation, slope fits.

Private plumbing used by the public modules; nothing here is part of the API.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy import special
from scipy.ndimage import map_coordinates


@lru_cache(maxsize=32)
def _leggauss_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    nodes, weights = 0.5 * (x + 1.0), 0.5 * w
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def gauss_legendre_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights for integrals over (0, 1) (memoized)."""
    return _leggauss_01(n)


def gauss_jacobi_01(n: int, expo: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights so that  int_0^1 f(u) u^expo du = sum_i w_i f(u_i).

    ``expo > -1`` is the power-law weight absorbed into the rule, which keeps
    integrands with an integrable endpoint singularity smooth.
    """
    x, w = special.roots_jacobi(n, 0.0, expo)
    u = 0.5 * (x + 1.0)
    return u, w * 0.5 ** (expo + 1.0)


def loglog_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Ordinary least-squares slope and intercept of log y vs log x."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


def grid_eval(
    values: np.ndarray,
    half_extent: float,
    spacing: float,
    points: np.ndarray,
    extension: str = "periodic",
    order: int = 3,
) -> np.ndarray:
    """Evaluate a grid function at arbitrary physical points.

    ``values`` is sampled on the uniform axis x_i = -L + i*h per dimension
    (same axis for every dimension).  ``points`` has shape (..., d) for a
    d-dimensional field or (...,) for d=1.  ``extension`` is "periodic"
    (torus wrap) or "constant" (nearest-edge value outside the grid).
    """
    values = np.asarray(values, dtype=float)
    d = values.ndim
    pts = np.asarray(points, dtype=float)
    if d == 1 and (pts.ndim == 0 or pts.shape[-1:] != (1,)):
        pts = pts[..., None] if pts.ndim == 0 or pts.shape[-1] != 1 else pts
    if pts.shape[-1] != d:
        raise ValueError(f"points last axis must be {d}, got {pts.shape}")
    idx = (pts + half_extent) / spacing
    coords = [idx[..., k].ravel() for k in range(d)]
    mode = "grid-wrap" if extension == "periodic" else "nearest"
    out = map_coordinates(values, coords, order=order, mode=mode, prefilter=True)
    return out.reshape(pts.shape[:-1])


def interp_rows_periodic(
    values: np.ndarray, positions: np.ndarray, half_extent: float, spacing: float
) -> np.ndarray:
    """Cubic evaluation of row m of ``values`` (M, N) at physical point
    positions[m], with periodic wrap along the last axis."""
    m = values.shape[0]
    idx = (np.asarray(positions, dtype=float) + half_extent) / spacing
    coords = [np.arange(m, dtype=float), idx]
    return map_coordinates(values, coords, order=3, mode="grid-wrap", prefilter=True)


def trapezoid_mass(values: np.ndarray, spacing: float) -> float:
    """Trapezoidal integral of a grid function over the periodic box
    (endpoints identified, so it reduces to the rectangle rule)."""
    return float(values.sum() * spacing**values.ndim)
