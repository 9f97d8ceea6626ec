"""Choosing the regularization parameter.

``transition_k0`` locates where noise overtakes the clean SVD coefficients,
``lcurve_corner`` finds the corner of a discrete L-curve, and
``oracle_best_k`` picks the iterate closest to the known solution (for
evaluation only).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class NoCorner(ValueError):
    """The point set has no usable corner."""


@dataclass(frozen=True)
class PicardData:
    sigma: np.ndarray
    coeffs_clean: np.ndarray
    coeffs_noise: np.ndarray
    coeffs_total: np.ndarray

    @classmethod
    def from_instance(cls, svd, instance):
        U = svd.U
        return cls(
            sigma=svd.sigma,
            coeffs_clean=np.abs(U.T @ instance.problem.b_hat),
            coeffs_noise=np.abs(U.T @ instance.e),
            coeffs_total=np.abs(U.T @ instance.b),
        )


class Transition(NamedTuple):
    k0: int
    found: bool


def transition_k0(p: PicardData) -> Transition:
    """First ``k`` with ``|u_k^T b_hat| > |u_{k+1}^T e|`` and ``|u_{k+1}^T b_hat| <= |u_{k+1}^T e|``.

    Returns ``Transition(n, False)`` when no such ``k`` exists.
    """
    clean = np.asarray(p.coeffs_clean)
    noise = np.asarray(p.coeffs_noise)
    n = clean.size
    hits = np.flatnonzero((clean[:-1] > noise[1:]) & (clean[1:] <= noise[1:]))
    if hits.size == 0:
        return Transition(n, False)
    return Transition(int(hits[0]) + 1, True)


def _prune(x, y, min_step=0.0):
    keep = [0]
    for i in range(1, len(x)):
        j = keep[-1]
        if x[i] < x[j] and y[i] > y[j] and np.hypot(x[i] - x[j], y[i] - y[j]) > min_step:
            keep.append(i)
    return np.array(keep)


MIN_SEPARATION = 1e-3


def lcurve_corner(log_resid, log_soln, min_separation: float = MIN_SEPARATION) -> int:
    """Index (into the input sequences) of the discrete L-curve corner.

    Points that do not continue the decreasing-residual, increasing-norm
    trend are dropped first, as are points lying within ``min_separation``
    times the diagonal of the bounding box of the previous kept point
    (stagnating iterates pile up there and make circle curvature blow up
    at rounding-level scale). Curvature at each interior point is that of
    the circle through it and its two surviving neighbours, signed so the
    L-shaped bend is positive; the largest wins, earliest on ties.
    """
    x = np.asarray(log_resid, dtype=np.float64)
    y = np.asarray(log_soln, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("log_resid and log_soln must be 1-D sequences of equal length")
    if x.size < 4:
        raise NoCorner(f"need at least 4 points, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("L-curve coordinates must be finite")

    if min_separation < 0:
        raise ValueError("min_separation must be nonnegative")
    keep = _prune(x, y, min_separation * np.hypot(np.ptp(x), np.ptp(y)))
    if keep.size < 4:
        raise NoCorner(f"only {keep.size} points left after monotone pruning")
    px, py = x[keep], y[keep]
    ax, ay = px[1:-1] - px[:-2], py[1:-1] - py[:-2]
    bx, by = px[2:] - px[1:-1], py[2:] - py[1:-1]
    cx, cy = px[2:] - px[:-2], py[2:] - py[:-2]
    cross = ax * by - ay * bx
    # the curve runs leftwards then upwards: a clockwise (negative) turn
    kappa = -2.0 * cross / (np.hypot(ax, ay) * np.hypot(bx, by) * np.hypot(cx, cy))
    extent = max(np.ptp(px), np.ptp(py))
    if not np.max(kappa) * extent > 1e-8:
        raise NoCorner("no bend in the L-curve (points are collinear or convex the wrong way)")
    return int(keep[1 + int(np.argmax(kappa))])


def oracle_best_k(path) -> int:
    """Iteration number with the smallest relative error, earliest on ties."""
    if path.relative_errors is None:
        raise ValueError("path has no relative errors (x_true was not supplied)")
    return int(path.ks[int(np.argmin(path.relative_errors))])


def lcurve_k(path) -> int:
    """L-curve corner of a solver path, as an iteration number."""
    idx = lcurve_corner(np.log(path.residual_norms), np.log(path.solution_norms))
    return int(path.ks[idx])
