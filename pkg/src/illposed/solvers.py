"""TSVD, LSQR and hybrid LSQR solution paths."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .bidiag import BidiagFactorization, projected_matrix
from .selection import NoCorner, lcurve_corner


@dataclass
class SolverPath:
    method: str
    ks: np.ndarray
    iterates: np.ndarray
    residual_norms: np.ndarray
    solution_norms: np.ndarray
    relative_errors: Optional[np.ndarray] = None
    inner_truncation: Optional[np.ndarray] = None
    true_residual_norms: Optional[np.ndarray] = None

    @property
    def kmax(self) -> int:
        return int(self.ks[-1])

    def iterate(self, k: int) -> np.ndarray:
        return self.iterates[k - 1]

    def best(self):
        """``(k, relative_error)`` at the error minimum."""
        i = int(np.argmin(self.relative_errors))
        return int(self.ks[i]), float(self.relative_errors[i])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "residual_norm", "solution_norm", "relative_error", "inner_rank"])
            for i, k in enumerate(self.ks):
                err = "" if self.relative_errors is None else repr(float(self.relative_errors[i]))
                rank = "" if self.inner_truncation is None else str(int(self.inner_truncation[i]))
                w.writerow([int(k), repr(float(self.residual_norms[i])), repr(float(self.solution_norms[i])), err, rank])


def read_path_csv(path, method=None) -> SolverPath:
    """Load the scalar columns of a path CSV (iterates are not stored)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    ks = np.array([int(r["k"]) for r in rows])
    col = lambda key: np.array([float(r[key]) for r in rows]) if rows and rows[0][key] != "" else None
    ranks = col("inner_rank")
    return SolverPath(
        method=method or "",
        ks=ks,
        iterates=np.empty((len(rows), 0)),
        residual_norms=col("residual_norm"),
        solution_norms=col("solution_norm"),
        relative_errors=col("relative_error"),
        inner_truncation=None if ranks is None else ranks.astype(int),
    )


def _finish(method, X, res, x_true, ranks=None, true_res=None):
    X = np.asarray(X)
    norms = np.linalg.norm(X, axis=1)
    errs = None
    if x_true is not None:
        errs = np.linalg.norm(X - x_true[None, :], axis=1) / np.linalg.norm(x_true)
    return SolverPath(
        method=method,
        ks=np.arange(1, X.shape[0] + 1),
        iterates=X,
        residual_norms=np.asarray(res, dtype=np.float64),
        solution_norms=norms,
        relative_errors=errs,
        inner_truncation=None if ranks is None else np.asarray(ranks, dtype=int),
        true_residual_norms=None if true_res is None else np.asarray(true_res),
    )


# -- TSVD ------------------------------------------------------------------
def tsvd_solve(svd, b, k: int) -> np.ndarray:
    """``sum_{i<=k} (u_i^T b / sigma_i) v_i``."""
    n = svd.n
    if not 1 <= k <= n:
        raise ValueError(f"truncation index must satisfy 1 <= k <= {n}, got {k}")
    if not svd.sigma[k - 1] > 0:
        raise ValueError(f"sigma_{k} is zero")
    coef = (svd.U[:, :k].T @ b) / svd.sigma[:k]
    return svd.V[:, :k] @ coef


def tsvd_path(svd, b, kmax: int, x_true=None) -> SolverPath:
    b = np.asarray(b, dtype=np.float64)
    X = np.array([tsvd_solve(svd, b, k) for k in range(1, kmax + 1)])
    beta = svd.U.T @ b
    # ||b - A x_k||^2 = ||b||^2 - sum_{i<=k} (u_i^T b)^2 for square A; use the direct form
    res = [np.linalg.norm(b - svd.U[:, :k] @ beta[:k]) for k in range(1, kmax + 1)]
    return _finish("tsvd", X, res, x_true)


# -- LSQR --------------------------------------------------------------------
def solve_projected(alpha, beta, rhs):
    """Least-squares solve of ``B y ~ rhs * e_1`` for lower-bidiagonal ``B`` via Givens QR.

    ``alpha`` holds the ``k`` diagonal entries and ``beta`` the ``k``
    subdiagonal ones. Returns ``(y, residual_norm)``.
    """
    k = len(alpha)
    rho = np.empty(k)
    theta = np.empty(max(k - 1, 0))
    phi = np.empty(k)
    rho_bar = alpha[0]
    phi_bar = rhs
    for i in range(k):
        r = np.hypot(rho_bar, beta[i])
        if r == 0.0:
            raise np.linalg.LinAlgError(f"projected matrix is rank deficient at column {i + 1}")
        c, s = rho_bar / r, beta[i] / r
        rho[i] = r
        phi[i] = c * phi_bar
        phi_bar = -s * phi_bar
        if i + 1 < k:
            theta[i] = s * alpha[i + 1]
            rho_bar = c * alpha[i + 1]
    y = np.empty(k)
    y[-1] = phi[-1] / rho[-1]
    for i in range(k - 2, -1, -1):
        y[i] = (phi[i] - theta[i] * y[i + 1]) / rho[i]
    return y, abs(phi_bar)


def _check_steps(f, kmax):
    if kmax < 1:
        raise ValueError("kmax must be at least 1")
    if f.k < kmax:
        raise ValueError(f"factorization has {f.k} steps, {kmax} requested")


def lsqr_path(f: BidiagFactorization, b, kmax: int, x_true=None) -> SolverPath:
    """LSQR iterates ``x_k = Q_k y_k`` for ``k = 1..kmax``."""
    _check_steps(f, kmax)
    b = np.asarray(b, dtype=np.float64)
    alpha, beta = f.alpha, f.beta
    Q = f.Q
    X, res, true_res = [], [], []
    for k in range(1, kmax + 1):
        y, r = solve_projected(alpha[:k], beta[:k], f.bnorm)
        x = Q[:, :k] @ y
        X.append(x)
        res.append(r)
        true_res.append(np.linalg.norm(b - f.A @ x))
    return _finish("lsqr", X, res, x_true, true_res=true_res)


# -- filter factors ------------------------------------------------------------
def _filter(sigma, ritz):
    """Return ``(f, f / sigma)`` evaluated without cancellation."""
    sigma = np.asarray(sigma, dtype=np.float64)
    ritz = np.asarray(ritz, dtype=np.float64)
    if np.any(ritz == 0):
        raise ZeroDivisionError("Ritz values must be nonzero")
    ratio = (sigma[:, None] / ritz[None, :]) ** 2
    factors = 1.0 - ratio
    direct = 1.0 - np.prod(factors, axis=1)
    # all factors in (0, 1]: product close to one, use log1p/expm1
    safe = np.all(ratio < 1.0, axis=1)
    with np.errstate(divide="ignore"):
        logged = -np.expm1(np.sum(np.log1p(-np.where(safe[:, None], ratio, 0.0)), axis=1))
    f = np.where(safe, logged, direct)
    f = np.where(np.any(factors == 0.0, axis=1), 1.0, f)
    with np.errstate(divide="ignore", invalid="ignore"):
        f_over = np.where(sigma > 0, f / sigma, 0.0)
    return f, f_over


def filter_factors(svd, ritz_sigmas, k: int) -> np.ndarray:
    """``f_i = 1 - prod_j (theta_j^2 - sigma_i^2) / theta_j^2`` for every singular value of ``A``.

    With ``theta_j`` the singular values of ``B_k`` these reproduce the LSQR
    iterate as ``sum_i f_i (u_i^T b / sigma_i) v_i``. Once Ritz values have
    converged the product is very sensitive to rounding in ``theta`` and
    ``sigma`` (roughly ``eps * prod_j (sigma_1 / theta_j)^2``), so in double
    precision the expansion is a diagnostic, not a way to compute iterates.
    """
    ritz = np.asarray(ritz_sigmas, dtype=np.float64)
    if ritz.size != k:
        raise ValueError(f"expected {k} Ritz values, got {ritz.size}")
    return _filter(svd.sigma, ritz)[0]


def filtered_solution(svd, b, ritz_sigmas) -> np.ndarray:
    """``sum_i f_i (u_i^T b / sigma_i) v_i`` with the filter applied before dividing."""
    _, f_over = _filter(svd.sigma, ritz_sigmas)
    return svd.V @ (f_over * (svd.U.T @ b))


# -- hybrid LSQR ----------------------------------------------------------------
def lcurve_rule(theta, coeffs) -> int:
    """Inner truncation rank from the L-curve of the projected TSVD solutions.

    ``theta`` are the ``k`` singular values of ``B_k`` and ``coeffs`` the
    ``k + 1`` components of ``||b|| e_1`` in its left singular basis.
    Falls back to ``k`` (no truncation) when no corner can be found.
    """
    k = theta.size
    tail = np.sqrt(np.cumsum((coeffs[::-1] ** 2))[::-1])  # tail[r] = ||coeffs[r:]||
    resid = tail[1 : k + 1]
    soln = np.sqrt(np.cumsum((coeffs[:k] / theta) ** 2))
    ok = (resid > 0) & (soln > 0)
    if ok.sum() < 4:
        return k
    idx = np.flatnonzero(ok)
    try:
        corner = lcurve_corner(np.log(resid[idx]), np.log(soln[idx]))
    except NoCorner:
        return k
    return int(idx[corner]) + 1


def fixed_rank(r: int) -> Callable:
    if r < 1:
        raise ValueError("rank must be positive")

    def rule(theta, coeffs):
        return min(r, theta.size)

    return rule


def hybrid_lsqr_path(f: BidiagFactorization, b, kmax: int, inner=None, x_true=None) -> SolverPath:
    """LSQR with TSVD applied to every projected problem.

    ``inner`` maps ``(theta, coeffs)`` to a truncation rank; the default is
    :func:`lcurve_rule`. An integer is shorthand for :func:`fixed_rank`.
    """
    _check_steps(f, kmax)
    if inner is None:
        inner = lcurve_rule
    elif isinstance(inner, (int, np.integer)):
        inner = fixed_rank(int(inner))
    alpha, beta = f.alpha, f.beta
    Q = f.Q
    B_all = projected_matrix(f)
    X, res, ranks = [], [], []
    for k in range(1, kmax + 1):
        B = B_all[: k + 1, :k]
        W, theta, St = np.linalg.svd(B)
        coeffs = f.bnorm * W[0, :]
        r = int(inner(theta, coeffs))
        if not 1 <= r <= k:
            raise ValueError(f"inner rule returned rank {r} outside 1..{k}")
        if r == k:
            y, rn = solve_projected(alpha[:k], beta[:k], f.bnorm)
        else:
            y = St[:r].T @ (coeffs[:r] / theta[:r])
            rhs = np.zeros(k + 1)
            rhs[0] = f.bnorm
            rn = np.linalg.norm(rhs - B @ y)
        X.append(Q[:, :k] @ y)
        res.append(rn)
        ranks.append(r)
    return _finish("hybrid_lsqr", X, res, x_true, ranks=ranks)
