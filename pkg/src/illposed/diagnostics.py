"""Subspace-capture and rank-approximation diagnostics for the bidiagonalization.

For each step ``k`` the quantities tabulated are

* ``gamma_k = ||A - P_{k+1} B_k Q_k^T||``, the accuracy of the rank-``k``
  approximation, together with its lower bound ``sigma_{k+1}`` and upper
  bound ``sigma_{k+1} + sigma_1 sin(theta_k)``;
* ``sin(theta_k)``, the largest canonical angle between the dominant right
  singular space ``span(V_k)`` and the Krylov space ``span(Q_k)``;
* ``alpha_{k+1}``, which never exceeds ``gamma_k`` and equals the residual
  of the Ritz triplets of ``B_k`` lifted back to ``A``.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import svds

from .bidiag import BidiagFactorization, projected_matrix
from .matrixkit import EPS, sin_theta_max, spectral_norm
from .selection import PicardData

ROUNDOFF_LEVEL = 1e-13
CHECK_TOL = 1e-8
DELTA_MAX_K = 40
_DENSE_LIMIT = 256


class RepeatedSingularValues(UserWarning):
    pass


class PicardCoefficientVanishes(ValueError):
    pass


def _largest_singular_value(R) -> float:
    if min(R.shape) <= _DENSE_LIMIT:
        return spectral_norm(R)
    v0 = np.ones(R.shape[1]) / np.sqrt(R.shape[1])
    s = svds(R, k=1, tol=0, v0=v0, return_singular_vectors=False, solver="arpack")
    return float(s[0])


def gamma(A, f: BidiagFactorization, k: int) -> float:
    """``||A - P_{k+1} B_k Q_k^T||_2``, evaluated as ``||A (I - Q_k Q_k^T)||_2``."""
    if not 1 <= k <= f.k:
        raise ValueError(f"k must lie in 1..{f.k}, got {k}")
    Q = f.Q[:, :k]
    R = A - (A @ Q) @ Q.T
    return _largest_singular_value(R)


def _repeated(sigma, k, rtol=1e-12):
    s = sigma[: k + 1]
    gaps = np.abs(s[:-1] - s[1:])
    return bool(np.any(gaps <= rtol * np.abs(s[:-1])))


def sin_theta_krylov(svd, f: BidiagFactorization, k: int) -> float:
    """``||sin Theta(span V_k, K_k(A^T A, A^T b))||`` using ``Q_k`` as the Krylov basis."""
    if not 1 <= k <= f.k:
        raise ValueError(f"k must lie in 1..{f.k}, got {k}")
    if _repeated(svd.sigma, min(k, svd.n - 1)):
        warnings.warn(f"singular values near index {k} are not distinct", RepeatedSingularValues, stacklevel=2)
    return sin_theta_max(svd.V[:, :k], f.Q[:, :k])


@dataclass(frozen=True)
class DeltaK:
    matrix: np.ndarray
    frobenius: float
    two_norm: float

    def sin_theta(self) -> float:
        return self.two_norm / np.sqrt(1.0 + self.two_norm**2)


def lagrange_block(sigma, k: int) -> np.ndarray:
    """``L_i(sigma_j^2)`` for ``j = k+1..n`` (rows) and ``i = 1..k`` (columns).

    ``L_i`` is the Lagrange basis polynomial on the nodes
    ``sigma_1^2 .. sigma_k^2``; this is ``T_{k2} T_{k1}^{-1}`` without ever
    forming the Vandermonde matrix.
    """
    s = np.asarray(sigma, dtype=np.float64)
    nodes = s[:k]
    targets = s[k:]
    # (sigma_l^2 - x^2) as (sigma_l - x)(sigma_l + x) for accuracy
    num = (nodes[None, :] - targets[:, None]) * (nodes[None, :] + targets[:, None])  # (n-k, k)
    den = (nodes[None, :] - nodes[:, None]) * (nodes[None, :] + nodes[:, None])  # (i, l)
    L = np.empty((targets.size, k))
    for i in range(k):
        others = np.arange(k) != i
        L[:, i] = np.prod(num[:, others] / den[i, others][None, :], axis=1)
    return L


def delta_k(svd, b, k: int) -> DeltaK:
    """The ``(n-k) x k`` matrix with ``span V [I; Delta_k] = K_k(A^T A, A^T b)``."""
    s = svd.sigma
    n = s.size
    if not 1 <= k < n:
        raise ValueError(f"k must lie in 1..{n - 1}, got {k}")
    if k > DELTA_MAX_K:
        raise ValueError(f"delta_k is restricted to k <= {DELTA_MAX_K} (Lagrange products over/underflow)")
    if k > 1 and np.any(s[: k - 1] < (1.0 + 1e-6) * s[1:k]):
        raise ValueError("sigma_1..sigma_k are not well separated (ratio < 1 + 1e-6)")
    if not s[k - 1] > 0:
        raise ValueError(f"sigma_{k} is zero")
    b = np.asarray(b, dtype=np.float64)
    beta = svd.U.T @ b
    if np.any(np.abs(beta[:k]) < 1e3 * EPS * np.linalg.norm(b)):
        i = int(np.argmin(np.abs(beta[:k]))) + 1
        raise PicardCoefficientVanishes(f"Picard coefficient u_{i}^T b vanishes")
    D2 = s[k:] * beta[k:]
    D1 = s[:k] * beta[:k]
    M = D2[:, None] * lagrange_block(s, k) / D1[None, :]
    return DeltaK(matrix=M, frobenius=float(np.linalg.norm(M)), two_norm=spectral_norm(M) if M.size else 0.0)


def coefficient_ratio(p: PicardData, k: int) -> float:
    """``max_{j>k} |u_j^T b| / min_{j<=k} |u_j^T b|``."""
    c = np.asarray(p.coeffs_total)
    if not 1 <= k < c.size:
        raise ValueError(f"k must lie in 1..{c.size - 1}, got {k}")
    den = np.min(c[:k])
    if den == 0:
        raise ZeroDivisionError(f"min_{{j<={k}}} |u_j^T b| is zero")
    return float(np.max(c[k:]) / den)


def delta_bound(svd, p: PicardData, k: int) -> float:
    """Computable part of the Frobenius bound on ``Delta_k``: ``(sigma_{k+1}/sigma_k) c_k sqrt(k(n-k))``."""
    n = svd.n
    s = svd.sigma
    return float(s[k] / s[k - 1] * coefficient_ratio(p, k) * np.sqrt(k * (n - k)))


def ritz_residuals(A, f: BidiagFactorization, k: int):
    """``(||A^T U~ - V~ Theta^T||, ||A V~ - U~ Theta||)`` for the Ritz triplets of ``B_k``."""
    if not 1 <= k <= f.k:
        raise ValueError(f"k must lie in 1..{f.k}, got {k}")
    B = projected_matrix(f)[: k + 1, :k]
    W, theta, St = np.linalg.svd(B)
    Theta = np.zeros((k + 1, k))
    Theta[np.arange(k), np.arange(k)] = theta
    U_t = f.P[:, : k + 1] @ W
    V_t = f.Q[:, :k] @ St.T
    left = spectral_norm(A.T @ U_t - V_t @ Theta.T)
    right = spectral_norm(A @ V_t - U_t @ Theta)
    return left, right


def ritz_triplet_residual(A, f: BidiagFactorization, k: int) -> float:
    left, right = ritz_residuals(A, f, k)
    scale = max(f.alpha[0], spectral_norm(projected_matrix(f)))
    if right > CHECK_TOL * scale:
        raise ArithmeticError(f"A V~ - U~ Theta is {right:.3e}, expected ~0 (loss of orthogonality?)")
    return left


FIELDS = [
    "k",
    "gamma",
    "alpha_next",
    "sigma_next",
    "sin_theta",
    "c_k",
    "delta_fro_bound",
    "gamma_upper_bound",
    "ritz_residual",
    "roundoff_flag",
]
# CSV header of the diagnostics file format; only the two bound columns are named differently there
COLUMNS = FIELDS[:6] + ["bound_eqres1", "bound_thm22_hi"] + FIELDS[8:]


@dataclass
class DiagnosticsTable:
    k: np.ndarray
    gamma: np.ndarray
    alpha_next: np.ndarray
    sigma_next: np.ndarray
    sin_theta: np.ndarray
    c_k: np.ndarray
    delta_fro_bound: np.ndarray
    gamma_upper_bound: np.ndarray
    ritz_residual: np.ndarray
    roundoff_flag: np.ndarray
    sigma1: float = 1.0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.k.size

    @property
    def reliable(self) -> np.ndarray:
        return ~self.roundoff_flag

    def violations(self, tol: float = CHECK_TOL):
        """Failed inequalities among unflagged rows as ``(k, name, lhs, rhs)`` tuples."""
        slack = tol * self.sigma1
        out = []
        for i in np.flatnonzero(self.reliable):
            k = int(self.k[i])
            checks = [
                ("sigma_next<=gamma", self.sigma_next[i], self.gamma[i] + slack),
                ("alpha_next<=gamma", self.alpha_next[i], self.gamma[i] + slack),
                ("gamma<=gamma_upper_bound", self.gamma[i], self.gamma_upper_bound[i] + slack),
                ("ritz_residual==alpha_next", abs(self.ritz_residual[i] - self.alpha_next[i]), slack),
            ]
            out.extend((k, name, float(lhs), float(rhs)) for name, lhs, rhs in checks if not lhs <= rhs)
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COLUMNS)
            for i in range(len(self)):
                row = [int(self.k[i])]
                row += [repr(float(getattr(self, c)[i])) for c in FIELDS[1:-1]]
                row.append(int(bool(self.roundoff_flag[i])))
                w.writerow(row)


def read_table_csv(path) -> DiagnosticsTable:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = {f: np.array([float(r[c]) for r in rows]) for f, c in zip(FIELDS, COLUMNS)}
    cols["k"] = cols["k"].astype(int)
    cols["roundoff_flag"] = cols["roundoff_flag"].astype(bool)
    return DiagnosticsTable(**cols)


def roundoff_flags(alpha_next, sigma1, level=ROUNDOFF_LEVEL) -> np.ndarray:
    """Flag every step from the first one with ``alpha_{k+1} < level * sigma_1`` onwards."""
    below = np.asarray(alpha_next) < level * sigma1
    return np.cumsum(below) > 0


def build_table(instance, f: BidiagFactorization, svd, kmax: int) -> DiagnosticsTable:
    if f.k < kmax:
        raise ValueError(f"factorization has {f.k} steps, {kmax} requested")
    A = instance.problem.A
    sigma = svd.sigma
    s1 = float(sigma[0])
    picard = PicardData.from_instance(svd, instance)
    alpha = f.alpha

    rows = {c: [] for c in FIELDS}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RepeatedSingularValues)
        for k in range(1, kmax + 1):
            sin_t = sin_theta_krylov(svd, f, k)
            rows["k"].append(k)
            rows["gamma"].append(gamma(A, f, k))
            rows["alpha_next"].append(float(alpha[k]) if alpha.size > k else 0.0)
            rows["sigma_next"].append(float(sigma[k]))
            rows["sin_theta"].append(sin_t)
            try:
                rows["c_k"].append(coefficient_ratio(picard, k))
                rows["delta_fro_bound"].append(delta_bound(svd, picard, k))
            except ZeroDivisionError:
                rows["c_k"].append(np.inf)
                rows["delta_fro_bound"].append(np.inf)
            rows["gamma_upper_bound"].append(float(sigma[k]) + s1 * sin_t)
            rows["ritz_residual"].append(ritz_residuals(A, f, k)[0])
    arr = {c: np.array(v) for c, v in rows.items() if c != "roundoff_flag"}
    return DiagnosticsTable(
        roundoff_flag=roundoff_flags(arr["alpha_next"], s1),
        sigma1=s1,
        meta={"problem": instance.problem.name, "epsilon": instance.epsilon, "seed": instance.seed},
        **arr,
    )
