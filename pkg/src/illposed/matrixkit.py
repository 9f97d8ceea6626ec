"""Dense linear-algebra helpers shared by every other module.

Matrices are plain float64 ``numpy.ndarray`` objects. The only structured
type here is :class:`SvdTriplet`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS = np.finfo(np.float64).eps


class SvdError(RuntimeError):
    """The SVD iteration failed or produced non-finite factors."""


@dataclass(frozen=True)
class SvdTriplet:
    """Thin SVD ``A = U @ diag(sigma) @ V.T`` with ``sigma`` descending."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def n(self) -> int:
        return self.sigma.size

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T


def as_matrix(A, name="A") -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def svd(A) -> SvdTriplet:
    """Thin SVD with a reproducible sign convention.

    Each column of ``V`` is flipped so that its largest-magnitude entry is
    nonnegative; the matching column of ``U`` is flipped with it.
    """
    A = as_matrix(A)
    m, n = A.shape
    if m < n:
        raise ValueError(f"svd requires rows >= cols, got {m}x{n}")
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SvdError(str(exc)) from exc
    if not (np.all(np.isfinite(U)) and np.all(np.isfinite(s)) and np.all(np.isfinite(Vt))):
        raise SvdError("SVD returned non-finite factors")
    V = Vt.T
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[idx, np.arange(n)] < 0, -1.0, 1.0)
    return SvdTriplet(U=U * signs, sigma=s, V=V * signs)


def spectral_norm(A) -> float:
    """Largest singular value of a dense matrix."""
    A = as_matrix(A)
    if A.size == 0:
        return 0.0
    try:
        s = np.linalg.svd(A, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise SvdError(str(exc)) from exc
    return float(s[0])


def _check_orthonormal(X, name, tol=1e-8):
    k = X.shape[1]
    err = np.linalg.norm(X.T @ X - np.eye(k))
    if err > tol:
        raise ValueError(f"{name} does not have orthonormal columns (||{name}^T {name} - I||_F = {err:.3e})")


def sin_theta_max(X, Y) -> float:
    """Sine of the largest canonical angle between ``span(X)`` and ``span(Y)``.

    Both bases must have orthonormal columns and the same shape. The value is
    ``sqrt(1 - sigma_min(X^T Y)^2)``; it is evaluated as the 2-norm of
    ``Y - X (X^T Y)``, which is the same number for orthonormal bases but
    keeps full relative accuracy when the angle is tiny.
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape != Y.shape:
        raise ValueError(f"X and Y must have the same shape, got {X.shape} and {Y.shape}")
    _check_orthonormal(X, "X")
    _check_orthonormal(Y, "Y")
    R = Y - X @ (X.T @ Y)
    s = np.linalg.svd(R, compute_uv=False)[0] if R.size else 0.0
    return float(min(max(s, 0.0), 1.0))


def orth(X) -> np.ndarray:
    """Orthonormal basis of the column space via Householder QR."""
    Q, _ = np.linalg.qr(as_matrix(X, "X"))
    return Q
