"""Golub-Kahan (Lanczos) bidiagonalization with full reorthogonalization.

After ``k`` steps the factorization holds ``P_{k+1}``, ``Q_{k+1}``,
``alpha_1 .. alpha_{k+1}`` and ``beta_2 .. beta_{k+1}`` such that::

    A Q_k         = P_{k+1} B_k
    A^T P_{k+1}   = Q_k B_k^T + alpha_{k+1} q_{k+1} e_{k+1}^T

where ``B_k`` is the ``(k+1) x k`` lower bidiagonal matrix with diagonal
``alpha_1 .. alpha_k`` and subdiagonal ``beta_2 .. beta_{k+1}``.
"""

from __future__ import annotations

import numpy as np

from .matrixkit import EPS


class Breakdown(RuntimeError):
    """The process hit an (numerically) invariant subspace and cannot continue."""

    def __init__(self, at_step, message=None):
        self.at_step = at_step
        super().__init__(message or f"Lanczos bidiagonalization broke down at step {at_step}")


def _reorthogonalize(v, basis):
    # two passes of modified Gram-Schmidt against every stored column
    for _ in range(2):
        for u in basis:
            v -= (u @ v) * u
    return v


def _closing_vector(v, norm, basis, tiny):
    """Next basis vector; a deterministic filler when ``v`` is (numerically) zero."""
    dim = v.size
    if len(basis) >= dim:
        return np.zeros(dim)
    if not tiny:
        return v / norm
    # unit vector orthogonal to ``basis``, seeded by the least-covered axis
    B = np.array(basis).T
    leak = np.einsum("ij,ij->i", B, B)
    w = np.zeros(dim)
    w[int(np.argmin(leak))] = 1.0
    w = _reorthogonalize(w, basis)
    return w / np.linalg.norm(w)


class BidiagFactorization:
    """Incrementally extendable bidiagonalization of ``(A, b)``.

    Use :func:`start` to create one. ``breakdown_tol`` is the relative
    threshold (times an estimate of ``sigma_1``) below which a candidate
    vector is treated as zero. ``None`` selects ``10 * n * eps``; ``0.0``
    only stops on an exactly zero vector and otherwise keeps iterating into
    the round-off regime.
    """

    def __init__(self, A, b, breakdown_tol=None):
        self.A = A
        self.b = np.asarray(b, dtype=np.float64)
        self.bnorm = float(np.linalg.norm(self.b))
        m, n = A.shape
        self.breakdown_tol = 10.0 * n * EPS if breakdown_tol is None else float(breakdown_tol)
        self._p = []
        self._q = []
        self._alpha = []
        self._beta = []
        self.breakdown_at = None

    # -- state -----------------------------------------------------------
    @property
    def k(self) -> int:
        return len(self._beta)

    @property
    def P(self) -> np.ndarray:
        """``P_{k+1}``."""
        return np.array(self._p[: self.k + 1]).T

    @property
    def Q(self) -> np.ndarray:
        """``Q_k``."""
        return np.array(self._q[: self.k]).T

    @property
    def q_next(self):
        return self._q[self.k] if len(self._q) > self.k else None

    @property
    def alpha(self) -> np.ndarray:
        """``alpha_1 .. alpha_{k+1}`` (``alpha_{k+1}`` missing after a beta breakdown)."""
        return np.array(self._alpha[: self.k + 1])

    @property
    def beta(self) -> np.ndarray:
        """``beta_2 .. beta_{k+1}``."""
        return np.array(self._beta)

    @property
    def alpha_next(self) -> float:
        return self._alpha[self.k] if len(self._alpha) > self.k else 0.0

    def sigma1_estimate(self) -> float:
        est = self._alpha[0] if self._alpha else 0.0
        if self.k:
            est = max(est, np.linalg.norm(projected_matrix(self), 2))
        return est

    def snapshot(self, k=None):
        """Immutable copy of the first ``k`` steps."""
        k = self.k if k is None else k
        if k > self.k:
            raise ValueError(f"cannot snapshot {k} steps of a {self.k}-step factorization")
        f = BidiagFactorization(self.A, self.b, self.breakdown_tol)
        f._p = [p.copy() for p in self._p[: k + 1]]
        f._q = [q.copy() for q in self._q[: k + 1]]
        f._alpha = list(self._alpha[: k + 1])
        f._beta = list(self._beta[:k])
        f.breakdown_at = self.breakdown_at if k == self.k else None
        return f

    @classmethod
    def from_arrays(cls, A, b, P, Q, alpha, beta, breakdown_tol=None):
        """Rebuild a factorization from stored bases and coefficients.

        ``P`` and ``Q`` hold basis vectors as columns; ``beta`` has ``k``
        entries and ``alpha`` ``k`` or ``k + 1``.
        """
        f = cls(np.asarray(A, dtype=np.float64), b, breakdown_tol)
        P = np.asarray(P, dtype=np.float64)
        Q = np.asarray(Q, dtype=np.float64)
        k = len(beta)
        if P.shape[1] != k + 1 or not k <= Q.shape[1] <= k + 1 or len(alpha) != Q.shape[1]:
            raise ValueError("inconsistent factorization arrays")
        f._p = [P[:, i].copy() for i in range(P.shape[1])]
        f._q = [Q[:, i].copy() for i in range(Q.shape[1])]
        f._alpha = [float(a) for a in alpha]
        f._beta = [float(x) for x in beta]
        return f

    # -- iteration -------------------------------------------------------
    def _step(self):
        A = self.A
        j = self.k + 1
        threshold = self.breakdown_tol * self.sigma1_estimate()

        p = A @ self._q[-1] - self._alpha[-1] * self._p[-1]
        p = _reorthogonalize(p, self._p)
        beta = float(np.linalg.norm(p))
        full = len(self._p) >= p.size
        if full or beta == 0.0 or beta <= threshold:
            # A Q_j lies in span(P_j): B_j closes with a (near) zero beta
            self._p.append(_closing_vector(p, beta, self._p, tiny=beta <= threshold))
            self._beta.append(beta)
            self.breakdown_at = j + 1
            return
        self._p.append(p / beta)
        self._beta.append(beta)

        q = A.T @ self._p[-1] - beta * self._q[-1]
        q = _reorthogonalize(q, self._q)
        alpha = float(np.linalg.norm(q))
        full = len(self._q) >= q.size
        if full or alpha == 0.0 or alpha <= threshold:
            self._q.append(_closing_vector(q, alpha, self._q, tiny=alpha <= threshold))
            self._alpha.append(alpha)
            self.breakdown_at = j + 1
            return
        self._q.append(q / alpha)
        self._alpha.append(alpha)

    def extend(self, steps: int = 1):
        """Run ``steps`` more steps in place and return ``self``."""
        for _ in range(steps):
            if self.breakdown_at is not None:
                raise Breakdown(self.breakdown_at)
            self._step()
        return self


def start(A, b, breakdown_tol=None) -> BidiagFactorization:
    """Initialise with ``p_1 = b/||b||`` and ``q_1 = A^T p_1 / alpha_1``.

    The returned factorization is at ``k = 1`` unless the very first step
    already breaks down, in which case ``breakdown_at`` is set and ``B_1``
    closes with ``beta_2 ~ 0``.
    """
    A = np.asarray(A, dtype=np.float64)
    f = BidiagFactorization(A, b, breakdown_tol)
    if f.bnorm == 0.0:
        raise Breakdown(1, "right-hand side is zero")
    p = f.b / f.bnorm
    q = A.T @ p
    alpha = float(np.linalg.norm(q))
    if alpha == 0.0:
        raise Breakdown(1, "A^T b is zero")
    f._p.append(p)
    f._q.append(q / alpha)
    f._alpha.append(alpha)
    f._step()
    return f


def projected_matrix(f: BidiagFactorization) -> np.ndarray:
    """The ``(k+1) x k`` lower bidiagonal ``B_k``."""
    k = f.k
    if k < 1:
        raise ValueError("projected matrix needs k >= 1")
    B = np.zeros((k + 1, k))
    B[np.arange(k), np.arange(k)] = f._alpha[:k]
    B[np.arange(1, k + 1), np.arange(k)] = f._beta[:k]
    return B
