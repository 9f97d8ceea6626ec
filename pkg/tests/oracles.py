"""Brute-force reference computations, deliberately independent of the library code paths."""

import math

import mpmath
import numpy as np
import scipy.linalg


def krylov_basis(A, b, k):
    """Orthonormal basis of span{A^T b, (A^T A) A^T b, ...} by Arnoldi on A^T A (classical GS, twice)."""
    N = A.T @ A
    v = A.T @ b
    V = [v / np.linalg.norm(v)]
    for _ in range(k - 1):
        w = N @ V[-1]
        M = np.array(V).T
        for _ in range(2):
            w = w - M @ (M.T @ w)
        V.append(w / np.linalg.norm(w))
    return np.array(V).T


def lsqr_bruteforce(A, b, k):
    """argmin ||b - A x|| over x in the k-th Krylov space, by dense least squares."""
    V = krylov_basis(A, b, k)
    y, *_ = np.linalg.lstsq(A @ V, b, rcond=None)
    return V @ y


def tsvd_partial_sum(A, b, k):
    U, s, Vt = scipy.linalg.svd(A, lapack_driver="gesvd")
    x = np.zeros(A.shape[1])
    for i in range(k):
        x += (U[:, i] @ b) / s[i] * Vt[i]
    return x


def sin_theta(X, Y):
    return float(np.sin(np.max(scipy.linalg.subspace_angles(X, Y))))


def delta_k_highprec(sigma, coeffs, k, dps=60):
    """Delta_k = D2 T2 T1^{-1} D1^{-1} with explicit Vandermonde matrices in extended precision."""
    with mpmath.workdps(dps):
        s2 = [mpmath.mpf(float(x)) ** 2 for x in sigma]
        n = len(s2)
        T1 = mpmath.matrix([[s2[i] ** p for p in range(k)] for i in range(k)])
        T2 = mpmath.matrix([[s2[j] ** p for p in range(k)] for j in range(k, n)])
        L = T2 * mpmath.inverse(T1)
        out = np.empty((n - k, k))
        for r in range(n - k):
            for c in range(k):
                j, i = k + r, c
                num = mpmath.mpf(float(sigma[j])) * mpmath.mpf(float(coeffs[j]))
                den = mpmath.mpf(float(sigma[i])) * mpmath.mpf(float(coeffs[i]))
                out[r, c] = float(num * L[r, c] / den)
    return out


def spectral_norm_sampled(A, samples, rng, power_steps=2):
    """max ||Ax|| / ||x|| over random directions, each pushed through a few power steps."""
    X = rng.standard_normal((A.shape[1], samples))
    for _ in range(power_steps):
        X = A.T @ (A @ X)
        X /= np.linalg.norm(X, axis=0)
    return float(np.max(np.linalg.norm(A @ X, axis=0) / np.linalg.norm(X, axis=0)))


def shaw_entry(n, i, j):
    h = math.pi / n
    s = -math.pi / 2 + (i + 0.5) * h
    t = -math.pi / 2 + (j + 0.5) * h
    u = math.pi * (math.sin(s) + math.sin(t))
    sinc = 1.0 if u == 0 else math.sin(u) / u
    return h * ((math.cos(s) + math.cos(t)) * sinc) ** 2


def heat_entry(n, i, j, kappa=1.0):
    if j > i:
        return 0.0
    h = 1.0 / n
    t = (i - j + 0.5) * h
    return h * t**-1.5 * math.exp(-1.0 / (4 * kappa**2 * t)) / (2 * kappa * math.sqrt(math.pi))


def galerkin_entry(kernel, a, n, i, j, length, kink=None):
    """(1/h) * int_{cell i} int_{cell j} K(s, t) dt ds on [a, a + length] via adaptive quadrature.

    ``kink`` is an offset ``c`` such that the kernel is non-smooth on the
    line ``s - t = c``; if that line is the cell diagonal the square is
    integrated as two triangles.
    """
    from scipy.integrate import dblquad

    h = length / n
    s0, t0 = a + i * h, a + j * h
    f = lambda t, s: kernel(s, t)
    opts = dict(epsabs=1e-15, epsrel=1e-13)
    if kink is not None and np.isclose(s0 - t0, kink):
        lo, _ = dblquad(f, s0, s0 + h, t0, lambda s: s - kink, **opts)
        hi, _ = dblquad(f, s0, s0 + h, lambda s: s - kink, t0 + h, **opts)
        return (lo + hi) / h
    val, _ = dblquad(f, s0, s0 + h, t0, t0 + h, **opts)
    return val / h


def deriv2_kernel(s, t):
    return s * (t - 1) if s < t else t * (s - 1)


def phillips_kernel(s, t):
    d = s - t
    return 1 + math.cos(math.pi * d / 3) if abs(d) < 3 else 0.0


def filter_expansion_exact(A, b, kmax, dps=50):
    """LSQR iterates k = 1..kmax from the filter-factor expansion, evaluated entirely in extended precision.

    Ritz values come from a Golub-Kahan run in ``dps``-digit arithmetic and the
    expansion uses an extended-precision SVD of ``A``. In double precision the
    product formula loses all accuracy once prod_j (sigma_1/theta_j)^2 nears 1/eps.
    """
    with mpmath.workdps(dps):
        Am = mpmath.matrix(np.asarray(A).tolist())
        bm = mpmath.matrix(np.asarray(b).tolist())
        n = Am.cols
        U, S, V = mpmath.svd_r(Am)
        At = Am.T
        ps, qs, al, be = [bm / mpmath.norm(bm)], [], [], []
        q = At * ps[0]
        for _ in range(kmax):
            if qs:
                q = q - be[-1] * qs[-1]
            for _ in range(2):
                for v in qs:
                    q = q - (v.T * q)[0] * v
            al.append(mpmath.norm(q))
            qs.append(q / al[-1])
            p = Am * qs[-1] - al[-1] * ps[-1]
            for _ in range(2):
                for v in ps:
                    p = p - (v.T * p)[0] * v
            be.append(mpmath.norm(p))
            ps.append(p / be[-1])
            q = At * ps[-1]
        coeff = U.T * bm
        out = []
        for k in range(1, kmax + 1):
            B = mpmath.zeros(k + 1, k)
            for i in range(k):
                B[i, i], B[i + 1, i] = al[i], be[i]
            theta = mpmath.svd_r(B, compute_uv=False)
            x = mpmath.zeros(n, 1)
            for i in range(n):
                prod = mpmath.mpf(1)
                for j in range(k):
                    prod *= 1 - (S[i] / theta[j]) ** 2
                x += (1 - prod) * coeff[i] / S[i] * V[i, :].T
            out.append(np.array([float(v) for v in x]))
    return out
