"""Discretized first-kind integral equations and seeded noise.

Five classical test problems are provided: ``shaw``, ``wing`` and ``heat``
use midpoint-rule collocation, ``phillips`` and ``deriv2`` use Galerkin
discretization with orthonormal box functions on a uniform grid. For every
problem the noise-free right-hand side is ``b_hat = A @ x_true`` so that
``x_true`` solves the discrete problem exactly; the analytic right-hand
sides are exposed separately (``*_rhs_formula``) for cross-checks only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_N = 1024


@dataclass(frozen=True)
class DiscreteProblem:
    name: str
    A: np.ndarray
    x_true: np.ndarray
    b_hat: np.ndarray

    @property
    def n(self) -> int:
        return self.x_true.size


@dataclass(frozen=True)
class NoisyInstance:
    """A problem together with one realisation of additive Gaussian noise."""

    problem: DiscreteProblem
    e: np.ndarray
    epsilon: float
    seed: int

    @property
    def b(self) -> np.ndarray:
        return self.problem.b_hat + self.e

    @property
    def noise_level(self) -> float:
        return float(np.linalg.norm(self.e) / np.linalg.norm(self.problem.b_hat))


def _check_n(n, multiple=2, minimum=2):
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise TypeError(f"n must be an integer, got {type(n).__name__}")
    if n < minimum or n % multiple:
        raise ValueError(f"n must be a multiple of {multiple} and at least {minimum}, got {n}")
    return int(n)


def _finish(name, A, x):
    A = np.ascontiguousarray(A, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    return DiscreteProblem(name=name, A=A, x_true=x, b_hat=A @ x)


def shaw(n: int = DEFAULT_N) -> DiscreteProblem:
    """One-dimensional image restoration on [-pi/2, pi/2]."""
    n = _check_n(n)
    h = np.pi / n
    t = -np.pi / 2 + (np.arange(n) + 0.5) * h
    cs = np.cos(t)
    sn = np.sin(t)
    c = cs[:, None] + cs[None, :]
    u = np.pi * (sn[:, None] + sn[None, :])
    with np.errstate(invalid="ignore", divide="ignore"):
        sinc = np.where(u == 0.0, 1.0, np.sin(u) / u)
    A = h * (c * sinc) ** 2
    x = 2.0 * np.exp(-6.0 * (t - 0.8) ** 2) + np.exp(-2.0 * (t + 0.5) ** 2)
    return _finish("shaw", A, x)


def wing(n: int = DEFAULT_N, t1: float = 1.0 / 3.0, t2: float = 2.0 / 3.0) -> DiscreteProblem:
    """Kernel ``t exp(-s t^2)`` on [0, 1] with a box-shaped solution."""
    n = _check_n(n)
    h = 1.0 / n
    t = (np.arange(n) + 0.5) * h
    A = h * t[None, :] * np.exp(-t[:, None] * t[None, :] ** 2)
    x = ((t1 < t) & (t < t2)).astype(np.float64)
    return _finish("wing", A, x)


def wing_rhs_formula(n: int = DEFAULT_N, t1: float = 1.0 / 3.0, t2: float = 2.0 / 3.0) -> np.ndarray:
    s = (np.arange(_check_n(n)) + 0.5) / n
    return (np.exp(-s * t1**2) - np.exp(-s * t2**2)) / (2.0 * s)


def heat(n: int = DEFAULT_N, kappa: float = 1.0) -> DiscreteProblem:
    """Inverse heat equation: a Volterra kernel, hence lower triangular."""
    n = _check_n(n)
    h = 1.0 / n
    t = (np.arange(n) + 0.5) * h
    kern = h / (2.0 * kappa * np.sqrt(np.pi)) * t**-1.5 * np.exp(-1.0 / (4.0 * kappa**2 * t))
    i, j = np.indices((n, n))
    A = np.where(i >= j, kern[np.clip(i - j, 0, n - 1)], 0.0)

    x = np.zeros(n)
    ti = np.arange(1, n // 2 + 1) * 20.0 / n
    x[: n // 2] = np.where(
        ti < 2.0,
        0.75 * ti**2 / 4.0,
        np.where(ti < 3.0, 0.75 + (ti - 2.0) * (3.0 - ti), 0.75 * np.exp(-(ti - 3.0) * 2.0)),
    )
    return _finish("heat", A, x)


def phillips(n: int = DEFAULT_N) -> DiscreteProblem:
    """Phillips' problem on [-6, 6]; ``n`` must be divisible by 4."""
    n = _check_n(n, multiple=4, minimum=4)
    h = 12.0 / n
    n4 = n // 4
    c = np.cos(np.arange(-1, n4 + 1) * 4.0 * np.pi / n)
    r = np.zeros(n)
    r[:n4] = h + 9.0 / (h * np.pi**2) * (2.0 * c[1 : n4 + 1] - c[:n4] - c[2 : n4 + 2])
    r[n4] = h / 2.0 + 9.0 / (h * np.pi**2) * (np.cos(4.0 * np.pi / n) - 1.0)
    i, j = np.indices((n, n))
    A = r[np.abs(i - j)]

    # cell averages of 1 + cos(pi t / 3) on |t| < 3, scaled by 1/sqrt(h)
    w = np.pi / 3.0
    edges = -6.0 + np.arange(n + 1) * h
    lo, hi = np.clip(edges[:-1], -3.0, 3.0), np.clip(edges[1:], -3.0, 3.0)
    x = ((hi - lo) + (np.sin(w * hi) - np.sin(w * lo)) / w) / np.sqrt(h)
    return _finish("phillips", A, x)


def phillips_rhs_formula(n: int = DEFAULT_N, order: int = 8) -> np.ndarray:
    """Galerkin projection of the analytic right-hand side (Gauss-Legendre per cell)."""
    n = _check_n(n, multiple=4, minimum=4)
    h = 12.0 / n
    nodes, weights = np.polynomial.legendre.leggauss(order)
    left = -6.0 + np.arange(n) * h
    s = left[:, None] + (nodes[None, :] + 1.0) * h / 2.0
    w = np.pi / 3.0
    vals = (6.0 - np.abs(s)) * (1.0 + 0.5 * np.cos(w * s)) + 9.0 / (2.0 * np.pi) * np.sin(w * np.abs(s))
    return (vals @ weights) * (h / 2.0) / np.sqrt(h)


def deriv2(n: int = DEFAULT_N) -> DiscreteProblem:
    """Green's function of the second derivative on [0, 1], hat-shaped solution."""
    n = _check_n(n)
    h = 1.0 / n
    idx = np.arange(1, n + 1, dtype=np.float64)
    i, j = idx[:, None], idx[None, :]
    # lower triangle: (1/h) * int_{I_i} (s - 1) ds * int_{I_j} t dt
    lower = h**2 * (j - 0.5) * ((i - 0.5) * h - 1.0)
    A = np.tril(lower, -1)
    A = A + A.T
    A[np.diag_indices(n)] = h**2 * ((idx**2 - idx + 0.25) * h - (idx - 2.0 / 3.0))
    # the kink at 1/2 is a cell edge (n even), so cell averages are midpoint values
    t = (idx - 0.5) * h
    x = np.sqrt(h) * np.where(t < 0.5, t, 1.0 - t)
    return _finish("deriv2", A, x)


def deriv2_rhs_formula(n: int = DEFAULT_N, order: int = 8) -> np.ndarray:
    n = _check_n(n)
    h = 1.0 / n
    nodes, weights = np.polynomial.legendre.leggauss(order)
    s = (np.arange(n) * h)[:, None] + (nodes[None, :] + 1.0) * h / 2.0
    vals = np.where(s < 0.5, (4 * s**3 - 3 * s) / 24.0, (-4 * s**3 + 12 * s**2 - 9 * s + 1) / 24.0)
    return (vals @ weights) * (h / 2.0) / np.sqrt(h)


GENERATORS = {
    "shaw": shaw,
    "wing": wing,
    "heat": heat,
    "phillips": phillips,
    "deriv2": deriv2,
}


def generate(name: str, n: int = DEFAULT_N) -> DiscreteProblem:
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(GENERATORS)}") from None
    return gen(n)


def standard_normals(n: int, seed: int) -> np.ndarray:
    """``n`` standard normals by Box-Muller on PCG64 uniforms."""
    rng = np.random.Generator(np.random.PCG64(seed))
    pairs = (n + 1) // 2
    u1 = 1.0 - rng.random(pairs)  # (0, 1], keeps log finite
    u2 = rng.random(pairs)
    radius = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(2.0 * np.pi * u2)
    z[1::2] = radius * np.sin(2.0 * np.pi * u2)
    return z[:n]


def add_noise(problem: DiscreteProblem, epsilon: float, seed: int) -> NoisyInstance:
    """White Gaussian noise rescaled so that ``||e|| / ||b_hat|| == epsilon``."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    z = standard_normals(problem.b_hat.size, seed)
    e = z * (epsilon * np.linalg.norm(problem.b_hat) / np.linalg.norm(z))
    return NoisyInstance(problem=problem, e=e, epsilon=float(epsilon), seed=int(seed))
