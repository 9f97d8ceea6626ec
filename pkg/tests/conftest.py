import functools
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from illposed import bidiag, diagnostics, matrixkit, problems, solvers

SEED = 7
N = 1024
KMAX = 60
PROBLEMS = ("shaw", "wing", "heat", "phillips", "deriv2")
LEVELS = (1e-2, 1e-3, 1e-4)


class Lab:
    """Lazily computed, cached full-size experiment runs shared across test modules."""

    @functools.lru_cache(maxsize=None)
    def problem(self, name, n=N):
        return problems.generate(name, n)

    @functools.lru_cache(maxsize=None)
    def svd(self, name, n=N):
        return matrixkit.svd(self.problem(name, n).A)

    @functools.lru_cache(maxsize=None)
    def instance(self, name, eps, n=N, seed=SEED):
        return problems.add_noise(self.problem(name, n), eps, seed)

    @functools.lru_cache(maxsize=None)
    def factorization(self, name, eps, n=N, seed=SEED, kmax=KMAX):
        inst = self.instance(name, eps, n, seed)
        f = bidiag.start(inst.problem.A, inst.b, breakdown_tol=0.0)
        return f.extend(kmax - f.k)

    @functools.lru_cache(maxsize=None)
    def lsqr(self, name, eps, n=N, seed=SEED, kmax=KMAX):
        inst = self.instance(name, eps, n, seed)
        return solvers.lsqr_path(self.factorization(name, eps, n, seed, kmax), inst.b, kmax, inst.problem.x_true)

    @functools.lru_cache(maxsize=None)
    def hybrid(self, name, eps, n=N, seed=SEED, kmax=KMAX):
        inst = self.instance(name, eps, n, seed)
        f = self.factorization(name, eps, n, seed, kmax)
        return solvers.hybrid_lsqr_path(f, inst.b, kmax, x_true=inst.problem.x_true)

    @functools.lru_cache(maxsize=None)
    def tsvd(self, name, eps, n=N, seed=SEED, kmax=KMAX):
        inst = self.instance(name, eps, n, seed)
        return solvers.tsvd_path(self.svd(name, n), inst.b, kmax, inst.problem.x_true)

    @functools.lru_cache(maxsize=None)
    def table(self, name, eps, n=N, seed=SEED, kmax=KMAX):
        inst = self.instance(name, eps, n, seed)
        f = self.factorization(name, eps, n, seed, kmax)
        return diagnostics.build_table(inst, f, self.svd(name, n), kmax)


_LAB = Lab()
_VERDICTS = {}


@pytest.fixture
def verdict():
    """Record ``(criterion, passed, detail)``; every recorded line is repeated in the terminal summary."""

    def record(number, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
        _VERDICTS[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_VERDICTS):
            terminalreporter.write_line(_VERDICTS[number])


@pytest.fixture(scope="session")
def lab():
    return _LAB


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_matrix(rng, m, n, cond=1e3):
    """Dense matrix with singular values spread geometrically between 1 and 1/cond."""
    U, _ = np.linalg.qr(rng.standard_normal((m, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    s = np.geomspace(1.0, 1.0 / cond, n)
    return (U * s) @ V.T


def synthetic(rng, sigma, m=None):
    """Matrix with prescribed singular values and random orthogonal factors."""
    n = len(sigma)
    m = m or n
    U, _ = np.linalg.qr(rng.standard_normal((m, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (U * np.asarray(sigma)) @ V.T


def write_grid(directory, kmax=KMAX, n=N):
    """One config per (problem, noise level) plus the sweep list; returns the list path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for name in PROBLEMS:
        for eps in LEVELS:
            tag = f"{name}_{eps:.0e}"
            (directory / f"{tag}.cfg").write_text(
                f"problem = {name}\nn = {n}\neps = {eps!r}\nseed = {SEED}\nkmax = {kmax}\nout = runs/{tag}\n"
            )
            names.append(f"{tag}.cfg")
    (directory / "grid.txt").write_text("\n".join(names) + "\n")
    return directory / "grid.txt"


@pytest.fixture(scope="session")
def grid_sweep(tmp_path_factory):
    """The full 5 x 3 grid solved once, serially; returns (grid file, output dir)."""
    from illposed import cli

    root = tmp_path_factory.mktemp("grid")
    grid = write_grid(root)
    assert cli.main(["sweep", str(grid), "--out", str(root / "summary")]) == 0
    return grid, root / "summary"
