"""Flat little-endian binary container for problems, noisy instances and factorizations.

Layout::

    magic      8 bytes  b"ILLPOSD1"
    name       u32 length + UTF-8 bytes
    n          u64
    seed       i64   (-1 when absent)
    epsilon    f64   (0.0 when absent)
    count      u32   number of arrays
    per array: u32 name length, name bytes, u32 ndim, ndim x u64 shape,
               then the row-major float64 payload
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .bidiag import BidiagFactorization
from .problems import DiscreteProblem, NoisyInstance

MAGIC = b"ILLPOSD1"


class ContainerError(ValueError):
    """The file is not a valid container or lacks an expected array."""


@dataclass
class Container:
    name: str
    n: int
    seed: int | None
    epsilon: float | None
    arrays: dict

    def require(self, *keys):
        missing = [k for k in keys if k not in self.arrays]
        if missing:
            raise ContainerError(f"container lacks arrays {missing}")
        return [self.arrays[k] for k in keys]


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def write_container(path, c: Container):
    parts = [
        MAGIC,
        _pack_str(c.name),
        struct.pack("<Qqd", c.n, -1 if c.seed is None else c.seed, 0.0 if c.epsilon is None else c.epsilon),
        struct.pack("<I", len(c.arrays)),
    ]
    for key, arr in c.arrays.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        parts.append(_pack_str(key))
        parts.append(struct.pack("<I", a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape))
        parts.append(a.tobytes(order="C"))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, size):
        if self.pos + size > len(self.data):
            raise ContainerError("truncated container")
        out = self.data[self.pos : self.pos + size]
        self.pos += size
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self):
        (length,) = self.unpack("<I")
        return self.take(length).decode("utf-8")


def read_container(path) -> Container:
    with open(path, "rb") as fh:
        r = _Reader(fh.read())
    if r.take(len(MAGIC)) != MAGIC:
        raise ContainerError(f"{path}: not an illposed container")
    name = r.string()
    n, seed, eps = r.unpack("<Qqd")
    (count,) = r.unpack("<I")
    arrays = {}
    for _ in range(count):
        key = r.string()
        (ndim,) = r.unpack("<I")
        shape = r.unpack(f"<{ndim}Q")
        size = int(np.prod(shape, dtype=np.int64))
        arrays[key] = np.frombuffer(r.take(8 * size), dtype="<f8").reshape(shape).astype(np.float64)
    if r.pos != len(r.data):
        raise ContainerError("trailing bytes after last array")
    return Container(name, int(n), None if seed < 0 else int(seed), None if seed < 0 else float(eps), arrays)


# -- typed wrappers -------------------------------------------------------------
def save_problem(path, problem: DiscreteProblem):
    arrays = {"A": problem.A, "x_true": problem.x_true, "b_hat": problem.b_hat}
    write_container(path, Container(problem.name, problem.n, None, None, arrays))


def load_problem(path) -> DiscreteProblem:
    c = read_container(path)
    A, x, b_hat = c.require("A", "x_true", "b_hat")
    return DiscreteProblem(c.name, A, x, b_hat)


def save_instance(path, inst: NoisyInstance):
    p = inst.problem
    arrays = {"A": p.A, "x_true": p.x_true, "b_hat": p.b_hat, "e": inst.e}
    write_container(path, Container(p.name, p.n, inst.seed, inst.epsilon, arrays))


def load_instance(path) -> NoisyInstance:
    c = read_container(path)
    if c.seed is None:
        raise ContainerError(f"{path}: holds a noise-free problem, not a noisy instance")
    A, x, b_hat, e = c.require("A", "x_true", "b_hat", "e")
    return NoisyInstance(DiscreteProblem(c.name, A, x, b_hat), e, c.epsilon, c.seed)


def save_factorization(path, f: BidiagFactorization, name="factorization", seed=None, epsilon=None):
    arrays = {"P": f.P, "Q": np.array(f._q).T, "alpha": np.array(f._alpha), "beta": f.beta}
    write_container(path, Container(name, f.A.shape[1], seed, epsilon, arrays))


def load_factorization(path, A, b) -> BidiagFactorization:
    """Rebuild a factorization of ``(A, b)`` from a dump for post-hoc diagnostics."""
    c = read_container(path)
    P, Q, alpha, beta = c.require("P", "Q", "alpha", "beta")
    return BidiagFactorization.from_arrays(A, b, P, Q, alpha, beta)


def export_csv(path, inst: NoisyInstance | DiscreteProblem):
    """Vector data as CSV columns ``i, x_true, b_hat[, e, b]`` (the matrix is not exported)."""
    noisy = isinstance(inst, NoisyInstance)
    p = inst.problem if noisy else inst
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "x_true", "b_hat"] + (["e", "b"] if noisy else []))
        for i in range(p.n):
            row = [i + 1, repr(float(p.x_true[i])), repr(float(p.b_hat[i]))]
            if noisy:
                row += [repr(float(inst.e[i])), repr(float(inst.b[i]))]
            w.writerow(row)
