"""Command-line experiment harness.

Subcommands ``generate``, ``solve``, ``diagnose``, ``sweep`` and ``report``.
Exit status: 0 success, 1 usage error, 2 numerical failure, 3 a checked
inequality or invariant was violated.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bidiag import Breakdown, start
from .container import export_csv, save_factorization, save_instance, save_problem
from .diagnostics import build_table, read_table_csv
from .matrixkit import SvdError, svd as compute_svd
from .problems import DEFAULT_N, GENERATORS, add_noise, generate
from .selection import NoCorner, lcurve_k, oracle_best_k
from .solvers import hybrid_lsqr_path, lsqr_path, read_path_csv, tsvd_path

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_VIOLATION = 0, 1, 2, 3
METHODS = ("tsvd", "lsqr", "hybrid")
DEFAULT_SEED = 7
DEFAULT_KMAX = 60
SUMMARY_COLUMNS = ["problem", "epsilon", "method", "best_k", "best_err", "lcurve_k", "lcurve_err", "hybrid_gain"]


class UsageError(Exception):
    pass


class ViolationError(Exception):
    pass


# -- run specification -------------------------------------------------------------
@dataclass(frozen=True)
class RunSpec:
    problem: str
    n: int = DEFAULT_N
    epsilon: float = 1e-3
    seed: int = DEFAULT_SEED
    kmax: int = DEFAULT_KMAX
    methods: tuple = METHODS
    out: str = "."

    def validate(self) -> "RunSpec":
        if self.problem not in GENERATORS:
            raise UsageError(f"unknown problem {self.problem!r}; choose from {sorted(GENERATORS)}")
        if self.n < 8:
            raise UsageError(f"n must be at least 8, got {self.n}")
        if not (0.0 < self.epsilon < 1.0):
            raise UsageError(f"eps must lie in (0, 1), got {self.epsilon}")
        if not 1 <= self.kmax <= self.n:
            raise UsageError(f"kmax must lie in 1..n={self.n}, got {self.kmax}")
        if self.seed < 0:
            raise UsageError(f"seed must be nonnegative, got {self.seed}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise UsageError(f"methods must be a nonempty subset of {METHODS}, got {list(self.methods)}")
        return self

    def echo(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        return d


_KEYS = {
    "problem": str,
    "n": int,
    "eps": float,
    "epsilon": float,
    "seed": int,
    "kmax": int,
    "methods": lambda s: tuple(m.strip() for m in s.split(",") if m.strip()),
    "out": str,
}


def _convert(key, raw):
    try:
        return _KEYS[key](raw)
    except ValueError:
        raise UsageError(f"bad value for {key}: {raw!r}") from None


def read_config(path) -> dict:
    """Parse a ``key = value`` file (``#`` starts a comment)."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    values = {}
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep or key not in _KEYS:
            raise UsageError(f"{path}:{lineno}: expected 'key = value' with key in {sorted(_KEYS)}")
        values["epsilon" if key == "eps" else key] = _convert(key, raw.strip())
    if "out" in values and not Path(values["out"]).is_absolute():
        values["out"] = str(path.parent / values["out"])
    return values


def spec_from_config(path) -> RunSpec:
    values = read_config(path)
    if "problem" not in values:
        raise UsageError(f"{path}: missing 'problem'")
    return RunSpec(**values).validate()


def _spec_from_args(args) -> RunSpec:
    values = read_config(args.config) if getattr(args, "config", None) else {}
    for key in ("problem", "n", "seed", "kmax", "out"):
        if getattr(args, key, None) is not None:
            values[key] = getattr(args, key)
    if args.eps is not None:
        values["epsilon"] = args.eps
    if getattr(args, "methods", None) is not None:
        values["methods"] = _convert("methods", args.methods)
    if "problem" not in values:
        raise UsageError("--problem is required (or give it in --config)")
    return RunSpec(**values).validate()


# -- file plumbing ---------------------------------------------------------------------
def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _claim(out: Path, names, force: bool):
    out.mkdir(parents=True, exist_ok=True)
    clash = [n for n in names if (out / n).exists()]
    if clash and not force:
        raise UsageError(f"refusing to overwrite {', '.join(clash)} in {out} (use --force)")


def _write_manifest(out: Path, command: str, spec: RunSpec, files, started: float, **extra):
    manifest = {
        **extra,
        "command": command,
        "spec": spec.echo(),
        "version": __version__,
        "wall_time_s": round(time.perf_counter() - started, 3),
        "files": {name: sha256(out / name) for name in files},
    }
    (out / f"{command}.manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _instance(spec: RunSpec):
    try:
        problem = generate(spec.problem, spec.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return add_noise(problem, spec.epsilon, spec.seed)


def _factorization(inst, kmax):
    # no relative breakdown threshold: the iteration is followed into the round-off regime
    f = start(inst.problem.A, inst.b, breakdown_tol=0.0)
    if f.k < kmax:
        f.extend(kmax - f.k)
    return f


def path_filename(method: str) -> str:
    return f"path_{method}.csv"


# -- commands --------------------------------------------------------------------------
def run_generate(spec: RunSpec, force=False) -> dict:
    started = time.perf_counter()
    out = Path(spec.out)
    files = ["problem.bin", "instance.bin", "instance.csv"]
    _claim(out, files + ["generate.manifest.json"], force)
    inst = _instance(spec)
    save_problem(out / "problem.bin", inst.problem)
    save_instance(out / "instance.bin", inst)
    export_csv(out / "instance.csv", inst)
    return _write_manifest(out, "generate", spec, files, started)


def _at(path, k):
    return float(path.relative_errors[k - 1])


def run_solve(spec: RunSpec, force=False) -> dict:
    """Solve every requested method; returns per-method summary rows."""
    started = time.perf_counter()
    out = Path(spec.out)
    files = [path_filename(m) for m in spec.methods]
    _claim(out, files + ["solve.manifest.json"], force)
    inst = _instance(spec)
    x_true = inst.problem.x_true
    paths = {}
    if "tsvd" in spec.methods:
        paths["tsvd"] = tsvd_path(compute_svd(inst.problem.A), inst.b, spec.kmax, x_true)
    if "lsqr" in spec.methods or "hybrid" in spec.methods:
        f = _factorization(inst, spec.kmax)
        if "lsqr" in spec.methods:
            paths["lsqr"] = lsqr_path(f, inst.b, spec.kmax, x_true)
        if "hybrid" in spec.methods:
            paths["hybrid"] = hybrid_lsqr_path(f, inst.b, spec.kmax, x_true=x_true)
    rows = []
    for m in spec.methods:
        p = paths[m]
        if m == "lsqr" and np.any(np.diff(p.residual_norms) > 1e-12 * p.residual_norms[0]):
            raise ViolationError("LSQR residual norms increased between iterations")
        p.to_csv(out / path_filename(m))
        k = oracle_best_k(p)
        try:
            lk = lcurve_k(p)
            lerr = _at(p, lk)
        except NoCorner:
            lk, lerr = None, None
        rows.append(dict(problem=spec.problem, epsilon=spec.epsilon, method=m, best_k=k, best_err=_at(p, k),
                         lcurve_k=lk, lcurve_err=lerr))
    gain = None
    if "lsqr" in paths and "hybrid" in paths:
        gain = paths["lsqr"].best()[1] / paths["hybrid"].best()[1]
    for r in rows:
        r["hybrid_gain"] = gain
    manifest = _write_manifest(out, "solve", spec, files, started)
    return {"rows": rows, "manifest": manifest}


def run_diagnose(spec: RunSpec, force=False) -> dict:
    started = time.perf_counter()
    out = Path(spec.out)
    files = ["diagnostics.csv", "factorization.bin"]
    _claim(out, files + ["diagnose.manifest.json"], force)
    inst = _instance(spec)
    svd = compute_svd(inst.problem.A)
    f = _factorization(inst, spec.kmax)
    table = build_table(inst, f, svd, spec.kmax)
    table.to_csv(out / "diagnostics.csv")
    save_factorization(out / "factorization.bin", f, spec.problem, spec.seed, spec.epsilon)
    manifest = _write_manifest(out, "diagnose", spec, files, started, sigma1=table.sigma1)
    return {"table": table, "violations": table.violations(), "manifest": manifest}


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _print_rows(rows, stream):
    for r in rows:
        lc = "none" if r["lcurve_k"] is None else f"{r['lcurve_k']} err={r['lcurve_err']:.6g}"
        print(f"{r['problem']} eps={r['epsilon']:g} {r['method']}: oracle k={r['best_k']} err={r['best_err']:.6g}; "
              f"lcurve k={lc}", file=stream)


def _sweep_one(config_path):
    spec = spec_from_config(config_path)
    return run_solve(spec, force=True)["rows"]


def read_sweep_list(path):
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read sweep file {path}: {exc.strerror}") from None
    entries = [ln.split("#", 1)[0].strip() for ln in lines]
    configs = [str(path.parent / e) if not Path(e).is_absolute() else e for e in entries if e]
    if not configs:
        raise UsageError(f"{path}: lists no run specs")
    for c in configs:
        spec_from_config(c)  # validate everything before starting work
    return configs


def run_sweep(sweep_file, out, workers=1, force=False):
    configs = read_sweep_list(sweep_file)
    out = Path(out)
    _claim(out, ["summary.csv"], force)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, configs))
    else:
        results = [_sweep_one(c) for c in configs]
    rows = [r for res in results for r in res]
    write_summary(out / "summary.csv", rows)
    return rows


def write_summary(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in SUMMARY_COLUMNS])


def _stored_sigma1(d: Path, table) -> float:
    try:
        return float(json.loads((d / "diagnose.manifest.json").read_text())["sigma1"])
    except (OSError, KeyError, ValueError):
        # every tabulated gamma and alpha is a lower bound on sigma_1: a stricter tolerance
        return float(max(np.max(table.gamma), np.max(table.alpha_next)))


def report(directory, stream=None) -> int:
    """Print a summary of every run directory below ``directory``; returns an exit status."""
    stream = sys.stdout if stream is None else stream
    root = Path(directory)
    if not root.is_dir():
        raise UsageError(f"{root} is not a directory")
    status = EXIT_OK
    found = False
    for d in sorted({p.parent for p in root.rglob("*.csv")}):
        rel = d.relative_to(root) if d != root else Path(".")
        for m in METHODS:
            f = d / path_filename(m)
            if not f.exists():
                continue
            found = True
            p = read_path_csv(f, m)
            line = f"{rel} {m}: kmax={p.kmax}"
            if p.relative_errors is not None:
                k = oracle_best_k(p)
                line += f" oracle k={k} err={_at(p, k):.6g}"
            try:
                line += f" lcurve k={lcurve_k(p)}"
            except NoCorner:
                line += " lcurve k=none"
            print(line, file=stream)
        diag = d / "diagnostics.csv"
        if diag.exists():
            found = True
            t = read_table_csv(diag)
            flagged = int(np.sum(t.roundoff_flag))
            ratio = t.gamma[t.reliable] / t.sigma_next[t.reliable]
            t.sigma1 = _stored_sigma1(d, t)
            bad = t.violations()
            print(f"{rel} diagnostics: rows={len(t)} flagged={flagged} "
                  f"max gamma/sigma_next={np.max(ratio) if ratio.size else math.nan:.4g} violations={len(bad)}",
                  file=stream)
            if bad:
                status = EXIT_VIOLATION
        summary = d / "summary.csv"
        if summary.exists():
            found = True
            print(f"{rel} summary:", file=stream)
            print(summary.read_text(), end="", file=stream)
    if not found:
        raise UsageError(f"no run outputs under {root}")
    return status


# -- argument parsing ----------------------------------------------------------------
class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _run_options(p, methods=True):
    p.add_argument("--config", help="key = value file with run parameters (flags override it)")
    p.add_argument("--problem", choices=sorted(GENERATORS))
    p.add_argument("--n", type=int)
    p.add_argument("--eps", type=float, help="relative noise level in (0, 1)")
    p.add_argument("--seed", type=int, help=f"noise seed (default {DEFAULT_SEED})")
    p.add_argument("--kmax", type=int, help=f"number of iterations / truncation levels (default {DEFAULT_KMAX})")
    if methods:
        p.add_argument("--methods", help="comma-separated subset of tsvd,lsqr,hybrid")
    p.add_argument("--out", help="output directory (default .)")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="illposed", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _run_options(sub.add_parser("generate", help="write problem and noisy instance containers"), methods=False)
    _run_options(sub.add_parser("solve", help="solution paths per method plus parameter choices"))
    _run_options(sub.add_parser("diagnose", help="subspace and rank-approximation diagnostics table"),
                 methods=False)
    sw = sub.add_parser("sweep", help="solve every run spec listed in a file")
    sw.add_argument("specs", help="file listing config paths, one per line")
    sw.add_argument("--out", required=True, help="directory for summary.csv")
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--force", action="store_true")
    rp = sub.add_parser("report", help="summarize existing outputs")
    rp.add_argument("directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            spec = _spec_from_args(args)
            m = run_generate(spec, args.force)
            print(f"wrote {', '.join(m['files'])} to {spec.out}")
        elif args.command == "solve":
            spec = _spec_from_args(args)
            _print_rows(run_solve(spec, args.force)["rows"], sys.stdout)
        elif args.command == "diagnose":
            spec = _spec_from_args(args)
            res = run_diagnose(spec, args.force)
            t = res["table"]
            print(f"{spec.problem} eps={spec.epsilon:g}: {len(t)} rows, {int(np.sum(t.roundoff_flag))} flagged, "
                  f"{len(res['violations'])} violations")
            for k, name, lhs, rhs in res["violations"]:
                print(f"  k={k} {name}: {lhs:.6e} > {rhs:.6e}", file=sys.stderr)
            if res["violations"]:
                return EXIT_VIOLATION
        elif args.command == "sweep":
            if args.workers < 1:
                raise UsageError("--workers must be at least 1")
            rows = run_sweep(args.specs, args.out, args.workers, args.force)
            _print_rows(rows, sys.stdout)
        elif args.command == "report":
            return report(args.directory)
    except UsageError as exc:
        print(f"illposed: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ViolationError as exc:
        print(f"illposed: invariant violated: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (SvdError, Breakdown, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"illposed: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
