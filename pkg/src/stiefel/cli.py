"""Command-line front end: ``stiefel <command> [options]``.

Experiment commands write CSV (to ``--out`` or stdout) headed by one ``#``
comment line that records the package version, the kernel backend and the
full configuration including the seed. Pair ``i`` of a sampled experiment
draws from ``numpy.random.default_rng([seed, i])``, so output is
byte-identical for identical arguments regardless of ``--workers``.

Exit codes: 0 success, 1 verification failure, 2 solver non-convergence,
64 usage error (bad arguments, invalid input, or a command that does not
apply to the given parameters).
"""
from __future__ import annotations

import argparse
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from ._backend import NAME as BACKEND
from .bounds import (
    bounds_report, envelope_grid, lower_envelope, upper_envelope, upper_proven,
)
from .curves import (
    CurveFamily, branch_pair, curve_length, gamma_k, planar_rotation_curve, slope_ratio,
)
from .errors import InvalidInput, NotApplicable, StiefelError
from .logmap import LogOptions, log_shooting
from .manifold import (
    decompose, exp, format_matrix, frobenius_distance, norm, read_matrix, tangent,
)
from .numerics import random_skew, random_stiefel, orthonormal_completion

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_NOT_CONVERGED = 2
EXIT_USAGE = 64

MAX_N = 64
WARN_N = 20
MAX_SAMPLES = 1_000_000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- output helpers ----------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _header(command: str, args: argparse.Namespace, keys: Sequence[str]) -> str:
    cfg = " ".join(f"{k}={_fmt(getattr(args, k))}" for k in keys)
    return f"# stiefel {__version__} backend={BACKEND} command={command} {cfg}\n"


def _csv(header: str, columns: Sequence[str], rows) -> str:
    buf = io.StringIO()
    buf.write(header)
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(row.get(c)) for c in columns) + "\n")
    return buf.getvalue()


def _emit(args, text: str, plot=None) -> None:
    """Write CSV text; with ``--format svg`` also draw ``plot(ax)`` to ``--out``."""
    if args.format == "svg":
        if not args.out:
            raise UsageError("--format svg needs --out FILE.svg")
        out = Path(args.out)
        out.with_suffix(".csv").write_text(text)
        _svg(out, plot)
        return
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _svg(path: Path, plot) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "stiefel"
    fig, ax = plt.subplots(figsize=(6, 4.5))
    plot(ax)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# -- argument validation -----------------------------------------------------

def _dims(args, allow_square: bool = False) -> tuple[int, int]:
    n, p = args.n, args.p
    if p < 1 or n < p or (n == p and not allow_square):
        raise UsageError(f"need n > p >= 1, got n={n}, p={p}")
    if n > MAX_N:
        raise UsageError(f"n is capped at {MAX_N} for desk-scale runs")
    if n > WARN_N:
        print(f"warning: n={n} > {WARN_N}; runs may be slow", file=sys.stderr)
    return n, p


def _samples(args) -> int:
    if not 1 <= args.samples <= MAX_SAMPLES:
        raise UsageError(f"samples must lie in [1, {MAX_SAMPLES}]")
    return args.samples


def _positive(name: str, value: float) -> float:
    if not (math.isfinite(value) and value > 0):
        raise UsageError(f"{name} must be positive, got {value}")
    return value


# -- exp / log ---------------------------------------------------------------

def cmd_exp(args) -> int:
    beta = _positive("beta", args.beta)
    rng = np.random.default_rng(args.seed)
    if args.point:
        u = read_matrix(args.point)
    else:
        n, p = _dims(args)
        u = random_stiefel(n, p, rng)
    if args.tangent:
        d = decompose(u, read_matrix(args.tangent))
    else:
        d = tangent(u, rng.standard_normal(u.shape))
        d = d.scaled(args.norm / norm(beta, d))
    y = exp(beta, d)
    text = format_matrix(y.U)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_log(args) -> int:
    beta = _positive("beta", args.beta)
    opts = LogOptions(max_iter=args.max_iter, residual_tol=args.tol)
    res = log_shooting(beta, read_matrix(args.u), read_matrix(args.utilde), opts)
    print(f"length {res.length!r}")
    print(f"residual {res.residual!r}")
    print(f"iterations {res.iterations}")
    print(f"certificate {res.certificate}")
    print(f"frob_dist {res.frob_dist!r}")
    print(f"lower {res.lower!r}")
    print(f"upper {res.upper!r}")
    if res.note:
        print(f"note {res.note}")
    if args.out:
        Path(args.out).write_text(format_matrix(res.delta.delta))
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


# -- bounds ------------------------------------------------------------------

def cmd_bounds(args) -> int:
    beta = _positive("beta", args.beta)
    n, p = _dims(args, allow_square=False)
    if args.delta is not None:
        deltas = [args.delta]
    else:
        if args.grid < 2:
            raise UsageError("--grid needs at least two points")
        deltas = envelope_grid(beta, p, args.grid)
    rows = []
    for delta in deltas:
        rep = bounds_report(beta, n, p, float(delta))
        rows.append({"delta": rep.delta, "lower": rep.lower, "upper": rep.upper,
                     "w_upper_on_lower": rep.w_upper_on_lower,
                     "attainment": rep.attainment})
    header = _header("bounds", args, ("n", "p", "beta", "delta", "grid"))
    if not upper_proven(n, p):
        header += "# note: upper envelope proven only for n >= 2p\n"
    text = _csv(header, ["delta", "lower", "upper", "w_upper_on_lower", "attainment"], rows)

    def plot(ax):
        x = [r["delta"] for r in rows]
        ax.plot(x, [r["lower"] for r in rows], label="lower envelope")
        ax.plot(x, [r["upper"] for r in rows], label="upper envelope")
        if rows[0]["w_upper_on_lower"] is not None:
            ax.plot(x, [r["w_upper_on_lower"] for r in rows], "--", label="cap on lower bound")
        ax.set_xlabel("Frobenius distance")
        ax.set_ylabel("geodesic distance")

    _emit(args, text, plot)
    return EXIT_OK


# -- sample ------------------------------------------------------------------

def _branch_tangents(u: np.ndarray, beta: float) -> dict:
    """Starting tangents at ``U`` that steer the solver onto the in-span and
    the out-of-span geodesic families towards ``-U`` (St(n, 2), beta > 1)."""
    g1, g2 = branch_pair(beta)
    frame = np.hstack([u, orthonormal_completion(u)[:, :1]])
    return {
        "branch1": u @ g1.velocity(0.0)[:2],
        "branch2": frame @ g2.params["tangent"].delta,
    }


def _sample_pair(job) -> list[dict]:
    pair_id, cfg = job
    n, p, beta, beta2, seed, antipodal, branch_inits, max_iter = cfg
    rng = np.random.default_rng([seed, pair_id])
    u = random_stiefel(n, p, rng)
    v = -u if (antipodal and pair_id == 0) else random_stiefel(n, p, rng)
    delta = frobenius_distance(u, v)
    opts = LogOptions(max_iter=max_iter)
    inits = {"default": None}
    if branch_inits:
        inits.update(_branch_tangents(u, beta))
    rows = []
    for label, init in inits.items():
        r = log_shooting(beta, u, v, opts, init=init)
        row = {"pair_id": pair_id, "init": label, "frob_dist": delta,
               "length_beta": r.length, "certificate": r.certificate,
               "residual": r.residual, "lower": r.lower, "upper": r.upper}
        if beta2 is not None:
            r2 = log_shooting(beta2, u, v, opts, init=init)
            row.update(length_beta2=r2.length, certificate_beta2=r2.certificate,
                       lower_beta2=lower_envelope(beta2, p, delta),
                       upper_beta2=upper_envelope(beta2, p, delta))
            if r.converged and r2.converged and r.length > 0:
                row["ratio"] = r2.length / r.length
        rows.append(row)
    return rows


def cmd_sample(args) -> int:
    beta = _positive("beta", args.beta)
    if args.beta2 is not None:
        _positive("beta2", args.beta2)
    n, p = _dims(args)
    count = _samples(args)
    if args.branch_inits and (p != 2 or beta <= 1.0):
        raise NotApplicable("--branch-inits needs p = 2 and beta > 1")
    cfg = (n, p, beta, args.beta2, args.seed, args.include_antipodal, args.branch_inits,
           args.max_iter)
    jobs = [(i, cfg) for i in range(count)]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_sample_pair, jobs, chunksize=max(1, count // (8 * args.workers))))
    else:
        results = [_sample_pair(j) for j in jobs]
    rows = [row for group in results for row in group]

    columns = ["pair_id"]
    if args.branch_inits:
        columns.append("init")
    columns += ["frob_dist", "length_beta", "certificate", "residual", "lower", "upper"]
    if args.beta2 is not None:
        columns += ["length_beta2", "certificate_beta2", "lower_beta2", "upper_beta2", "ratio"]
    header = _header("sample", args, ("n", "p", "beta", "beta2", "samples", "seed",
                                      "include_antipodal", "branch_inits", "max_iter"))
    text = _csv(header, columns, rows)

    def plot(ax):
        x = np.array([r["frob_dist"] for r in rows])
        grid = np.linspace(0.0, 2.0 * math.sqrt(p), 200)
        ax.scatter(x, [r["length_beta"] for r in rows], s=4, label=f"beta={beta}")
        ax.plot(grid, [lower_envelope(beta, p, d) for d in grid], "k-", lw=1, label="lower envelope")
        ax.plot(grid, [upper_envelope(beta, p, d) for d in grid], "k--", lw=1, label="upper envelope")
        if args.beta2 is not None:
            ax.scatter(x, [r["length_beta2"] for r in rows], s=4, label=f"beta={args.beta2}")
        ax.set_xlabel("Frobenius distance")
        ax.set_ylabel("log length")

    _emit(args, text, plot)
    return EXIT_OK


# -- families ----------------------------------------------------------------

def cmd_families(args) -> int:
    beta = _positive("beta", args.beta)
    n, p = _dims(args)
    if args.grid < 2:
        raise UsageError("--grid needs at least two points")
    u = random_stiefel(n, p, np.random.default_rng(args.seed))
    ks = [args.k] if args.k is not None else list(range(1, p + 1))
    curves = [(f"{CurveFamily.GAMMA_K}{k}", gamma_k(u, k)) for k in ks]
    if p % 2 == 0 and args.k is None:
        curves.append((str(CurveFamily.PLANAR_ROTATION), planar_rotation_curve(u, None, math.pi)))
    rows = []
    for label, c in curves:
        for t in np.linspace(0.0, 1.0, args.grid):
            t = float(t)
            rows.append({"t": t, "frob_dist": frobenius_distance(u, c(t)),
                         "geodesic_dist": curve_length(c, beta, upto=t) if t > 0 else 0.0,
                         "curve_family": label})
    header = _header("families", args, ("n", "p", "k", "beta", "grid", "seed"))
    text = _csv(header, ["t", "frob_dist", "geodesic_dist", "curve_family"], rows)

    def plot(ax):
        for label, _ in curves:
            sel = [r for r in rows if r["curve_family"] == label]
            ax.plot([r["frob_dist"] for r in sel], [r["geodesic_dist"] for r in sel], label=label)
        ax.set_xlabel("Frobenius distance")
        ax.set_ylabel("length along curve")

    _emit(args, text, plot)
    return EXIT_OK


# -- branch demo -------------------------------------------------------------

def cmd_branch_demo(args) -> int:
    beta = _positive("beta", args.beta)
    g1, g2 = branch_pair(beta)
    l1 = curve_length(g1, beta)
    l2 = curve_length(g2, beta)
    end1 = float(np.linalg.norm(g1(1.0) + g1.start.U))
    end2 = float(np.linalg.norm(g2(1.0) + g2.start.U))
    print(f"beta {beta!r}")
    print(f"branch1 length {l1:.5f} (closed form {math.pi * math.sqrt(2 * beta):.5f}) "
          f"endpoint error {end1:.2e}")
    print(f"branch2 length {l2:.5f} (closed form {g2.params['length']:.5f}) "
          f"endpoint error {end2:.2e}")
    print(f"margin {l1 - l2:.5f}")
    return EXIT_OK


# -- slope -------------------------------------------------------------------

def _slope_betas(args) -> list[float]:
    if args.betas:
        try:
            betas = [float(x) for x in args.betas.split(",") if x.strip()]
        except ValueError:
            raise UsageError(f"cannot parse --betas {args.betas!r}") from None
    elif args.beta is not None:
        betas = [args.beta]
    else:
        betas = [round(0.1 * j, 10) for j in range(1, 16)]
    return [_positive("beta", b) for b in betas]


def cmd_slope(args) -> int:
    n, p = _dims(args)
    count = _samples(args)
    rows = []
    for bi, beta in enumerate(_slope_betas(args)):
        lo, hi = min(1.0, math.sqrt(beta)), max(1.0, math.sqrt(beta))
        for i in range(count):
            rng = np.random.default_rng([args.seed, bi, i])
            u = random_stiefel(n, p, rng)
            draws = [("random", tangent(u, rng.standard_normal((n, p))))]
            if i == 0:
                if p >= 2:
                    draws.append(("skew_only", decompose(u, u @ random_skew(p, rng))))
                perp = orthonormal_completion(u)
                draws.append(("normal_only", decompose(u, perp @ rng.standard_normal((n - p, p)))))
            for kind, d in draws:
                d = d.scaled(1.0 / norm(beta, d))
                rows.append({"beta": beta, "draw": i, "kind": kind,
                             "ratio": slope_ratio(beta, u, d, args.delta_small),
                             "lower": lo, "upper": hi})
    header = _header("slope", args, ("n", "p", "betas", "beta", "samples", "seed", "delta_small"))
    text = _csv(header, ["beta", "draw", "kind", "ratio", "lower", "upper"], rows)

    def plot(ax):
        ax.scatter([r["beta"] for r in rows], [r["ratio"] for r in rows], s=4, label="ratio")
        bs = np.linspace(min(r["beta"] for r in rows), max(r["beta"] for r in rows), 200)
        ax.plot(bs, np.minimum(1.0, np.sqrt(bs)), "k-", lw=1, label="min(1, sqrt(beta))")
        ax.plot(bs, np.maximum(1.0, np.sqrt(bs)), "k--", lw=1, label="max(1, sqrt(beta))")
        ax.set_xlabel("beta")
        ax.set_ylabel("distance ratio near zero")

    _emit(args, text, plot)
    return EXIT_OK


# -- verify ------------------------------------------------------------------

def cmd_verify(args) -> int:
    from .verify import run_checks

    scale = _positive("tolerance-scale", args.tolerance_scale)
    results = run_checks(scale, args.seed)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name} error={r.error:.3e} tol={r.tolerance:.3e} time={r.seconds:.2f}s")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


# -- parser ------------------------------------------------------------------

def _common(sp, dims=True, n=4, p=2, beta: Optional[float] = 1.0, samples=False, grid=False,
            out=True, fmt=False, seed=True):
    if dims:
        sp.add_argument("--n", type=int, default=n, help="rows")
        sp.add_argument("--p", type=int, default=p, help="columns")
    if beta is not False:
        sp.add_argument("--beta", type=float, default=beta, help="metric parameter")
    if seed:
        sp.add_argument("--seed", type=int, default=0)
    if samples:
        sp.add_argument("--samples", type=int, default=samples)
    if grid:
        sp.add_argument("--grid", type=int, default=grid)
    if out:
        sp.add_argument("--out", help="output file (default: stdout)")
    if fmt:
        sp.add_argument("--format", choices=("csv", "svg"), default="csv",
                        help="svg also writes the CSV next to the plot")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="stiefel", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND})")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("exp", help="Riemannian exponential of a tangent matrix")
    _common(sp)
    sp.add_argument("--point", help="matrix file with U (default: random)")
    sp.add_argument("--tangent", help="matrix file with the tangent (default: random)")
    sp.add_argument("--norm", type=float, default=1.0, help="beta-norm of a random tangent")
    sp.set_defaults(func=cmd_exp)

    sp = sub.add_parser("log", help="shooting logarithm between two points")
    _common(sp, dims=False, seed=False)
    sp.add_argument("--u", required=True, help="matrix file with U")
    sp.add_argument("--utilde", required=True, help="matrix file with the target")
    sp.add_argument("--max-iter", type=int, default=200)
    sp.add_argument("--tol", type=float, default=1e-10, help="endpoint residual tolerance")
    sp.set_defaults(func=cmd_log)

    sp = sub.add_parser("bounds", help="distance envelopes as CSV")
    _common(sp, grid=101, fmt=True, seed=False)
    sp.add_argument("--delta", type=float, help="single Frobenius distance instead of a grid")
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("sample", help="log lengths for random pairs")
    _common(sp, samples=1000, fmt=True)
    sp.add_argument("--beta2", type=float, help="second metric for the equivalence ratio")
    sp.add_argument("--include-antipodal", action="store_true",
                    help="pair 0 joins U to -U")
    sp.add_argument("--branch-inits", action="store_true",
                    help="also solve from both branch tangents (p = 2, beta > 1)")
    sp.add_argument("--max-iter", type=int, default=200)
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("families", help="distance traces of the column-flip geodesics")
    _common(sp, n=8, p=4, grid=101, fmt=True)
    sp.add_argument("--k", type=int, help="single flip count (default: all)")
    sp.set_defaults(func=cmd_families)

    sp = sub.add_parser("branch-demo", help="two geodesics to -U on St(3, 2)")
    _common(sp, dims=False, beta=2.0, out=False, seed=False)
    sp.set_defaults(func=cmd_branch_demo)

    sp = sub.add_parser("slope", help="distance ratio at tiny Frobenius distance")
    _common(sp, beta=None, samples=100, fmt=True)
    sp.add_argument("--betas", help="comma separated beta values (default 0.1..1.5)")
    sp.add_argument("--delta-small", type=float, default=1e-6)
    sp.set_defaults(func=cmd_slope)

    sp = sub.add_parser("verify", help="run the invariant checks")
    _common(sp, dims=False, beta=False, out=False)
    sp.add_argument("--tolerance-scale", type=float, default=1.0)
    sp.set_defaults(func=cmd_verify)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InvalidInput, NotApplicable) as exc:
        print(f"stiefel {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"stiefel {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StiefelError as exc:
        print(f"stiefel {args.command}: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
