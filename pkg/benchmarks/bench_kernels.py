"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat R] [--quick]

Kernel timings call both backend modules directly. The end-to-end log timing
needs the backend chosen at import, so each backend runs in a subprocess
with ``STIEFEL_PURE_PYTHON`` set accordingly.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from stiefel import _fallback

try:
    from stiefel import _kernels
except ImportError:
    _kernels = None

SIZES = [(4, 2), (6, 3), (9, 3), (12, 4), (20, 5)]

LOG_SNIPPET = """
import time, numpy as np
from stiefel.logmap import log_shooting
from stiefel.numerics import random_stiefel
rng = np.random.default_rng(0)
pairs = [(random_stiefel({n}, {p}, rng), random_stiefel({n}, {p}, rng)) for _ in range({count})]
t = time.perf_counter()
for u, v in pairs:
    log_shooting(0.5, u, v)
print((time.perf_counter() - t) / {count})
"""


def _inputs(n, p, rng):
    m = p + min(p, n - p)
    frame = np.linalg.qr(rng.standard_normal((n, m)))[0]
    s = rng.standard_normal((m, m))
    s = s - s.T
    a = np.ascontiguousarray(s[:p, :p])
    iu = np.triu_indices(p, 1)
    ii = np.concatenate([iu[0], np.repeat(np.arange(p, m), p)])
    jj = np.concatenate([iu[1], np.tile(np.arange(p), m - p)])
    scale = np.ones(len(ii))
    return frame, s, a, ii, jj, scale, len(iu[0])


def _time(fn, repeat):
    number = max(1, int(0.05 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def bench_kernels(repeat):
    rng = np.random.default_rng(1)
    print(f"{'kernel':<16}{'n,p':>8}{'python us':>12}{'cython us':>12}{'speedup':>9}")
    for n, p in SIZES:
        frame, s, a, ii, jj, scale, na = _inputs(n, p, rng)
        cases = {
            "expm": lambda mod: mod.expm(s),
            "exp_map_core": lambda mod: mod.exp_map_core(frame, s, a, -0.5),
            "shoot_jacobian": lambda mod: mod.shoot_jacobian(frame, s, a, -0.5, ii, jj, scale, na),
        }
        for name, call in cases.items():
            tp = _time(lambda: call(_fallback), repeat) * 1e6
            if _kernels is None:
                print(f"{name:<16}{f'{n},{p}':>8}{tp:>12.1f}{'n/a':>12}")
                continue
            tc = _time(lambda: call(_kernels), repeat) * 1e6
            print(f"{name:<16}{f'{n},{p}':>8}{tp:>12.1f}{tc:>12.1f}{tp / tc:>8.1f}x")


def bench_log(count):
    print(f"\n{'log_shooting':<16}{'n,p':>8}{'python ms':>12}{'cython ms':>12}{'speedup':>9}")
    for n, p in SIZES[:3]:
        times = {}
        for label, flag in (("python", "1"), ("cython", "0")):
            env = dict(os.environ, STIEFEL_PURE_PYTHON=flag)
            code = LOG_SNIPPET.format(n=n, p=p, count=count)
            out = subprocess.run([sys.executable, "-c", code], env=env, check=True,
                                 capture_output=True, text=True).stdout
            times[label] = float(out) * 1e3
        print(f"{'':<16}{f'{n},{p}':>8}{times['python']:>12.1f}{times['cython']:>12.1f}"
              f"{times['python'] / times['cython']:>8.1f}x")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="fewer log pairs")
    args = ap.parse_args()
    bench_kernels(args.repeat)
    bench_log(5 if args.quick else 20)


if __name__ == "__main__":
    main()
