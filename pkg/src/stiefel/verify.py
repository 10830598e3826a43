"""Fast invariant checks across all modules, used by ``stiefel verify``.

Each check measures a worst-case error over a handful of seeded draws and
compares it against a tolerance; ``tolerance_scale`` multiplies every
tolerance, so a tiny scale makes the suite fail on purpose.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _backend, _fallback
from .bounds import lipschitz, lower_envelope, upper_envelope, w_upper_on_lower
from .curves import (
    antipodal_tangent, branch_pair, curve_length, flip, gamma_k, great_circle_curve,
    projected_curve_length,
)
from .logmap import Certificate, log_shooting
from .manifold import (
    exp, frobenius_distance, inner, norm, orthonormality_defect, pad_rows, tangent,
)
from .numerics import expm, random_skew, random_stiefel


@dataclass(frozen=True)
class CheckResult:
    name: str
    error: float
    tolerance: float
    seconds: float

    @property
    def passed(self) -> bool:
        return math.isfinite(self.error) and self.error <= self.tolerance


def _rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([seed, tag])


def _unit_tangent(beta, u, rng, size=1.0):
    d = tangent(u, rng.standard_normal(u.shape))
    return d.scaled(size / norm(beta, d))


def check_expm(seed):
    rng = _rng(seed, 1)
    err = 0.0
    for _ in range(10):
        s = random_skew(6, rng)
        e = expm(s)
        err = max(err, np.linalg.norm(e.T @ e - np.eye(6)),
                  np.linalg.norm(e @ expm(-s) - np.eye(6)),
                  np.abs(_fallback.expm(s) - _backend.expm(s)).max())
    return err, 1e-12


def check_exp_on_manifold(seed):
    rng = _rng(seed, 2)
    err = 0.0
    for beta in (0.5, 1.0, 2.0):
        u = random_stiefel(7, 3, rng)
        d = _unit_tangent(beta, u, rng, 2.0)
        y = exp(beta, d)
        err = max(err, orthonormality_defect(y.U),
                  np.linalg.norm(y.U - exp(beta, d, full=True).U))
    return err, 1e-11


def check_inner_norm(seed):
    rng = _rng(seed, 3)
    err = 0.0
    for beta in (0.25, 1.0, 3.0):
        u = random_stiefel(6, 2, rng)
        d = tangent(u, rng.standard_normal(u.shape))
        err = max(err, abs(math.sqrt(inner(beta, d, d)) - norm(beta, d)))
    return err, 1e-12


def check_envelopes(seed):
    err = 0.0
    for beta in (0.5, 1.0, 2.0):
        for p in (1, 2, 3, 4):
            for delta in np.linspace(0.0, 2.0 * math.sqrt(p), 41):
                err = max(err, lower_envelope(beta, p, delta) - upper_envelope(beta, p, delta))
    for k in range(1, 5):
        err = max(err, abs(upper_envelope(1.0, 4, 2.0 * math.sqrt(k)) - math.pi * math.sqrt(k)))
    for p in (1, 3, 5):
        for delta in np.linspace(0.0, 2.0 * math.sqrt(p), 21):
            err = max(err, lower_envelope(0.75, p, delta) - w_upper_on_lower(0.75, p, delta))
    pair = lipschitz(0.5, 1.0)
    err = max(err, abs(pair.lo - math.sqrt(0.5)), abs(pair.hi - 1.0))
    return max(err, 0.0), 1e-12


def check_flip_geodesics(seed):
    u = random_stiefel(8, 4, _rng(seed, 5))
    err = 0.0
    for k in range(1, 5):
        c = gamma_k(u, k)
        err = max(err, np.linalg.norm(c(1.0) - flip(u, k).U),
                  abs(curve_length(c, 1.0) - math.pi * math.sqrt(k)))
    return err, 1e-9


def check_great_circle(seed):
    rng = _rng(seed, 6)
    err = 0.0
    for _ in range(5):
        u, v = random_stiefel(5, 2, rng), random_stiefel(5, 2, rng)
        c = great_circle_curve(u, v)
        err = max(err, max(orthonormality_defect(c(t)) for t in np.linspace(0, 1, 11)),
                  np.linalg.norm(c(1.0) - c.end.U),
                  abs(curve_length(c, 1.0) - 0.5 * math.pi * frobenius_distance(u, v)))
    return err, 1e-9


def check_antipodal(seed):
    u = random_stiefel(6, 3, _rng(seed, 7))
    return float(np.linalg.norm(exp(1.0, antipodal_tangent(u)).U + u)), 1e-10


def check_branch_pair(seed):
    g1, g2 = branch_pair(2.0)
    err = max(abs(curve_length(g1, 2.0) - 2.0 * math.pi),
              abs(curve_length(g2, 2.0) - g2.params["length"]),
              np.linalg.norm(g2.end.U + g2.start.U))
    return err, 1e-9


def check_log_roundtrip(seed):
    rng = _rng(seed, 9)
    err = 0.0
    for beta in (0.5, 1.0, 2.0):
        for _ in range(4):
            u = random_stiefel(5, 2, rng)
            size = 0.4 * min(1.0, math.sqrt(beta)) * math.pi
            d = _unit_tangent(beta, u, rng, size)
            res = log_shooting(beta, u, exp(beta, d))
            err = max(err, abs(res.length - size) if res.converged else math.inf)
    return err, 1e-8


def check_log_lower_bound(seed):
    rng = _rng(seed, 10)
    worst = 0.0
    for beta in (0.5, 1.0, 2.0):
        for _ in range(4):
            u, v = random_stiefel(5, 3, rng), random_stiefel(5, 3, rng)
            res = log_shooting(beta, u, v)
            if res.converged:
                worst = max(worst, res.lower - res.length)
    return worst, 1e-8


def check_antipodal_certificate(seed):
    u = random_stiefel(6, 3, _rng(seed, 11))
    res = log_shooting(1.0, u, -u)
    ok = res.certificate is Certificate.CERTIFIED_MINIMAL
    return (abs(res.length - math.pi * math.sqrt(3)) if ok else math.inf), 1e-8


def check_padding(seed):
    rng = _rng(seed, 12)
    u = random_stiefel(4, 2, rng)
    d = _unit_tangent(1.0, u, rng, 1.0)
    v = exp(1.0, d)
    a = log_shooting(1.0, u, v)
    b = log_shooting(1.0, pad_rows(u, 2), pad_rows(v, 2))
    return (abs(a.length - b.length) if a.converged and b.converged else math.inf), 1e-7


def check_column_deletion(seed):
    rng = _rng(seed, 13)
    worst = 0.0
    for beta in (0.5, 1.0):
        for _ in range(3):
            u = random_stiefel(5, 3, rng)
            d = _unit_tangent(beta, u, rng, 2.0)
            short, full = projected_curve_length(beta, u, d)
            worst = max(worst, short - full)
    return worst, 1e-8


CHECKS: list[tuple[str, Callable]] = [
    ("numerics.expm_orthogonal_and_backends_agree", check_expm),
    ("manifold.exp_on_manifold_reduced_equals_full", check_exp_on_manifold),
    ("manifold.norm_matches_inner", check_inner_norm),
    ("bounds.envelopes_ordered_and_flip_values", check_envelopes),
    ("curves.flip_geodesic_endpoint_and_length", check_flip_geodesics),
    ("curves.great_circle_on_manifold_and_length", check_great_circle),
    ("curves.antipodal_tangent_reaches_negative", check_antipodal),
    ("curves.branch_pair_lengths", check_branch_pair),
    ("curves.column_deletion_shortens", check_column_deletion),
    ("logmap.roundtrip_recovers_length", check_log_roundtrip),
    ("logmap.lengths_respect_lower_envelope", check_log_lower_bound),
    ("logmap.antipodal_certified_minimal", check_antipodal_certificate),
    ("logmap.padding_leaves_distance_unchanged", check_padding),
]


def run_checks(tolerance_scale: float = 1.0, seed: int = 0) -> list[CheckResult]:
    out = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        err, tol = fn(seed)
        out.append(CheckResult(name, float(err), tol * tolerance_scale,
                               time.perf_counter() - t0))
    return out
