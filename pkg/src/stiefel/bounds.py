"""Closed-form bounds on the beta-geodesic distance in terms of ``delta = |U - V|_F``.

All envelopes are functions of ``(beta, p, delta)`` only. The upper envelope
is proven for ``n >= 2p``; for smaller ``n`` it is still evaluated but the
report carries a note saying so.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInput, NotApplicable

ARG_TOL = 1e-12
DELTA_TOL = 1e-10


class Attainment(enum.Enum):
    ATTAINED = "Attained"
    CONJECTURED_UNATTAINED = "ConjecturedUnattained"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class LipschitzPair:
    """``lo * d_b2 <= d_b1 <= hi * d_b2``."""

    lo: float
    hi: float


def _check_beta(beta: float, name: str = "beta") -> float:
    beta = float(beta)
    if not math.isfinite(beta) or beta <= 0:
        raise InvalidInput(f"{name} must be positive, got {beta}")
    return beta


def _check_p(p: int) -> int:
    if int(p) != p or p < 1:
        raise InvalidInput(f"p must be a positive integer, got {p}")
    return int(p)


def _check_delta(p: int, delta: float) -> float:
    delta = float(delta)
    top = 2.0 * math.sqrt(p)
    if not math.isfinite(delta) or delta < -DELTA_TOL or delta > top + DELTA_TOL:
        raise InvalidInput(f"delta must lie in [0, 2 sqrt(p)] = [0, {top:.6g}], got {delta}")
    return min(max(delta, 0.0), top)


def _asin(x: float) -> float:
    if x > 1.0 + ARG_TOL or x < -1.0 - ARG_TOL:
        raise InvalidInput(f"arcsin argument {x} outside [-1, 1]")
    return math.asin(min(1.0, max(-1.0, x)))


def lipschitz(beta1: float, beta2: float) -> LipschitzPair:
    r = math.sqrt(_check_beta(beta1, "beta1") / _check_beta(beta2, "beta2"))
    return LipschitzPair(min(1.0, r), max(1.0, r))


def lower_envelope(beta: float, p: int, delta: float) -> float:
    """``min(1, sqrt(beta)) 2 sqrt(p) arcsin(delta / (2 sqrt(p)))``."""
    beta, p = _check_beta(beta), _check_p(p)
    delta = _check_delta(p, delta)
    rp = math.sqrt(p)
    return min(1.0, math.sqrt(beta)) * 2.0 * rp * _asin(delta / (2.0 * rp))


def upper_envelope(beta: float, p: int, delta: float) -> float:
    """``max(1, sqrt(beta))`` times the Euclidean bound.

    The Euclidean bound is ``2 arcsin(delta / 2)`` up to ``delta = 2`` and the
    linear ``(pi / 2) delta`` beyond; both equal pi at ``delta = 2``.
    """
    beta, p = _check_beta(beta), _check_p(p)
    delta = _check_delta(p, delta)
    base = 2.0 * _asin(delta / 2.0) if delta <= 2.0 else 0.5 * math.pi * delta
    return max(1.0, math.sqrt(beta)) * base


def w_upper_on_lower(beta: float, p: int, delta: float) -> float:
    """Upper bound on the best attainable lower bound, for odd ``p``.

    ``2 sqrt(beta) min(sqrt(p-1) arcsin(delta / (2 sqrt(p-1))),
    sqrt(p+1) arcsin(delta / (2 sqrt(p))))``, the first term only when
    ``p >= 3`` and ``delta <= 2 sqrt(p-1)``.
    """
    beta, p = _check_beta(beta), _check_p(p)
    if p % 2 == 0:
        raise NotApplicable("bound is stated for odd p only")
    if not 0.5 <= beta <= 1.0:
        raise NotApplicable("bound is stated for beta in [1/2, 1] only")
    delta = _check_delta(p, delta)
    best = math.sqrt(p + 1) * _asin(delta / (2.0 * math.sqrt(p)))
    if p >= 3 and delta <= 2.0 * math.sqrt(p - 1):
        rq = math.sqrt(p - 1)
        best = min(best, rq * _asin(delta / (2.0 * rq)))
    return 2.0 * math.sqrt(beta) * best


def lower_attained(beta: float, n: int, p: int) -> Attainment:
    """Whether the lower envelope is known to be the exact worst case."""
    beta, p = _check_beta(beta), _check_p(p)
    if n <= p:
        raise InvalidInput(f"need n > p, got n={n}, p={p}")
    if beta == 1.0:
        return Attainment.ATTAINED
    if beta < 1.0 and p % 2 == 0:
        return Attainment.ATTAINED
    if beta > 1.0 and n >= 2 * p:
        return Attainment.ATTAINED
    return Attainment.CONJECTURED_UNATTAINED


def diameter_euclidean(p: int) -> float:
    return math.pi * math.sqrt(_check_p(p))


def search_shell(beta: float, n: int, p: int, delta: float) -> tuple[float, float]:
    """Norm interval ``[m, M]`` that contains the minimal initial velocity."""
    if n < p:
        raise InvalidInput(f"need n >= p, got n={n}, p={p}")
    return lower_envelope(beta, p, delta), upper_envelope(beta, p, delta)


def upper_proven(n: int, p: int) -> bool:
    return n >= 2 * p


@dataclass(frozen=True)
class BoundsReport:
    delta: float
    lower: float
    upper: float
    w_upper_on_lower: Optional[float]
    attainment: Attainment
    note: str = ""


def bounds_report(beta: float, n: int, p: int, delta: float) -> BoundsReport:
    lo, hi = search_shell(beta, n, p, delta)
    try:
        w = w_upper_on_lower(beta, p, delta)
    except NotApplicable:
        w = None
    note = "" if upper_proven(n, p) else "upper envelope proven only for n >= 2p"
    return BoundsReport(_check_delta(p, delta), lo, hi, w, lower_attained(beta, n, p), note)


def envelope_grid(beta: float, p: int, count: int) -> np.ndarray:
    """``count`` equispaced deltas on ``[0, 2 sqrt(p)]`` (endpoints included)."""
    if count < 2:
        raise InvalidInput("grid needs at least two points")
    return np.linspace(0.0, 2.0 * math.sqrt(_check_p(p)), int(count))
