"""Explicit curves on St(n, p) with closed-form position and velocity.

Every curve is parametrized over ``t in [0, 1]``. These families realize the
extreme cases of the distance bounds, so they double as test oracles for the
exponential and the logarithm.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInput, NotApplicable, NumericalFailure
from .manifold import (
    MetricLike, PointLike, StiefelPoint, TangentVector, as_metric, as_point,
    decompose, exp, geodesic_velocity, norm, norm_at, pad_rows,
)
from .numerics import expm, orthonormal_completion, psd_sqrt

SQRT3_PI = math.pi * math.sqrt(3.0) / 3.0
#: skew part of the tangent that sends a 3-frame to its negative
ANTIPODAL_SKEW = SQRT3_PI * np.array([[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -1.0, 0.0]])
#: its normal part, a single row against one extra orthonormal direction
ANTIPODAL_NORMAL = SQRT3_PI * np.ones((1, 3))


class CurveFamily(enum.Enum):
    PLANAR_ROTATION = "PlanarRotation"
    K_THETA = "KTheta"
    GAMMA_K = "GammaK"
    GREAT_CIRCLE = "GreatCircle"
    BRANCH1 = "Branch1"
    BRANCH2 = "Branch2"
    EXP_RAY = "ExpRay"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class Curve:
    """A path ``[0, 1] -> St(n, p)``.

    ``speed`` maps beta to the constant beta-speed when the family has one,
    so ``speed(beta)`` is also the closed-form length.
    """

    family: CurveFamily
    start: StiefelPoint
    end: StiefelPoint
    position: Callable[[float], np.ndarray] = field(repr=False)
    velocity: Callable[[float], np.ndarray] = field(repr=False)
    speed: Optional[Callable[[float], float]] = field(default=None, repr=False)
    params: dict = field(default_factory=dict, repr=False)

    def __call__(self, t: float) -> np.ndarray:
        return self.position(float(t))

    def point(self, t: float) -> StiefelPoint:
        return StiefelPoint(self.position(float(t)))

    def closed_form_length(self, metric: MetricLike) -> float:
        beta = as_metric(metric).beta
        value = None if self.speed is None else self.speed(beta)
        if value is None:
            raise NotApplicable(f"{self.family} has no closed-form length at beta={beta}")
        return float(value)


# -- rotation blocks ---------------------------------------------------------

def _check_even(p: int) -> None:
    if p < 2 or p % 2:
        raise InvalidInput(f"block rotations need an even size >= 2, got {p}")


def skew_generator(p: int, theta: float) -> np.ndarray:
    """Block-diagonal skew matrix with 2x2 blocks ``[[0, theta], [-theta, 0]]``."""
    _check_even(p)
    a = np.zeros((p, p))
    idx = np.arange(0, p, 2)
    a[idx, idx + 1] = theta
    a[idx + 1, idx] = -theta
    return a


def block_rotation(p: int, theta: float) -> np.ndarray:
    """``expm(skew_generator(p, theta))``, built from cosines and sines."""
    _check_even(p)
    c, s = math.cos(theta), math.sin(theta)
    g = np.zeros((p, p))
    idx = np.arange(0, p, 2)
    g[idx, idx] = c
    g[idx + 1, idx + 1] = c
    g[idx, idx + 1] = s
    g[idx + 1, idx] = -s
    return g


def _check_orthogonal(q: np.ndarray, size: int, name: str) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (size, size):
        raise InvalidInput(f"{name} must be {size}x{size}, got {q.shape}")
    if np.linalg.norm(q.T @ q - np.eye(size)) > 1e-10:
        raise InvalidInput(f"{name} is not orthogonal")
    return q


def planar_rotation_curve(u: PointLike, q: Optional[np.ndarray], theta: float) -> Curve:
    """``t -> U Q G_p(theta t) Q^T``; a geodesic for every beta."""
    pt = as_point(u)
    p = pt.p
    _check_even(p)
    q = np.eye(p) if q is None else _check_orthogonal(q, p, "Q")
    uq = pt.U @ q
    gen = skew_generator(p, theta)

    def pos(t):
        return uq @ block_rotation(p, theta * t) @ q.T

    def vel(t):
        return uq @ block_rotation(p, theta * t) @ gen @ q.T

    rate = math.sqrt(p) * abs(theta)
    return Curve(CurveFamily.PLANAR_ROTATION, pt, StiefelPoint(pos(1.0)), pos, vel,
                 speed=lambda beta: math.sqrt(beta) * rate,
                 params={"theta": theta, "Q": q})


def k_theta_curve(u: PointLike, u_hat: Optional[np.ndarray] = None,
                  q: Optional[np.ndarray] = None, theta: float = math.pi) -> Curve:
    """``t -> [U U_hat] Q K(theta t) Q^T I_{2p x p}``.

    ``K(s) = expm([[0, s I], [-s I, 0]])``. With ``Q = I`` (the default) the
    velocity has no ``U``-component, so the beta-speed is ``sqrt(p)|theta|``
    for every beta; a general ``Q`` mixes in a skew part and the length must
    be obtained by quadrature.
    """
    pt = as_point(u)
    n, p = pt.shape
    if n < 2 * p:
        raise InvalidInput(f"need n >= 2p, got n={n}, p={p}")
    if u_hat is None:
        u_hat = orthonormal_completion(pt.U)[:, :p]
    u_hat = np.asarray(u_hat, dtype=float)
    if u_hat.shape != (n, p) or np.linalg.norm(u_hat.T @ pt.U) > 1e-10 \
            or np.linalg.norm(u_hat.T @ u_hat - np.eye(p)) > 1e-10:
        raise InvalidInput("U_hat must be an orthonormal n x p frame orthogonal to U")
    plain = q is None
    q = np.eye(2 * p) if plain else _check_orthogonal(q, 2 * p, "Q")
    fq = np.hstack([pt.U, u_hat]) @ q
    qt_top = q.T[:, :p]
    gen = np.zeros((2 * p, 2 * p))
    gen[:p, p:] = theta * np.eye(p)
    gen[p:, :p] = -theta * np.eye(p)

    def kmat(t):
        c, s = math.cos(theta * t), math.sin(theta * t)
        return np.block([[c * np.eye(p), s * np.eye(p)], [-s * np.eye(p), c * np.eye(p)]])

    def pos(t):
        return fq @ kmat(t) @ qt_top

    def vel(t):
        return fq @ kmat(t) @ gen @ qt_top

    rate = math.sqrt(p) * abs(theta)
    return Curve(CurveFamily.K_THETA, pt, StiefelPoint(pos(1.0)), pos, vel,
                 speed=(lambda beta: rate) if plain else None,
                 params={"theta": theta, "Q": q, "U_hat": u_hat})


# -- column flips and the geodesics reaching them ----------------------------

def flip(u: PointLike, k: int) -> StiefelPoint:
    """Negate the first ``k`` columns."""
    pt = as_point(u)
    if not 1 <= k <= pt.p:
        raise InvalidInput(f"k must lie in [1, {pt.p}], got {k}")
    v = np.array(pt.U)
    v[:, :k] *= -1.0
    return StiefelPoint(v)


def _extra_direction(pt: StiefelPoint, u_perp) -> np.ndarray:
    if u_perp is None:
        if pt.n == pt.p:
            raise InvalidInput("an orthogonal direction is required but n == p")
        return orthonormal_completion(pt.U)[:, 0]
    v = np.asarray(u_perp, dtype=float).reshape(-1)
    if v.shape != (pt.n,) or abs(np.linalg.norm(v) - 1.0) > 1e-10 \
            or np.linalg.norm(pt.U.T @ v) > 1e-10:
        raise InvalidInput("u_perp must be a unit vector orthogonal to U")
    return v


def gamma_k(u: PointLike, k: int, u_perp=None) -> Curve:
    """Euclidean geodesic of length ``pi sqrt(k)`` from ``U`` to ``flip(U, k)``.

    Even ``k`` rotates column pairs by ``pi``. Odd ``k`` needs one unit
    vector ``u_perp`` orthogonal to ``U``: for ``k = 1`` the first column
    turns through a half circle towards it, and for ``k >= 3`` the last three
    flipped columns follow the closed-form geodesic generated by
    ``(ANTIPODAL_SKEW, ANTIPODAL_NORMAL)`` while the rest rotate in pairs.
    """
    pt = as_point(u)
    n, p = pt.shape
    if not 1 <= k <= p:
        raise InvalidInput(f"k must lie in [1, {p}], got {k}")
    U = pt.U
    # leading columns handled by paired rotations
    even = k if k % 2 == 0 else max(k - 3, 0)
    rest = U[:, k:]

    def rot_pos(t):
        return U[:, :even] @ block_rotation(even, math.pi * t) if even else U[:, :0]

    def rot_vel(t):
        if not even:
            return U[:, :0]
        return U[:, :even] @ block_rotation(even, math.pi * t) @ skew_generator(even, math.pi)

    if k % 2 == 0:
        def odd_pos(t):
            return U[:, :0]

        odd_vel = odd_pos
    else:
        v = _extra_direction(pt, u_perp)
        if k == 1:
            u1 = U[:, 0]

            def odd_pos(t):
                c, s = math.cos(math.pi * t), math.sin(math.pi * t)
                return (c * u1 + s * v)[:, None]

            def odd_vel(t):
                c, s = math.cos(math.pi * t), math.sin(math.pi * t)
                return (math.pi * (c * v - s * u1))[:, None]
        else:
            frame = np.hstack([U[:, k - 3:k], v[:, None]])
            m = np.zeros((4, 4))
            m[:3, :3] = 2.0 * ANTIPODAL_SKEW
            m[:3, 3:] = -ANTIPODAL_NORMAL.T
            m[3:, :3] = ANTIPODAL_NORMAL
            ab = np.vstack([ANTIPODAL_SKEW, ANTIPODAL_NORMAL])

            def odd_pos(t):
                return frame @ expm(t * m)[:, :3] @ expm(-t * ANTIPODAL_SKEW)

            def odd_vel(t):
                return frame @ expm(t * m) @ ab @ expm(-t * ANTIPODAL_SKEW)

    zeros_rest = np.zeros_like(rest)

    def pos(t):
        return np.hstack([rot_pos(t), odd_pos(t), rest])

    def vel(t):
        return np.hstack([rot_vel(t), odd_vel(t), zeros_rest])

    rate = math.pi * math.sqrt(k)
    if k % 2 == 0:
        def speed(beta):
            return math.sqrt(beta) * rate
    elif k == 1:
        def speed(beta):
            return rate
    else:
        # mixed skew and normal parts: constant speed only for the Euclidean metric
        def speed(beta):
            return rate if beta == 1.0 else None
    return Curve(CurveFamily.GAMMA_K, pt, flip(pt, k), pos, vel, speed=speed,
                 params={"k": k})


def gamma_k_distance_law(k: int, t: float) -> tuple[float, float]:
    """``(t pi sqrt(k), 2 sqrt(k) sin(t pi / 2))``: Euclidean distance and
    Frobenius gap between ``U`` and ``gamma_k(t)``."""
    if k < 1:
        raise InvalidInput("k must be positive")
    if not 0.0 <= t <= 1.0:
        raise InvalidInput("t must lie in [0, 1]")
    rk = math.sqrt(k)
    return t * math.pi * rk, 2.0 * rk * math.sin(0.5 * math.pi * t)


# -- great circle through U and U_tilde --------------------------------------

@dataclass(frozen=True, eq=False)
class CapGeometry:
    """Center ``C``, radius vector ``R``, radius ``r`` and orthogonal partner ``S``.

    ``R = (U_tilde - U) / 2``. ``padded_rows`` zero rows were appended to
    both points so that a 3p-dimensional frame fits.
    """

    C: np.ndarray
    R: np.ndarray
    r: float
    S: np.ndarray
    padded_rows: int

    def residuals(self) -> dict:
        c, r, s = self.C, self.R, self.S
        return {
            "center_radius": abs(float(np.vdot(c, r))),
            "center": float(np.linalg.norm(c.T @ s + s.T @ c)),
            "radius": float(np.linalg.norm(r.T @ s + s.T @ r)),
            "gram": float(np.linalg.norm(s.T @ s - r.T @ r)),
        }


def solve_cap_system(u: PointLike, u_tilde: PointLike) -> CapGeometry:
    """Find ``S`` with ``C^T S`` and ``R^T S`` skew and ``S^T S = R^T R``."""
    pu, pv = as_point(u), as_point(u_tilde)
    if pu.shape != pv.shape:
        raise InvalidInput(f"dimension mismatch: {pu.shape} vs {pv.shape}")
    n, p = pu.shape
    extra = max(0, 3 * p - n)
    U, V = pad_rows(pu, extra).U, pad_rows(pv, extra).U
    c = 0.5 * (U + V)
    r = 0.5 * (V - U)
    q, _ = np.linalg.qr(np.hstack([U, V]), mode="complete")
    # trailing Householder columns are orthogonal to span[U V] even if it is rank deficient
    u_hat = q[:, 2 * p:3 * p]
    s = u_hat @ psd_sqrt(r.T @ r)
    return CapGeometry(c, r, float(np.linalg.norm(V - U) / 2.0), s, extra)


def great_circle_curve(u: PointLike, u_tilde: PointLike) -> Curve:
    """``t -> C + cos(pi t) R' + sin(pi t) S`` with ``R' = (U - U_tilde) / 2``.

    Stays on the manifold, runs from ``U`` to ``U_tilde`` at constant
    Euclidean speed and has length ``(pi / 2) |U - U_tilde|_F``. When
    ``n < 3p`` the curve lives in the row-padded manifold.
    """
    pu, pv = as_point(u), as_point(u_tilde)
    geo = solve_cap_system(pu, pv)
    c, r_prime, s = geo.C, -geo.R, geo.S

    def pos(t):
        a = math.pi * t
        return c + math.cos(a) * r_prime + math.sin(a) * s

    def vel(t):
        a = math.pi * t
        return math.pi * (math.cos(a) * s - math.sin(a) * r_prime)

    euclid = math.pi * geo.r
    start = pad_rows(pu, geo.padded_rows)
    end = pad_rows(pv, geo.padded_rows)
    return Curve(CurveFamily.GREAT_CIRCLE, start, end, pos, vel,
                 speed=lambda beta: euclid if beta == 1.0 else None,
                 params={"cap": geo})


# -- geodesic rays -----------------------------------------------------------

def exp_ray(metric: MetricLike, d: TangentVector) -> Curve:
    """``t -> Exp(t Delta)``; constant beta-speed ``|Delta|_beta``."""
    m = as_metric(metric)
    length = norm(m, d)

    def pos(t):
        return exp(m, d.scaled(t)).U

    def vel(t):
        return geodesic_velocity(m, d, t)

    return Curve(CurveFamily.EXP_RAY, d.base, exp(m, d), pos, vel,
                 speed=lambda beta: length if beta == m.beta else None,
                 params={"beta": m.beta, "tangent": d})


def projected_curve_length(metric: MetricLike, u: PointLike, d: TangentVector,
                           n_quad: int = 64) -> tuple[float, float]:
    """Length of ``t -> Exp(t Delta)`` with its last column dropped, and ``|Delta|``.

    The dropped curve lives on St(n, p-1) and is measured there with the same
    beta. For beta >= 1/2 it is never longer than the full geodesic.
    """
    m = as_metric(metric)
    pt = as_point(u)
    if m.beta < 0.5:
        raise NotApplicable("column-deletion inequality is stated for beta >= 1/2")
    if pt.p < 2:
        raise InvalidInput("need p >= 2 to delete a column")
    if d.U.shape != pt.shape or not np.allclose(d.U, pt.U, atol=1e-12, rtol=0):
        raise InvalidInput("tangent vector is not based at U")
    full = norm(m, d)
    if full == 0.0:
        return 0.0, 0.0
    k = pt.p - 1
    nodes, weights = _gauss_nodes(n_quad)
    total = 0.0
    for t, w in zip(nodes, weights):
        y = exp(m, d.scaled(t)).U[:, :k]
        v = geodesic_velocity(m, d, t)[:, :k]
        total += w * norm_at(m, y, v)
    return float(total), full


# -- the two competing geodesics to -U on St(3, 2) ---------------------------

def branch_pair(beta: float) -> tuple[Curve, Curve]:
    """Two geodesics from ``I_{3x2}`` to its negative for ``beta > 1``.

    The first rotates the frame within its own span and has length
    ``pi sqrt(2 beta)``; the second also leaves the span and is strictly
    shorter.
    """
    beta = float(beta)
    if not beta > 1.0:
        raise NotApplicable("the second branch is shorter only for beta > 1")
    m = as_metric(beta)
    U = StiefelPoint(np.eye(3, 2))
    g1 = planar_rotation_curve(U, None, math.pi)
    g1 = Curve(CurveFamily.BRANCH1, g1.start, g1.end, g1.position, g1.velocity,
               g1.speed, {"beta": beta})

    a = math.pi / (1.0 - 2.0 * beta)
    ratio = beta / (1.0 - 2.0 * beta)
    b_norm = 2.0 * math.pi * math.sqrt(1.0 - ratio * ratio)
    z = np.zeros((3, 2))
    z[0, 1], z[1, 0] = a, -a
    z[2, :] = b_norm / math.sqrt(2.0)
    d = decompose(U, z)
    ray = exp_ray(m, d)
    l2 = math.pi * math.sqrt(2.0 * beta / (1.0 - 2.0 * beta) ** 2 + 4.0 * (1.0 - ratio * ratio))
    g2 = Curve(CurveFamily.BRANCH2, U, ray.end, ray.position, ray.velocity,
               speed=lambda b: norm(b, d), params={"beta": beta, "tangent": d,
                                                   "length": l2})
    return g1, g2


def antipodal_tangent(u: PointLike, u_perp=None) -> TangentVector:
    """``U ANTIPODAL_SKEW + u_perp ANTIPODAL_NORMAL`` on St(n, 3); its Euclidean exponential is ``-U``."""
    pt = as_point(u)
    if pt.p != 3:
        raise InvalidInput(f"need p = 3, got p = {pt.p}")
    if pt.n < 4:
        raise InvalidInput("need n >= 4")
    v = _extra_direction(pt, u_perp)
    return decompose(pt, pt.U @ ANTIPODAL_SKEW + np.outer(v, ANTIPODAL_NORMAL[0]))


# -- lengths -----------------------------------------------------------------

_GAUSS_CACHE: dict = {}


def _gauss_nodes(n_quad: int):
    if n_quad < 1:
        raise InvalidInput("quadrature needs at least one node")
    if n_quad not in _GAUSS_CACHE:
        x, w = np.polynomial.legendre.leggauss(n_quad)
        _GAUSS_CACHE[n_quad] = (0.5 * (x + 1.0), 0.5 * w)
    return _GAUSS_CACHE[n_quad]


def curve_length(curve: Curve, metric: MetricLike, n_quad: int = 64, panels: int = 1,
                 upto: float = 1.0) -> float:
    """Gauss-Legendre quadrature of ``|gamma'(t)|_beta`` over ``[0, upto]``."""
    m = as_metric(metric)
    if n_quad < 32:
        raise InvalidInput("use at least 32 quadrature nodes")
    if panels < 1:
        raise InvalidInput("panels must be positive")
    if not 0.0 <= upto <= 1.0:
        raise InvalidInput("upto must lie in [0, 1]")
    nodes, weights = _gauss_nodes(n_quad)
    h = upto / panels
    total = 0.0
    for j in range(panels):
        for t, w in zip(nodes, weights):
            tt = h * (j + t)
            total += w * h * norm_at(m, curve.position(tt), curve.velocity(tt))
    return float(total)


def slope_ratio(metric: MetricLike, u: PointLike, d: TangentVector,
                delta_small: float = 1e-6) -> float:
    """Ratio of geodesic to Frobenius distance along ``Exp(t Delta)`` near ``t = 0``.

    Bisects for the ``t`` at which ``|U - Exp(t Delta)|_F = delta_small``;
    since ``|Delta|_beta = 1`` and short geodesics are minimal, ``t`` is the
    geodesic distance and ``t / delta_small`` the slope.
    """
    m = as_metric(metric)
    pt = as_point(u)
    if not 0.0 < delta_small <= 1e-3:
        raise InvalidInput("delta_small must lie in (0, 1e-3]")
    if abs(norm(m, d) - 1.0) > 1e-8:
        raise InvalidInput("tangent must have unit beta-norm")

    def gap(t):
        return float(np.linalg.norm(pt.U - exp(m, d.scaled(t)).U)) - delta_small

    lo, hi = 0.0, 10.0 * delta_small
    if gap(hi) <= 0.0:
        raise NumericalFailure("bisection interval does not bracket the target gap")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if gap(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi) / delta_small
