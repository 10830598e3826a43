"""Points, tangent vectors and the beta-metric on St(n, p).

Tangent vectors are stored in ambient form together with the splitting
``Delta = U A + Q B`` where ``A = U^T Delta`` is skew and ``Q`` has
``q = min(p, n - p)`` orthonormal columns orthogonal to ``U``. The
Riemannian exponential uses this reduced splitting, so its inner matrix
exponential is (p + q) x (p + q) rather than n x n.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from . import _backend
from .errors import InvalidInput
from .numerics import expm, orthonormal_completion, project_tangent, skew

ORTHO_TOL = 1e-8
REPAIR_TOL = 1e-4
TANGENT_TOL = 1e-8


def _frozen(x: np.ndarray) -> np.ndarray:
    x = np.array(x, dtype=float)
    x.setflags(write=False)
    return x


@dataclass(frozen=True, eq=False)
class StiefelPoint:
    """An n x p matrix with orthonormal columns.

    Inputs whose orthonormality defect lies between 1e-8 and 1e-4 are
    re-orthonormalized by a thin QR (signs chosen so diag(R) > 0, which keeps
    the repaired frame close to the input); larger defects are rejected.
    """

    U: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.U, dtype=float)
        if u.ndim != 2:
            raise InvalidInput(f"a Stiefel point must be 2-d, got shape {u.shape}")
        n, p = u.shape
        if p < 1 or n < p:
            raise InvalidInput(f"need n >= p >= 1, got n={n}, p={p}")
        if not np.all(np.isfinite(u)):
            raise InvalidInput("non-finite entries")
        defect = np.linalg.norm(u.T @ u - np.eye(p))
        if defect > REPAIR_TOL:
            raise InvalidInput(f"columns are not orthonormal (defect {defect:.2e})")
        if defect > ORTHO_TOL:
            q, r = np.linalg.qr(u)
            u = q * np.sign(np.diag(r))
        object.__setattr__(self, "U", _frozen(u))

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def p(self) -> int:
        return self.U.shape[1]

    @property
    def shape(self):
        return self.U.shape

    def __array__(self, dtype=None, copy=None):
        return self.U if dtype is None else self.U.astype(dtype)


PointLike = Union[StiefelPoint, np.ndarray]


def as_point(u: PointLike) -> StiefelPoint:
    return u if isinstance(u, StiefelPoint) else StiefelPoint(u)


@dataclass(frozen=True)
class BetaMetric:
    """The metric ``<D, D'> = beta tr(A^T A') + tr(B^T B')``.

    beta = 1 is the Euclidean metric and beta = 1/2 the canonical one.
    """

    beta: float

    def __post_init__(self):
        b = float(self.beta)
        if not np.isfinite(b) or b <= 0:
            raise InvalidInput(f"beta must be positive, got {self.beta}")
        object.__setattr__(self, "beta", b)


EUCLIDEAN = BetaMetric(1.0)
CANONICAL = BetaMetric(0.5)

MetricLike = Union[BetaMetric, float]


def as_metric(metric: MetricLike) -> BetaMetric:
    return metric if isinstance(metric, BetaMetric) else BetaMetric(metric)


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Tangent vector at ``base`` with its splitting ``Delta = U A + Q B``."""

    base: StiefelPoint
    delta: np.ndarray
    A: np.ndarray
    Q: np.ndarray
    B: np.ndarray

    @property
    def U(self) -> np.ndarray:
        return self.base.U

    def scaled(self, c: float) -> "TangentVector":
        return TangentVector(self.base, _frozen(c * self.delta), _frozen(c * self.A),
                             self.Q, _frozen(c * self.B))

    def __array__(self, dtype=None, copy=None):
        return self.delta if dtype is None else self.delta.astype(dtype)


def _perp_basis(u: np.ndarray, zp: np.ndarray):
    """Orthonormal q-column ``Q`` with ``Q^T U = 0`` and ``Q Q^T zp = zp``."""
    n, p = u.shape
    if n >= 2 * p:
        # Householder QR of [U, zp] yields an orthogonal basis whose trailing
        # p columns are orthogonal to U even when zp is rank deficient
        q, _ = np.linalg.qr(np.hstack([u, zp]), mode="complete")
        qq = q[:, p:2 * p]
        qq = qq - u @ (u.T @ qq)
        return np.linalg.qr(qq)[0]
    return orthonormal_completion(u)


def decompose(u: PointLike, z: np.ndarray, tol: float = TANGENT_TOL) -> TangentVector:
    """Split an ambient tangent matrix into ``(A, Q, B)``.

    ``z`` must satisfy ``U^T Z + Z^T U = 0``; defects up to 1e-4 (relative to
    ``max(1, |Z|_F)``) are removed by projection, larger ones are rejected.
    """
    pt = as_point(u)
    u = pt.U
    z = np.asarray(z, dtype=float)
    if z.shape != u.shape:
        raise InvalidInput(f"shape mismatch: point {u.shape}, tangent {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InvalidInput("non-finite tangent entries")
    scale = max(1.0, np.linalg.norm(z))
    defect = np.linalg.norm(u.T @ z + z.T @ u) / scale
    if defect > REPAIR_TOL:
        raise InvalidInput(f"matrix is not tangent (defect {defect:.2e})")
    if defect > tol:
        z = project_tangent(u, z)
    utz = u.T @ z
    a = skew(utz)
    zp = z - u @ utz
    q = _perp_basis(u, zp)
    b = q.T @ zp
    delta = u @ a + zp
    return TangentVector(pt, _frozen(delta), _frozen(a), _frozen(q), _frozen(b))


def tangent(u: PointLike, z: np.ndarray) -> TangentVector:
    """Project an arbitrary n x p matrix to the tangent space and decompose it."""
    pt = as_point(u)
    return decompose(pt, project_tangent(pt.U, z))


def zero_tangent(u: PointLike) -> TangentVector:
    pt = as_point(u)
    return decompose(pt, np.zeros_like(pt.U))


def _same_base(d1: TangentVector, d2: TangentVector) -> None:
    if d1.base is d2.base:
        return
    if d1.U.shape != d2.U.shape or not np.allclose(d1.U, d2.U, atol=1e-12, rtol=0):
        raise InvalidInput("tangent vectors live at different base points")


def inner(metric: MetricLike, d1: TangentVector, d2: TangentVector) -> float:
    """``tr(D1^T (I - (1 - beta) U U^T) D2)``."""
    beta = as_metric(metric).beta
    _same_base(d1, d2)
    return float(np.vdot(d1.delta, d2.delta) - (1.0 - beta) * np.vdot(d1.A, d2.A))


def norm(metric: MetricLike, d: TangentVector) -> float:
    beta = as_metric(metric).beta
    return float(np.sqrt(max(0.0, beta * np.vdot(d.A, d.A) + np.vdot(d.B, d.B))))


def norm_at(metric: MetricLike, u: np.ndarray, v: np.ndarray) -> float:
    """beta-norm of an ambient tangent matrix ``v`` at ``u`` (no validation)."""
    beta = as_metric(metric).beta
    a = u.T @ v
    sq = np.vdot(v, v) - (1.0 - beta) * np.vdot(a, a)
    return float(np.sqrt(max(sq, 0.0)))


def exp_block(beta: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """The skew matrix ``[[2 beta A, -B^T], [B, 0]]``."""
    p, q = a.shape[0], b.shape[0]
    s = np.zeros((p + q, p + q))
    s[:p, :p] = 2.0 * beta * a
    s[:p, p:] = -b.T
    s[p:, :p] = b
    return s


def exp(metric: MetricLike, d: TangentVector, full: bool = False) -> StiefelPoint:
    """Riemannian exponential of the beta-metric.

    ``[U Q] expm([[2 beta A, -B^T], [B, 0]]) I_{(p+q) x p} expm((1 - 2 beta) A)``.
    With ``full=True`` the n x n form built on a complete ``U_perp`` is used;
    it exists only as an independent check of the reduced path.
    """
    beta = as_metric(metric).beta
    u = d.U
    if full:
        perp = orthonormal_completion(u)
        q, b = perp, perp.T @ d.delta
    else:
        q, b = d.Q, d.B
    frame = np.hstack([u, q])
    y = _backend.exp_map_core(frame, exp_block(beta, d.A, b), d.A, 1.0 - 2.0 * beta)
    return StiefelPoint(np.ascontiguousarray(y))


def geodesic_velocity(metric: MetricLike, d: TangentVector, t: float) -> np.ndarray:
    """Derivative of ``t -> Exp(t Delta)`` in ambient coordinates."""
    beta = as_metric(metric).beta
    p = d.A.shape[0]
    frame = np.hstack([d.U, d.Q])
    s = exp_block(beta, d.A, d.B)
    c = 1.0 - 2.0 * beta
    inner_vel = s[:, :p] + c * np.vstack([d.A, np.zeros((d.Q.shape[1], p))])
    return frame @ expm(t * s) @ inner_vel @ expm(c * t * d.A)


def frobenius_distance(u: PointLike, v: PointLike) -> float:
    """``|U - V|_F``, clamped into ``[0, 2 sqrt(p)]``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise InvalidInput(f"dimension mismatch: {u.shape} vs {v.shape}")
    p = u.shape[1]
    return float(min(np.linalg.norm(u - v), 2.0 * np.sqrt(p)))


def pad_rows(u: PointLike, extra: int) -> StiefelPoint:
    """Append ``extra`` zero rows, embedding St(n, p) into St(n + extra, p)."""
    if extra < 0:
        raise InvalidInput("number of padding rows must be nonnegative")
    pt = as_point(u)
    if extra == 0:
        return pt
    return StiefelPoint(np.vstack([pt.U, np.zeros((extra, pt.p))]))


def orthonormality_defect(u: np.ndarray) -> float:
    u = np.asarray(u)
    return float(np.linalg.norm(u.T @ u - np.eye(u.shape[1])))


# -- matrix text files -------------------------------------------------------

def read_matrix(path) -> np.ndarray:
    """Read the interchange format: a header line ``n p`` then n rows of p numbers."""
    lines = [ln for ln in Path(path).read_text().splitlines()
             if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise InvalidInput(f"{path}: empty matrix file")
    try:
        n, p = (int(x) for x in lines[0].split())
        rows = [[float(x) for x in ln.split()] for ln in lines[1:]]
    except ValueError as exc:
        raise InvalidInput(f"{path}: malformed matrix file ({exc})") from None
    m = np.array(rows, dtype=float)
    if m.shape != (n, p):
        raise InvalidInput(f"{path}: header says {n}x{p}, body is {m.shape}")
    return m


def format_matrix(m: np.ndarray) -> str:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    out = [f"{m.shape[0]} {m.shape[1]}"]
    out += [" ".join(repr(float(x)) for x in row) for row in m]
    return "\n".join(out) + "\n"


def write_matrix(path, m: np.ndarray) -> None:
    Path(path).write_text(format_matrix(m))
