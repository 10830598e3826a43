"""Riemannian logarithm by single shooting, checked against the distance bounds.

The unknown initial velocity is written in full coordinates
``Delta = U A + U_perp B`` (A skew, B of size (n-p) x p) and the endpoint
equation ``Exp(Delta) = U_tilde`` is solved by damped Gauss-Newton with the
exact Jacobian of the exponential. The Jacobian comes from the backend
kernel ``shoot_jacobian`` (compiled when available).

Shooting converges to *a* geodesic, not necessarily the shortest. Unless
the first solve is already certified minimal by the lower envelope, more
candidates are generated: starts that rotate the frame within its span
(both branches for wide angles) and a continuation run along the path
``polar((1 - s) U + s U_tilde)``. The shortest converged candidate wins and
is classified against the lower and upper envelopes.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import schur

from . import _backend
from .bounds import lower_envelope, upper_envelope, upper_proven
from .errors import InvalidInput, NumericalFailure
from .manifold import (
    MetricLike, PointLike, StiefelPoint, TangentVector, as_metric, as_point,
    decompose, exp, frobenius_distance, norm, zero_tangent,
)
from .numerics import orthonormal_completion, project_tangent


#: iteration budget for each additional start; Gauss-Newton either converges
#: quadratically well within this or is stuck on a far branch
EXTRA_START_ITER = 25
#: residual below which a run's length is a reliable guide to its limit
ABANDON_RESIDUAL = 1e-2
#: slack when comparing such a length with the best one found
ABANDON_MARGIN = 0.05


class Certificate(enum.Enum):
    CERTIFIED_MINIMAL = "CertifiedMinimal"
    WITHIN_BOUNDS = "WithinBounds"
    EXCEEDS_UPPER_BOUND = "ExceedsUpperBound"
    NOT_CONVERGED = "NotConverged"

    def __str__(self):
        return self.value


class StepControl(enum.Enum):
    ARMIJO = "armijo"
    FIXED = "fixed"


@dataclass(frozen=True)
class LogOptions:
    max_iter: int = 200
    residual_tol: float = 1e-10
    step_control: StepControl = StepControl.ARMIJO
    damping: float = 1.0
    certify_tol: float = 1e-6
    multistart: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise InvalidInput("max_iter must be positive")
        if not (self.residual_tol > 0 and self.certify_tol > 0):
            raise InvalidInput("tolerances must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise InvalidInput("damping must lie in (0, 1]")
        object.__setattr__(self, "step_control", StepControl(self.step_control))


@dataclass(frozen=True, eq=False)
class LogResult:
    delta: TangentVector
    length: float
    residual: float
    iterations: int
    certificate: Certificate
    frob_dist: float = 0.0
    lower: float = 0.0
    upper: float = 0.0
    note: str = ""
    candidates: list = field(default_factory=list, repr=False)

    @property
    def converged(self) -> bool:
        return self.certificate is not Certificate.NOT_CONVERGED


# -- shooting in full coordinates -------------------------------------------

class _Shooter:
    """Endpoint map ``x -> Exp(Delta(x))`` for fixed ``U`` and beta."""

    def __init__(self, beta: float, u: np.ndarray):
        self.beta = beta
        self.u = u
        n, p = u.shape
        self.n, self.p = n, p
        self.perp = orthonormal_completion(u)
        self.frame = np.hstack([u, self.perp])
        self.iu = np.triu_indices(p, 1)
        self.na = len(self.iu[0])
        self.dim = self.na + (n - p) * p
        self._basis_cache = None

    def length(self, x: np.ndarray) -> float:
        xa, xb = x[:self.na], x[self.na:]
        return math.sqrt(2.0 * self.beta * float(xa @ xa) + float(xb @ xb))

    def split(self, x: np.ndarray):
        p = self.p
        a = np.zeros((p, p))
        a[self.iu] = x[:self.na]
        a -= a.T
        b = x[self.na:].reshape(self.n - p, p)
        return a, b

    def coords(self, z: np.ndarray) -> np.ndarray:
        a = self.u.T @ z
        b = self.perp.T @ z
        return np.concatenate([0.5 * (a - a.T)[self.iu], b.ravel()])

    def ambient(self, x: np.ndarray) -> np.ndarray:
        a, b = self.split(x)
        return self.u @ a + self.perp @ b

    def big(self, a, b) -> np.ndarray:
        p, n = self.p, self.n
        s = np.zeros((n, n))
        s[:p, :p] = 2.0 * self.beta * a
        s[:p, p:] = -b.T
        s[p:, :p] = b
        return s

    def endpoint(self, x: np.ndarray) -> np.ndarray:
        a, b = self.split(x)
        return _backend.exp_map_core(self.frame, self.big(a, b), a, 1.0 - 2.0 * self.beta)

    def _coordinate_planes(self):
        """Index pairs and scales of the elementary skew perturbations of the
        big block matrix, one per coordinate."""
        if self._basis_cache is None:
            n, p = self.n, self.p
            rows = np.repeat(np.arange(p, n), p)
            cols = np.tile(np.arange(p), n - p)
            ii = np.concatenate([self.iu[0], rows])
            jj = np.concatenate([self.iu[1], cols])
            scale = np.concatenate([np.full(self.na, 2.0 * self.beta), np.ones(len(rows))])
            self._basis_cache = (ii, jj, scale)
        return self._basis_cache

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """d endpoint / dx as an (n p) x dim matrix."""
        a, b = self.split(x)
        ii, jj, scale = self._coordinate_planes()
        _, jac = _backend.shoot_jacobian(self.frame, self.big(a, b), a,
                                         1.0 - 2.0 * self.beta, ii, jj, scale, self.na)
        return jac.reshape(self.dim, -1).T


@dataclass
class _Run:
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool


def _gauss_newton(sh: _Shooter, target: np.ndarray, x0: np.ndarray, opts: LogOptions,
                  max_iter: Optional[int] = None, abandon_above: float = math.inf) -> _Run:
    """Damped Gauss-Newton on ``|Exp(Delta(x)) - target|_F``.

    A run whose residual is already small while its length exceeds
    ``abandon_above`` is heading for a longer geodesic than one already
    known; it is stopped and reported as not converged.
    """
    x = x0.copy()
    r = sh.endpoint(x) - target
    res = float(np.linalg.norm(r))
    limit = opts.max_iter if max_iter is None else max_iter
    it = 0
    while it < limit:
        if not math.isfinite(res):
            raise NumericalFailure("non-finite residual during shooting")
        if res <= opts.residual_tol:
            return _Run(x, res, it, True)
        if res < ABANDON_RESIDUAL and sh.length(x) > abandon_above:
            return _Run(x, res, it, False)
        it += 1
        jac = sh.jacobian(x)
        step = np.linalg.lstsq(jac, -r.ravel(), rcond=None)[0]
        if not np.all(np.isfinite(step)):
            raise NumericalFailure("non-finite Gauss-Newton step")
        if opts.step_control is StepControl.FIXED:
            x = x + opts.damping * step
            r = sh.endpoint(x) - target
            res = float(np.linalg.norm(r))
            continue
        tau = 1.0
        while True:
            x_new = x + tau * step
            r_new = sh.endpoint(x_new) - target
            res_new = float(np.linalg.norm(r_new))
            if res_new <= (1.0 - 1e-4 * tau) * res or res_new <= opts.residual_tol:
                break
            tau *= 0.5
            if tau < 1e-3:
                return _Run(x, res, it, False)
        x, r, res = x_new, r_new, res_new
    return _Run(x, res, it, res <= opts.residual_tol)


def _polar(m: np.ndarray) -> Optional[np.ndarray]:
    w, sv, vt = np.linalg.svd(m, full_matrices=False)
    if sv.min() < 1e-8:
        return None
    return w @ vt


def _continuation(sh: _Shooter, target: np.ndarray, opts: LogOptions) -> Optional[_Run]:
    """Track the solution along ``polar((1 - s) U + s target)`` from ``s = 0``."""
    u = sh.u
    x = np.zeros(sh.dim)
    s, ds, total = 0.0, 0.25, 0
    while s < 1.0:
        s_next = min(1.0, s + ds)
        goal = target if s_next == 1.0 else _polar((1.0 - s_next) * u + s_next * target)
        if goal is None:
            return None
        run = _gauss_newton(sh, goal, x, opts,
                            max_iter=min(12, opts.max_iter) if s_next < 1.0 else opts.max_iter)
        total += run.iterations
        if run.converged:
            x, s = run.x, s_next
            ds = min(0.5, 1.5 * ds)
        else:
            ds *= 0.5
            if ds < 1.0 / 512:
                return _Run(x, float(np.linalg.norm(sh.endpoint(x) - target)), total, False)
    return _Run(x, float(np.linalg.norm(sh.endpoint(x) - target)), total, True)


def _default_init(beta: float, p: int, u: np.ndarray, target: np.ndarray, delta: float) -> np.ndarray:
    """Tangent projection of ``target - U`` scaled to the shell floor."""
    z = project_tangent(u, target - u)
    m = lower_envelope(beta, p, delta)
    a = u.T @ z
    size = math.sqrt(max(0.0, float(np.vdot(z, z) - (1.0 - beta) * np.vdot(a, a))))
    if size > 1e-8 * max(1.0, delta):
        return z * (m / size)
    # the chord is normal to the tangent space (e.g. target = -U): start from a
    # geodesic that flips every column instead
    from .curves import gamma_k
    try:
        return gamma_k(u, p).velocity(0.0)
    except InvalidInput:
        return z


def _real_log_rotation(r: np.ndarray) -> tuple[np.ndarray, list]:
    """Real Schur form of a rotation: ``r = z expm(gen(angles)) z^T``.

    Returns ``z`` and a list of ``(i, j, angle)`` planes. Pairs of -1
    eigenvalues become half turns.
    """
    p = r.shape[0]
    t, z = schur(r, output="real")
    planes, negatives, i = [], [], 0
    while i < p:
        if i + 1 < p and abs(t[i + 1, i]) > 1e-12:
            planes.append((i, i + 1, math.atan2(t[i, i + 1], t[i, i])))
            i += 2
        else:
            if t[i, i] < 0:
                negatives.append(i)
            i += 1
    planes += [(a, b, math.pi) for a, b in zip(negatives[::2], negatives[1::2])]
    return z, planes


def _rotation_generators(r: np.ndarray) -> list[np.ndarray]:
    """Skew logarithms of ``r``, with every angle beyond pi/2 also taken on
    its other branch (one at a time, then all together)."""
    p = r.shape[0]
    z, planes = _real_log_rotation(r)
    wide = [j for j, pl in enumerate(planes) if abs(pl[2]) > 0.5 * math.pi]
    variants = [()] + [(j,) for j in wide] + ([tuple(wide)] if len(wide) > 1 else [])
    gens = []
    for flipped in variants:
        gen = np.zeros((p, p))
        for j, (a, b, th) in enumerate(planes):
            if j in flipped:
                th -= math.copysign(2.0 * math.pi, th)
            gen[a, b], gen[b, a] = th, -th
        gens.append(z @ gen @ z.T)
    return gens


#: (skew scale, normal scale) pairs applied to every rotation start
START_SCALES = ((1.0, 1.0), (1.0, 0.5), (0.5, 0.5), (0.5, 2.0))


def _structured_starts(u: np.ndarray, target: np.ndarray, perp: np.ndarray,
                       beta: float = 1.0) -> list[np.ndarray]:
    """Initial tangents that first turn ``U`` within its span towards ``target``.

    The skew part comes from a logarithm of the orthogonal polar factor ``r``
    of ``U^T target`` and the normal part from ``(I - U U^T) target r^T``;
    both are tried at a few relative scales, since far pairs are often
    joined by geodesics that split the work between the two. When the
    polar factor of ``U^T target`` is a reflection, ``r`` is its rotation
    part and one column is additionally sent through a half turn out of
    the span. For beta > 1 turning within the span is the expensive
    direction, so a quarter of the rotation combined with a half turn of
    one direction out of the span is tried as well.
    """
    p = u.shape[1]
    w, _, yt = np.linalg.svd(u.T @ target)
    reflect = np.linalg.det(w @ yt) < 0
    if reflect:
        w = w.copy()
        w[:, -1] *= -1.0
    r = w @ yt
    normal = target - u @ (u.T @ target)
    starts = []
    for gen in _rotation_generators(r):
        for sa, sb in START_SCALES:
            starts.append(sa * (u @ gen) + sb * (normal @ r.T))
    if reflect:
        # U^T target is close to r F with F the reflection along y: turn by r
        # within the span and send the y-direction half way round outside it
        y = yt[-1]
        out = normal @ y
        if np.linalg.norm(out) < 1e-6 and perp.shape[1]:
            out = perp[:, 0]
        if np.linalg.norm(out) > 1e-12:
            out = out / np.linalg.norm(out)
            for gen in _rotation_generators(r):
                starts.append(u @ gen + math.pi * np.outer(out, y))
    if beta > 1.0 and perp.shape[1]:
        lead = np.linalg.svd(normal, full_matrices=False)
        out = lead[0][:, 0] if lead[1][0] > 1e-6 else perp[:, 0]
        gen = _rotation_generators(r)[0]
        for y in (yt[0], yt[-1]):
            starts.append(0.25 * (u @ gen) + math.pi * np.outer(out, y))
    return starts


# -- public API --------------------------------------------------------------

def certify(metric: MetricLike, u: PointLike, u_tilde: PointLike, d: TangentVector,
            certify_tol: float = 1e-6, endpoint_tol: float = 1e-8) -> Certificate:
    """Place ``|Delta|_beta`` relative to the lower and upper envelopes."""
    m = as_metric(metric)
    pu, pv = as_point(u), as_point(u_tilde)
    if pu.shape != pv.shape:
        raise InvalidInput(f"dimension mismatch: {pu.shape} vs {pv.shape}")
    if np.linalg.norm(exp(m, d).U - pv.U) > endpoint_tol:
        raise InvalidInput("Exp(Delta) does not reach U_tilde")
    length = norm(m, d)
    delta = frobenius_distance(pu, pv)
    if length <= lower_envelope(m.beta, pu.p, delta) + certify_tol:
        return Certificate.CERTIFIED_MINIMAL
    if length > upper_envelope(m.beta, pu.p, delta) + certify_tol:
        return Certificate.EXCEEDS_UPPER_BOUND
    return Certificate.WITHIN_BOUNDS


def log_shooting(metric: MetricLike, u: PointLike, u_tilde: PointLike,
                 opts: Optional[LogOptions] = None, init: Optional[np.ndarray] = None) -> LogResult:
    """Initial velocity of a geodesic from ``U`` to ``U_tilde``.

    ``init`` overrides the starting tangent (useful to steer the solver onto
    a particular branch). Failure to converge is reported through the
    certificate, never raised.
    """
    m = as_metric(metric)
    opts = opts or LogOptions()
    pu, pv = as_point(u), as_point(u_tilde)
    if pu.shape != pv.shape:
        raise InvalidInput(f"dimension mismatch: {pu.shape} vs {pv.shape}")
    n, p = pu.shape
    U, V = pu.U, pv.U
    delta = frobenius_distance(U, V)
    lo = lower_envelope(m.beta, p, delta)
    hi = upper_envelope(m.beta, p, delta)
    note = "" if upper_proven(n, p) else "upper envelope is advisory for n < 2p"

    def result(d, res, its, cert, cands=()):
        return LogResult(d, norm(m, d), res, its, cert, delta, lo, hi, note, list(cands))

    if delta <= opts.residual_tol:
        return result(zero_tangent(pu), delta, 0, Certificate.CERTIFIED_MINIMAL)

    sh = _Shooter(m.beta, U)
    if init is None:
        z0 = _default_init(m.beta, p, U, V, delta)
    else:
        z0 = project_tangent(U, np.asarray(init, dtype=float))

    def tangent_of(run):
        return decompose(pu, sh.ambient(run.x))

    def length_of(run):
        return sh.length(run.x)

    def minimal(run):
        return run.converged and length_of(run) <= lo + opts.certify_tol

    runs = [_gauss_newton(sh, V, sh.coords(z0), opts)]
    if init is None and opts.multistart and not minimal(runs[0]):

        def best_length():
            done = [length_of(r) for r in runs if r.converged]
            return min(done) + ABANDON_MARGIN if done else math.inf

        cont = _continuation(sh, V, opts)
        if cont is not None:
            runs.append(cont)
        for z in _structured_starts(U, V, sh.perp, m.beta):
            if any(minimal(r) for r in runs):
                break
            runs.append(_gauss_newton(sh, V, sh.coords(z), opts,
                                      max_iter=min(EXTRA_START_ITER, opts.max_iter),
                                      abandon_above=best_length()))
    total = sum(r.iterations for r in runs)

    good = [r for r in runs if r.converged]
    if not good:
        best = min(runs, key=lambda r: r.residual)
        return result(tangent_of(best), best.residual, total, Certificate.NOT_CONVERGED)
    best = min(good, key=length_of)
    d = tangent_of(best)
    cert = certify(m, pu, pv, d, opts.certify_tol, endpoint_tol=max(1e-8, 10 * opts.residual_tol))
    return result(d, best.residual, total, cert, [length_of(r) for r in good])
