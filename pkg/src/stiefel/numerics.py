"""Dense small-matrix kernels used by every other module.

``expm`` dispatches to the compiled extension when it is available (see
``stiefel._backend``); everything else here is plain numpy.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import InvalidInput

BACKEND = _backend.NAME


def expm(s: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with Padé approximants.

    Relative accuracy is about 1e-15 for the moderate norms (at most a
    few multiples of pi) that occur on the Stiefel manifold.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise InvalidInput(f"expm expects a square matrix, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise InvalidInput("expm input has non-finite entries")
    return np.ascontiguousarray(_backend.expm(s))


def skew(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x - x.T)


def sym(x: np.ndarray) -> np.ndarray:
    return 0.5 * (x + x.T)


def orthonormal_completion(u: np.ndarray) -> np.ndarray:
    """Return ``U_perp`` (n x (n-p)) such that ``[U U_perp]`` is orthogonal.

    For n == p the result has zero columns.
    """
    u = np.asarray(u, dtype=float)
    n, p = u.shape
    if n == p:
        return np.zeros((n, 0))
    q, _ = np.linalg.qr(u, mode="complete")
    perp = q[:, p:]
    # one projection sweep removes the O(eps) leakage of the Householder basis
    perp = perp - u @ (u.T @ perp)
    q2, _ = np.linalg.qr(perp)
    return q2


def project_tangent(u: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Orthogonal projection of ``z`` onto the tangent space at ``u``.

    Returns ``U skew(U^T Z) + (I - U U^T) Z`` as an ambient n x p array.
    """
    u = np.asarray(u, dtype=float)
    z = np.asarray(z, dtype=float)
    if u.shape != z.shape:
        raise InvalidInput(f"shape mismatch: {u.shape} vs {z.shape}")
    utz = u.T @ z
    return u @ skew(utz) + (z - u @ utz)


def psd_sqrt(p: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Symmetric square root of a symmetric positive semidefinite matrix.

    Eigenvalues in ``[-tol, 0)`` are treated as rounding noise and clamped.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise InvalidInput("psd_sqrt expects a square matrix")
    if not np.all(np.isfinite(p)):
        raise InvalidInput("psd_sqrt input has non-finite entries")
    scale = max(1.0, np.abs(p).max(initial=0.0))
    if np.abs(p - p.T).max(initial=0.0) > tol * scale:
        raise InvalidInput("psd_sqrt input is not symmetric")
    w, v = np.linalg.eigh(sym(p))
    if w.size and w.min() < -tol * scale:
        raise InvalidInput(f"psd_sqrt input is indefinite (min eigenvalue {w.min():.3e})")
    w = np.clip(w, 0.0, None)
    return sym((v * np.sqrt(w)) @ v.T)


@dataclass
class RandomSource:
    """Seeded random stream; identical seeds give identical draws.

    Not thread-safe: use ``spawn`` to hand independent streams to workers.
    """

    seed: int = 0
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self._seq = np.random.SeedSequence(self.seed)
        self.generator = np.random.Generator(np.random.PCG64(self._seq))

    def normal(self, size) -> np.ndarray:
        return self.generator.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def spawn(self, count: int) -> list["RandomSource"]:
        children = []
        for child in self._seq.spawn(count):
            src = RandomSource.__new__(RandomSource)
            src.seed = self.seed
            src._seq = child
            src.generator = np.random.Generator(np.random.PCG64(child))
            children.append(src)
        return children


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, RandomSource):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def random_stiefel(n: int, p: int, rng=None) -> np.ndarray:
    """Haar-distributed n x p frame: orthogonal factor of a Gaussian matrix.

    The QR factor is sign-corrected (diag(R) > 0) so that the law is exactly
    invariant under left multiplication by O(n).
    """
    if p < 1 or n < p:
        raise InvalidInput(f"need n >= p >= 1, got n={n}, p={p}")
    g = _as_rng(rng).standard_normal((n, p))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def random_skew(p: int, rng=None) -> np.ndarray:
    g = _as_rng(rng).standard_normal((p, p))
    return g - g.T
