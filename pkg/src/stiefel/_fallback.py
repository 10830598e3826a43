"""Pure-numpy kernels, used when the compiled extension is unavailable.

Both backends implement the same algorithm (Higham's scaling and squaring
with diagonal Padé approximants of degree 3, 5, 7, 9 or 13) so that they
agree to rounding error.
"""
import math

import numpy as np

# max 1-norm for which the degree-m approximant reaches unit roundoff
THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}

PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (
        17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0,
    ),
    13: (
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
        16380.0, 182.0, 1.0,
    ),
}


def _pade_low(a, m):
    b = PADE_COEFFS[m]
    ident = np.eye(a.shape[0])
    a2 = a @ a
    powers = [ident, a2]
    for _ in range((m - 1) // 2 - 1):
        powers.append(powers[-1] @ a2)
    u = sum(b[2 * j + 1] * powers[j] for j in range(len(powers)))
    v = sum(b[2 * j] * powers[j] for j in range(len(powers)))
    return a @ u, v


def _pade13(a):
    b = PADE_COEFFS[13]
    ident = np.eye(a.shape[0])
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    return u, v


def expm(a):
    """Matrix exponential of a square float64 array."""
    a = np.array(a, dtype=float)
    if a.shape[0] == 0:
        return a.copy()
    nrm = np.abs(a).sum(axis=0).max()
    for m in (3, 5, 7, 9):
        if nrm <= THETA[m]:
            u, v = _pade_low(a, m)
            return np.linalg.solve(v - u, v + u)
    s = max(0, int(math.ceil(math.log2(nrm / THETA[13]))))
    if s:
        a = a / 2.0**s
    u, v = _pade13(a)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def exp_map_core(frame, s, a, c):
    """Return ``frame @ expm(s)[:, :p] @ expm(c * a)`` with ``p = a.shape[0]``."""
    p = a.shape[0]
    left = expm(s)[:, :p]
    return frame @ left @ expm(c * np.asarray(a, dtype=float))


def _skew_eig(x):
    """Eigenvectors ``v``, angles ``w`` and divided differences ``phi`` of ``exp``
    for a skew ``x = v diag(i w) v^H``."""
    lam, v = np.linalg.eigh(1j * x)
    w = -lam
    half_sum = 0.5 * (w[:, None] + w[None, :])
    half_diff = 0.5 * (w[:, None] - w[None, :])
    phi = np.exp(1j * half_sum) * np.sinc(half_diff / math.pi)
    return v, phi


def _elementary_terms(v, phi, left, right, ii, jj):
    """``Re(left (phi o W_k) right)`` for the eigenbasis images ``W_k`` of the
    elementary skew matrices ``e_i e_j^T - e_j e_i^T``."""
    vi, vj = v[ii], v[jj]

    def half(x, y):
        z = (left[None] * x.conj()[:, None, :]) @ phi
        return (z * y[:, None, :]) @ right

    return (half(vi, vj) - half(vj, vi)).real


def shoot_jacobian(frame, s, a, c, ii, jj, scale, na):
    """Endpoint ``frame expm(s)[:, :p] expm(c a)`` and its derivatives.

    Coordinate k perturbs ``s`` by ``scale[k] (e_i e_j^T - e_j e_i^T)`` with
    ``(i, j) = (ii[k], jj[k])``; the first ``na`` coordinates also perturb
    ``a`` by the same elementary skew matrix. ``s`` and ``a`` must be skew.
    Returns ``(endpoint, jac)`` with ``jac[k]`` of shape n x p.
    """
    a = np.asarray(a, dtype=float)
    p = a.shape[0]
    ii = np.asarray(ii)
    jj = np.asarray(jj)
    left = expm(s)[:, :p]
    eca = expm(c * a)
    v, phi = _skew_eig(s)
    jac = _elementary_terms(v, phi, frame @ v, v.conj().T[:, :p] @ eca, ii, jj)
    jac *= np.asarray(scale, dtype=float)[:, None, None]
    if na and c != 0.0:
        va, phia = _skew_eig(c * a)
        jac[:na] += c * _elementary_terms(va, phia, frame @ left @ va, va.conj().T,
                                          ii[:na], jj[:na])
    return frame @ left @ eca, jac
