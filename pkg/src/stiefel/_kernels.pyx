# cython: language_level=3
"""Compiled kernels: small dense matrix exponential, the exp-map product and
its derivative with respect to the skew generators.

Same algorithm as ``stiefel._fallback`` (scaling and squaring, Padé degree
3/5/7/9/13), but the polynomial assembly, the solve and the squarings run
in C against BLAS/LAPACK without Python-level temporaries. All work arrays
are Fortran ordered. The derivative uses the eigendecomposition of the skew
generator and contracts one elementary direction at a time.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, ceil, log2, ldexp, sin, cos
from scipy.linalg.cython_blas cimport dgemm
from scipy.linalg.cython_lapack cimport dgesv, zheev
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double[5] _THETA = [1.495585217958292e-2, 2.539398330063230e-1,
                         9.504178996162932e-1, 2.097847961257068e0,
                         5.371920351148152e0]
cdef int[5] _DEGREE = [3, 5, 7, 9, 13]
cdef double[14] _B13 = [
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
    16380.0, 182.0, 1.0]
cdef double[10] _B9 = [17643225600.0, 8821612800.0, 2075673600.0,
                       302702400.0, 30270240.0, 2162160.0, 110880.0,
                       3960.0, 90.0, 1.0]
cdef double[8] _B7 = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0,
                      1512.0, 56.0, 1.0]
cdef double[6] _B5 = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0]
cdef double[4] _B3 = [120.0, 60.0, 12.0, 1.0]


cdef inline void _gemm(int m, int n, int k, double* a, int lda, double* b,
                       int ldb, double* c, int ldc) noexcept nogil:
    cdef char tr = b'N'
    cdef double one = 1.0, zero = 0.0
    dgemm(&tr, &tr, &m, &n, &k, &one, a, &lda, b, &ldb, &zero, c, &ldc)


cdef double _norm1(double* a, int n) noexcept nogil:
    cdef double best = 0.0, col
    cdef int i, j
    for j in range(n):
        col = 0.0
        for i in range(n):
            col += fabs(a[i + j * n])
        if col > best:
            best = col
    return best


cdef int _expm_inplace(double* a, double* out, int n) except -1:
    """Write expm(a) into ``out``; ``a`` is overwritten (scaled)."""
    work = np.empty(7 * n * n, dtype=np.float64)
    ipiv_arr = np.empty(max(n, 1), dtype=np.intc)
    cdef double[::1] w = work
    cdef int[::1] ipiv = ipiv_arr
    return _expm_core(a, out, n, &w[0], &ipiv[0])


cdef int _expm_core(double* a, double* out, int n, double* w, int* ipiv) except -1:
    """``_expm_inplace`` with caller-provided workspace (7 n^2 doubles, n ints)."""
    cdef int nn = n * n, i, j, k, m = 13, s = 0, info = 0, half
    cdef double nrm = _norm1(a, n)
    cdef double* b
    for k in range(4):
        if nrm <= _THETA[k]:
            m = _DEGREE[k]
            break
    if m == 13 and nrm > _THETA[4]:
        s = <int>ceil(log2(nrm / _THETA[4]))
        for i in range(nn):
            a[i] = ldexp(a[i], -s)

    cdef double* a2 = w
    cdef double* a4 = w + nn
    cdef double* a6 = w + 2 * nn
    cdef double* u = w + 3 * nn
    cdef double* v = w + 4 * nn
    cdef double* t = w + 5 * nn
    cdef double* t2 = w + 6 * nn

    _gemm(n, n, n, a, n, a, n, a2, n)
    if m == 13:
        b = _B13
        _gemm(n, n, n, a2, n, a2, n, a4, n)
        _gemm(n, n, n, a2, n, a4, n, a6, n)
        for i in range(nn):
            t[i] = b[13] * a6[i] + b[11] * a4[i] + b[9] * a2[i]
        _gemm(n, n, n, a6, n, t, n, t2, n)
        for i in range(nn):
            t2[i] += b[7] * a6[i] + b[5] * a4[i] + b[3] * a2[i]
        for i in range(n):
            t2[i + i * n] += b[1]
        _gemm(n, n, n, a, n, t2, n, u, n)
        for i in range(nn):
            t[i] = b[12] * a6[i] + b[10] * a4[i] + b[8] * a2[i]
        _gemm(n, n, n, a6, n, t, n, v, n)
        for i in range(nn):
            v[i] += b[6] * a6[i] + b[4] * a4[i] + b[2] * a2[i]
        for i in range(n):
            v[i + i * n] += b[0]
    else:
        if m == 3:
            b = _B3
        elif m == 5:
            b = _B5
        elif m == 7:
            b = _B7
        else:
            b = _B9
        half = (m - 1) // 2
        # t accumulates the odd part, v the even part, a4 holds a2^j
        for i in range(nn):
            t[i] = b[3] * a2[i]
            v[i] = b[2] * a2[i]
            a4[i] = a2[i]
        for i in range(n):
            t[i + i * n] += b[1]
            v[i + i * n] += b[0]
        for j in range(2, half + 1):
            _gemm(n, n, n, a4, n, a2, n, a6, n)
            for i in range(nn):
                a4[i] = a6[i]
                t[i] += b[2 * j + 1] * a4[i]
                v[i] += b[2 * j] * a4[i]
        _gemm(n, n, n, a, n, t, n, u, n)

    # solve (v - u) x = (v + u)
    for i in range(nn):
        t[i] = v[i] - u[i]
        out[i] = v[i] + u[i]
    dgesv(&n, &n, t, &n, ipiv, out, &n, &info)
    if info != 0:
        raise np.linalg.LinAlgError("singular Padé denominator")
    for k in range(s):
        _gemm(n, n, n, out, n, out, n, t, n)
        for i in range(nn):
            out[i] = t[i]
    return 0


def expm(a):
    """Matrix exponential of a square float64 array."""
    x = np.array(a, dtype=np.float64, order="F", copy=True)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValueError("expm expects a square matrix")
    cdef int n = x.shape[0]
    out = np.empty((n, n), dtype=np.float64, order="F")
    if n == 0:
        return out
    cdef double[::1, :] xv = x
    cdef double[::1, :] ov = out
    _expm_inplace(&xv[0, 0], &ov[0, 0], n)
    return out


def exp_map_core(frame, s, a, double c):
    """Return ``frame @ expm(s)[:, :p] @ expm(c * a)`` with ``p = a.shape[0]``."""
    f = np.asarray(frame, dtype=np.float64, order="F")
    sm = np.array(s, dtype=np.float64, order="F", copy=True)
    am = np.array(a, dtype=np.float64, order="F", copy=True)
    cdef int n = f.shape[0], m = sm.shape[0], p = am.shape[0], i
    if f.shape[1] != m or p > m:
        raise ValueError("incompatible shapes in exp_map_core")
    es = np.empty((m, m), dtype=np.float64, order="F")
    ea = np.empty((p, p), dtype=np.float64, order="F")
    tmp = np.empty((m, p), dtype=np.float64, order="F")
    out = np.empty((n, p), dtype=np.float64, order="F")
    if p == 0 or n == 0:
        return np.zeros((n, p))
    cdef double[::1, :] fv = f
    cdef double[::1, :] sv = sm
    cdef double[::1, :] av = am
    cdef double[::1, :] esv = es
    cdef double[::1, :] eav = ea
    cdef double[::1, :] tv = tmp
    cdef double[::1, :] ov = out
    for i in range(p * p):
        (&av[0, 0])[i] *= c
    _expm_inplace(&sv[0, 0], &esv[0, 0], m)
    _expm_inplace(&av[0, 0], &eav[0, 0], p)
    # leading p columns of es are contiguous in Fortran order
    _gemm(m, p, p, &esv[0, 0], m, &eav[0, 0], p, &tv[0, 0], m)
    _gemm(n, p, m, &fv[0, 0], n, &tv[0, 0], m, &ov[0, 0], n)
    return out


cdef inline double complex _cexp_i(double x) noexcept nogil:
    return cos(x) + 1j * sin(x)


cdef void _divided_differences(double[::1] w, double complex[:, ::1] phi) noexcept nogil:
    """``(e^{i w_j} - e^{i w_k}) / (i w_j - i w_k)``, stable for close eigenvalues."""
    cdef int n = w.shape[0], j, k
    cdef double h
    for j in range(n):
        for k in range(n):
            h = 0.5 * (w[j] - w[k])
            phi[j, k] = _cexp_i(0.5 * (w[j] + w[k])) * (1.0 if h == 0.0 else sin(h) / h)


cdef _skew_eig(double[:, ::1] x):
    """Eigenvectors ``v`` and angles ``w`` with ``x = v diag(i w) v^H``."""
    cdef int m = x.shape[0], lwork = 4 * m, info = 0, i, j
    cdef char jobz = b'V', uplo = b'U'
    v = np.empty((m, m), dtype=np.complex128)
    lam = np.empty(m, dtype=np.float64)
    cdef double complex[:, ::1] vv = v
    cdef double[::1] lv = lam
    cdef double complex* h = <double complex*> malloc(sizeof(double complex) * (m * m + lwork))
    cdef double* rwork = <double*> malloc(sizeof(double) * 3 * m)
    if h == NULL or rwork == NULL:
        free(h)
        free(rwork)
        raise MemoryError()
    try:
        # column-major copy of the Hermitian matrix i x
        for j in range(m):
            for i in range(m):
                h[j * m + i] = 1j * x[i, j]
        zheev(&jobz, &uplo, &m, h, &m, &lv[0], h + m * m, &lwork, rwork, &info)
        if info != 0:
            raise ArithmeticError(f"zheev failed with info={info}")
        for i in range(m):
            for j in range(m):
                vv[i, j] = h[j * m + i]
    finally:
        free(h)
        free(rwork)
    return v, -lam


cdef void _accumulate(double complex[:, ::1] v, double complex[:, ::1] phi,
                      double complex[:, ::1] left, double complex[:, ::1] right,
                      int i, int j, double factor, double complex[:, ::1] m,
                      double complex[:, ::1] t, double[:, ::1] out) noexcept nogil:
    """``out += factor * Re(left (phi o W) right)`` with
    ``W = conj(v[i])^T v[j] - conj(v[j])^T v[i]``, the eigenbasis image of
    the elementary skew matrix ``e_i e_j^T - e_j e_i^T``."""
    cdef int nn = v.shape[0], rows = left.shape[0], cols = right.shape[1], a, b, l
    cdef double complex acc
    for a in range(nn):
        for b in range(nn):
            m[a, b] = phi[a, b] * (v[i, a].conjugate() * v[j, b] - v[j, a].conjugate() * v[i, b])
    for a in range(nn):
        for b in range(cols):
            acc = 0.0
            for l in range(nn):
                acc = acc + m[a, l] * right[l, b]
            t[a, b] = acc
    for a in range(rows):
        for b in range(cols):
            acc = 0.0
            for l in range(nn):
                acc = acc + left[a, l] * t[l, b]
            out[a, b] += factor * acc.real


def shoot_jacobian(frame, s, a, double c, ii, jj, scale, int na):
    """Endpoint ``frame expm(s)[:, :p] expm(c a)`` and its derivatives.

    Coordinate k perturbs ``s`` by ``scale[k] (e_i e_j^T - e_j e_i^T)`` with
    ``(i, j) = (ii[k], jj[k])``; the first ``na`` coordinates also perturb
    ``a`` by the same elementary skew matrix. ``s`` and ``a`` must be skew.
    Returns ``(endpoint, jac)`` with ``jac[k]`` of shape n x p.
    """
    f = np.ascontiguousarray(frame, dtype=np.float64)
    sm = np.ascontiguousarray(s, dtype=np.float64)
    am = np.ascontiguousarray(a, dtype=np.float64)
    cdef long[::1] iv = np.ascontiguousarray(ii, dtype=np.int64)
    cdef long[::1] jv = np.ascontiguousarray(jj, dtype=np.int64)
    cdef double[::1] sc = np.ascontiguousarray(scale, dtype=np.float64)
    cdef int n = f.shape[0], m = sm.shape[0], p = am.shape[0], dim = iv.shape[0], k

    es = np.ascontiguousarray(expm(sm))
    eca = np.ascontiguousarray(expm(c * am))
    left = es[:, :p]
    endpoint = f @ left @ eca

    v, w = _skew_eig(sm)
    phi = np.empty((m, m), dtype=np.complex128)
    _divided_differences(w, phi)
    cdef double complex[:, ::1] vv = v
    cdef double complex[:, ::1] pv = phi
    cdef double complex[:, ::1] pm = np.ascontiguousarray(f @ v)
    cdef double complex[:, ::1] qm = np.ascontiguousarray(v.conj().T[:, :p] @ eca)
    cdef double complex[:, ::1] mbuf = np.empty((m, m), dtype=np.complex128)
    cdef double complex[:, ::1] tbuf = np.empty((m, p), dtype=np.complex128)
    jac = np.zeros((dim, n, p), dtype=np.float64)
    cdef double[:, :, ::1] jv3 = jac

    cdef double complex[:, ::1] va, pa_, qa, phia, mabuf, tabuf
    cdef bint use_a = na > 0 and c != 0.0
    if use_a:
        va_np, wa = _skew_eig(c * am)
        phia_np = np.empty((p, p), dtype=np.complex128)
        _divided_differences(wa, phia_np)
        va = va_np
        phia = phia_np
        pa_ = np.ascontiguousarray(f @ left @ va_np)
        qa = np.ascontiguousarray(va_np.conj().T)
        mabuf = np.empty((p, p), dtype=np.complex128)
        tabuf = np.empty((p, p), dtype=np.complex128)

    for k in range(dim):
        _accumulate(vv, pv, pm, qm, iv[k], jv[k], sc[k], mbuf, tbuf, jv3[k])
        if use_a and k < na:
            _accumulate(va, phia, pa_, qa, iv[k], jv[k], c, mabuf, tabuf, jv3[k])
    return endpoint, jac
