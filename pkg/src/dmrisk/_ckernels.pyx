# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels. Same signatures as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, NAN
from libc.stdlib cimport malloc, free, qsort

cnp.import_array()

BACKEND = "cython"

cdef enum:
    _OK = 0
    _NO_BRACKET = 1

OK = _OK
NO_BRACKET = _NO_BRACKET


cdef int _cmp_desc(const void* a, const void* b) noexcept nogil:
    cdef double x = (<double*>a)[0]
    cdef double y = (<double*>b)[0]
    if x < y:
        return 1
    if x > y:
        return -1
    return 0


def project_simplex(y):
    """Euclidean projection of y onto the probability simplex (sort based)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = yy.shape[0], j
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double* u = <double*>malloc(n * sizeof(double))
    cdef double css = 0.0, lam = 0.0
    if u == NULL:
        raise MemoryError()
    try:
        for j in range(n):
            u[j] = yy[j]
        qsort(u, n, sizeof(double), _cmp_desc)
        for j in range(n):
            css += u[j]
            if u[j] + (1.0 - css) / (j + 1) > 0:
                lam = (1.0 - css) / (j + 1)
        for j in range(n):
            out[j] = yy[j] + lam if yy[j] + lam > 0 else 0.0
    finally:
        free(u)
    return out


cdef inline Py_ssize_t _upper(const double* a, Py_ssize_t n, double x) noexcept nogil:
    # number of entries <= x in a sorted array
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef double _pbar(double u, const double* banks, Py_ssize_t c, Py_ssize_t n, const double* w) noexcept nogil:
    cdef double total = 0.0
    cdef Py_ssize_t k
    for k in range(c):
        if w[k] != 0.0:
            total += w[k] * _upper(banks + k * n, n, u)
    return total / n


cdef double _avar(double u, const double* banks, const double* suffix, Py_ssize_t c, Py_ssize_t n,
                  const double* w, double p) noexcept nogil:
    cdef double excess = 0.0
    cdef Py_ssize_t k, idx
    for k in range(c):
        if w[k] != 0.0:
            idx = _upper(banks + k * n, n, u)
            excess += w[k] * (suffix[k * (n + 1) + idx] - (n - idx) * u)
    return u + excess / (n * (1.0 - p))


cdef int _point(const double* banks, const double* suffix, Py_ssize_t c, Py_ssize_t n, const double* w,
                double p, double eps, double lo, double hi,
                double* u_out, double* c_out, double* p_out) noexcept nogil:
    cdef double width = hi - lo, step, p_lo, p_hi, mid, pm
    cdef double scale = fabs(lo) if fabs(lo) > fabs(hi) else fabs(hi)
    cdef int k
    if scale < 1.0:
        scale = 1.0
    if width < 1e-12 * scale:
        width = 1e-12 * scale
    step = width
    p_lo = _pbar(lo, banks, c, n, w)
    k = 0
    while p_lo >= p:
        if k >= 64:
            return _NO_BRACKET
        lo -= step
        step *= 2.0
        k += 1
        p_lo = _pbar(lo, banks, c, n, w)
    step = width
    p_hi = _pbar(hi, banks, c, n, w)
    k = 0
    while p_hi < p:
        if k >= 64:
            return _NO_BRACKET
        hi += step
        step *= 2.0
        k += 1
        p_hi = _pbar(hi, banks, c, n, w)
    while True:
        if fabs(p_hi - p) <= eps:
            u_out[0] = hi
            p_out[0] = p_hi
            break
        if fabs(p_lo - p) <= eps:
            u_out[0] = lo
            p_out[0] = p_lo
            break
        mid = 0.5 * (lo + hi)
        if not (lo < mid and mid < hi):
            u_out[0] = hi
            p_out[0] = p_hi
            break
        pm = _pbar(mid, banks, c, n, w)
        if pm < p:
            lo = mid
            p_lo = pm
        else:
            hi = mid
            p_hi = pm
    c_out[0] = _avar(u_out[0], banks, suffix, c, n, w, p)
    return _OK


def pbar_eval(double u, sorted_banks, weights):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] b = np.ascontiguousarray(sorted_banks, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(weights, dtype=np.float64)
    return _pbar(u, &b[0, 0], b.shape[0], b.shape[1], &w[0])


def saa_point(sorted_banks, suffix, weights, double p, double eps, double lo0, double hi0):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] b = np.ascontiguousarray(sorted_banks, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] s = np.ascontiguousarray(suffix, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double u = NAN, cv = NAN, pu = NAN
    cdef int status
    with nogil:
        status = _point(&b[0, 0], &s[0, 0], b.shape[0], b.shape[1], &w[0], p, eps, lo0, hi0, &u, &cv, &pu)
    if status != _OK:
        return NAN, NAN, NAN, status
    return u, cv, pu, status


def saa_grid(sorted_banks, suffix, weight_rows, double p, double eps, double lo0, double hi0):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] b = np.ascontiguousarray(sorted_banks, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] s = np.ascontiguousarray(suffix, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] w = np.ascontiguousarray(weight_rows, dtype=np.float64)
    cdef Py_ssize_t g = w.shape[0], r, c = b.shape[0], n = b.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] us = np.full(g, NAN)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cs = np.full(g, NAN)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ps = np.full(g, NAN)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] st = np.zeros(g, dtype=np.int32)
    cdef double* bp = &b[0, 0]
    cdef double* sp = &s[0, 0]
    with nogil:
        for r in range(g):
            st[r] = _point(bp, sp, c, n, &w[r, 0], p, eps, lo0, hi0, &us[r], &cs[r], &ps[r])
    return us, cs, ps, st
