# cython: language_level=3
"""Compiled hot kernels: Philox4x64-10 normals and Thomas elimination.

Algorithms mirror ``_pykernels`` line for line; see that module for the
conventions.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, fabs
from libc.stdint cimport uint64_t

cnp.import_array()

NAME = "cython"

cdef uint64_t M0 = 0xD2E7470EE14C6C93ULL
cdef uint64_t M1 = 0xCA5A826395121157ULL
cdef uint64_t W0 = 0x9E3779B97F4A7C15ULL
cdef uint64_t W1 = 0xBB67AE8584CAA73BULL

cdef double A[8]
cdef double B[8]
cdef double C[8]
cdef double D[8]
cdef double E[8]
cdef double F[8]
A[:] = [3.387132872796366608, 133.14166789178437745, 1971.5909503065514427,
        13731.693765509461125, 45921.953931549871457, 67265.770927008700853,
        33430.575583588128105, 2509.0809287301226727]
B[:] = [1.0, 42.313330701600911252, 687.1870074920579083,
        5394.1960214247511077, 21213.794301586595867, 39307.89580009271061,
        28729.085735721942674, 5226.495278852545925]
C[:] = [1.42343711074968357734, 4.6303378461565452959, 5.7694972214606914055,
        3.64784832476320460504, 1.27045825245236838258, 0.24178072517745061177,
        0.0227238449892691845833, 7.7454501427834140764e-4]
D[:] = [1.0, 2.05319162663775882187, 1.6763848301838038494,
        0.68976733498510000455, 0.14810397642748007459, 0.0151986665636164571966,
        5.475938084995344946e-4, 1.05075007164441684324e-9]
E[:] = [6.6579046435011037772, 5.4637849111641143699, 1.7848265399172913358,
        0.29656057182850489123, 0.026532189526576123093, 0.0012426609473880784386,
        2.71155556874348757815e-5, 2.01033439929228813265e-7]
F[:] = [1.0, 0.59983220655588793769, 0.13692988092273580531,
        0.0148753612908506148525, 7.868691311456132591e-4, 1.8463183175100546818e-5,
        1.4215117583164458887e-7, 2.04426310338993978564e-15]


cdef inline void _mulhilo(uint64_t a, uint64_t b, uint64_t* hi, uint64_t* lo) noexcept nogil:
    cdef uint64_t al = a & 0xFFFFFFFFULL
    cdef uint64_t ah = a >> 32
    cdef uint64_t bl = b & 0xFFFFFFFFULL
    cdef uint64_t bh = b >> 32
    cdef uint64_t ll = al * bl
    cdef uint64_t lh = al * bh
    cdef uint64_t hl = ah * bl
    cdef uint64_t hh = ah * bh
    cdef uint64_t mid = (ll >> 32) + (lh & 0xFFFFFFFFULL) + (hl & 0xFFFFFFFFULL)
    hi[0] = hh + (lh >> 32) + (hl >> 32) + (mid >> 32)
    lo[0] = a * b


cdef inline uint64_t _philox_word0(uint64_t c0, uint64_t c1, uint64_t c2, uint64_t c3,
                                   uint64_t k0, uint64_t k1) noexcept nogil:
    cdef uint64_t hi0, lo0, hi1, lo1
    cdef int r
    for r in range(10):
        if r:
            k0 += W0
            k1 += W1
        _mulhilo(c0, M0, &hi0, &lo0)
        _mulhilo(c2, M1, &hi1, &lo1)
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
    return c0


cdef inline double _poly(double* c, double r) noexcept nogil:
    cdef double acc = c[7]
    cdef int i
    for i in range(6, -1, -1):
        acc = acc * r + c[i]
    return acc


cdef inline double _ndtri(double p) noexcept nogil:
    cdef double q = p - 0.5
    cdef double r, val
    if fabs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _poly(A, r) / _poly(B, r)
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    r = sqrt(-log(r))
    if r <= 5.0:
        r = r - 1.6
        val = _poly(C, r) / _poly(D, r)
    else:
        r = r - 5.0
        val = _poly(E, r) / _poly(F, r)
    if q < 0.0:
        return -val
    return val


def philox4x64_word0(uint64_t c0, uint64_t c1, uint64_t c2, uint64_t c3,
                     uint64_t k0, uint64_t k1):
    return _philox_word0(c0, c1, c2, c3, k0, k1)


def ndtri(p):
    cdef cnp.ndarray[double, ndim=1] flat = np.ascontiguousarray(p, dtype=np.float64).ravel()
    cdef cnp.ndarray[double, ndim=1] out = np.empty_like(flat)
    cdef Py_ssize_t i, n = flat.shape[0]
    with nogil:
        for i in range(n):
            out[i] = _ndtri(flat[i])
    return out.reshape(np.shape(p))


def normal_block(uint64_t seed, uint64_t path, Py_ssize_t j0, Py_ssize_t j1,
                 Py_ssize_t k0, Py_ssize_t k1):
    cdef Py_ssize_t nk = k1 - k0
    cdef Py_ssize_t nj = j1 - j0
    cdef cnp.ndarray[double, ndim=2] out = np.empty((nk, nj), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t a, b
    cdef uint64_t w
    cdef double u
    with nogil:
        for a in range(nk):
            for b in range(nj):
                w = _philox_word0(<uint64_t>(k0 + a), <uint64_t>(j0 + b), path, 0, seed, 0)
                u = (<double>(w >> 11) + 0.5) * 1.1102230246251565e-16
                ov[a, b] = _ndtri(u)
    return out


def tridiag_solve(lower, diag, upper, rhs):
    cdef double[::1] lo = np.ascontiguousarray(lower, dtype=np.float64)
    cdef double[::1] d = np.ascontiguousarray(diag, dtype=np.float64)
    cdef double[::1] up = np.ascontiguousarray(upper, dtype=np.float64)
    x_arr = np.array(rhs, dtype=np.float64, copy=True, order="C")
    vector = x_arr.ndim == 1
    if vector:
        x_arr = x_arr.reshape(-1, 1)
    cdef double[:, ::1] x = x_arr
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t m = x.shape[1]
    cdef double[::1] cp = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i, c
    cdef double denom
    with nogil:
        cp[0] = up[0] / d[0]
        for c in range(m):
            x[0, c] = x[0, c] / d[0]
        for i in range(1, n):
            denom = d[i] - lo[i] * cp[i - 1]
            cp[i] = up[i] / denom
            for c in range(m):
                x[i, c] = (x[i, c] - lo[i] * x[i - 1, c]) / denom
        for i in range(n - 2, -1, -1):
            for c in range(m):
                x[i, c] = x[i, c] - cp[i] * x[i + 1, c]
    if vector:
        return x_arr[:, 0]
    return x_arr
