# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: counter-based normals, Black forward pricing and
pathwise weighted reductions. ``_kernels_py`` holds the numpy twins."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, cos, erfc, M_PI
from libc.stdint cimport uint32_t, uint64_t

cnp.import_array()

cdef uint32_t PHILOX_M0 = 0xD2511F53u
cdef uint32_t PHILOX_M1 = 0xCD9E8D57u
cdef uint32_t PHILOX_W0 = 0x9E3779B9u
cdef uint32_t PHILOX_W1 = 0xBB67AE85u
cdef double TWO_M53 = 1.0 / 9007199254740992.0
cdef double SQRT1_2 = 0.7071067811865476


cdef inline void _philox(uint32_t* c, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef int r
    cdef uint64_t p0, p1
    cdef uint32_t hi0, lo0, hi1, lo1
    for r in range(10):
        if r > 0:
            k0 = k0 + PHILOX_W0
            k1 = k1 + PHILOX_W1
        p0 = <uint64_t>PHILOX_M0 * <uint64_t>c[0]
        p1 = <uint64_t>PHILOX_M1 * <uint64_t>c[2]
        hi0 = <uint32_t>(p0 >> 32)
        lo0 = <uint32_t>p0
        hi1 = <uint32_t>(p1 >> 32)
        lo1 = <uint32_t>p1
        c[0] = hi1 ^ c[1] ^ k0
        c[1] = lo1
        c[2] = hi0 ^ c[3] ^ k1
        c[3] = lo0


def philox4x32(cnp.uint32_t[:, ::1] counters, uint32_t k0, uint32_t k1):
    """Raw Philox4x32-10 blocks, one per counter row (used for known-answer tests)."""
    cdef Py_ssize_t n = counters.shape[0], i
    out = np.empty((n, 4), dtype=np.uint32)
    cdef cnp.uint32_t[:, ::1] o = out
    cdef uint32_t c[4]
    with nogil:
        for i in range(n):
            c[0] = counters[i, 0]
            c[1] = counters[i, 1]
            c[2] = counters[i, 2]
            c[3] = counters[i, 3]
            _philox(c, k0, k1)
            o[i, 0] = c[0]
            o[i, 1] = c[1]
            o[i, 2] = c[2]
            o[i, 3] = c[3]
    return out


def philox_normals(uint64_t seed, uint32_t stream, uint64_t path_start,
                   Py_ssize_t n_paths, Py_ssize_t n_steps):
    """Standard normals z[path, step] keyed by (seed, stream, path, step)."""
    out = np.empty((n_paths, n_steps), dtype=np.float64)
    cdef double[:, ::1] z = out
    cdef uint32_t k0 = <uint32_t>(seed & 0xFFFFFFFFu)
    cdef uint32_t k1 = <uint32_t>(seed >> 32)
    cdef uint32_t c[4]
    cdef Py_ssize_t p, k
    cdef uint64_t path
    cdef double u1, u2
    with nogil:
        for p in range(n_paths):
            path = path_start + <uint64_t>p
            for k in range(n_steps):
                c[0] = <uint32_t>k
                c[1] = <uint32_t>(path & 0xFFFFFFFFu)
                c[2] = <uint32_t>(path >> 32)
                c[3] = stream
                _philox(c, k0, k1)
                u1 = ((<uint64_t>(c[0] >> 5)) * 67108864.0 + (c[1] >> 6) + 0.5) * TWO_M53
                u2 = ((<uint64_t>(c[2] >> 5)) * 67108864.0 + (c[3] >> 6) + 0.5) * TWO_M53
                z[p, k] = sqrt(-2.0 * log(u1)) * cos(2.0 * M_PI * u2)
    return out


cdef inline double _ncdf(double x) noexcept nogil:
    return 0.5 * erfc(-x * SQRT1_2)


def black_forward(double[:, ::1] fwd, double strike, double[::1] stdev, bint is_call):
    """Undiscounted Black price per node; stdev[t] is vol*sqrt(time to expiry)."""
    cdef Py_ssize_t n = fwd.shape[0], m = fwd.shape[1], p, t
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double f, s, d1, d2, intrinsic
    with nogil:
        for p in range(n):
            for t in range(m):
                f = fwd[p, t]
                s = stdev[t]
                if s <= 0.0 or f <= 0.0 or strike <= 0.0:
                    intrinsic = f - strike if is_call else strike - f
                    o[p, t] = intrinsic if intrinsic > 0.0 else 0.0
                    continue
                d1 = (log(f / strike) + 0.5 * s * s) / s
                d2 = d1 - s
                if is_call:
                    o[p, t] = f * _ncdf(d1) - strike * _ncdf(d2)
                else:
                    o[p, t] = strike * _ncdf(-d2) - f * _ncdf(-d1)
    return out


def split_weighted_sum(double[:, ::1] x, double[::1] w_pos, double[::1] w_neg):
    """out[p] = sum_t max(x,0)*w_pos[t] + min(x,0)*w_neg[t]."""
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1], p, t
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double acc, v
    with nogil:
        for p in range(n):
            acc = 0.0
            for t in range(m):
                v = x[p, t]
                if v > 0.0:
                    acc = acc + v * w_pos[t]
                elif v < 0.0:
                    acc = acc + v * w_neg[t]
            o[p] = acc
    return out
