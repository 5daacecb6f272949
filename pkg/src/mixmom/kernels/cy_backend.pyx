# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of the numpy normal-equation kernels.

Streams the p data columns one at a time: per column it forms the deflated
Gram column at every level, runs the E-recursion in an (order+1) x r scratch
block, and accumulates the weighted combination into the output. No (d, r, p)
deflated copy and no E stacks are ever materialized.
"""

import numpy as np

cimport numpy as cnp

NAME = "cython"


def normal_rhs(double[:, :, ::1] gav, double[:, ::1] pi, double[::1] coeffs,
               object deflate_a=None, object deflate_v=None):
    cdef Py_ssize_t d = gav.shape[0]
    cdef Py_ssize_t r = gav.shape[1]
    cdef Py_ssize_t p = gav.shape[2]
    cdef Py_ssize_t k = pi.shape[1]
    cdef double[:, :, ::1] da = None
    cdef double[:, :, ::1] dv = None
    cdef Py_ssize_t m = 0
    if deflate_a is not None:
        da = np.ascontiguousarray(deflate_a, dtype=np.float64)
        dv = np.ascontiguousarray(deflate_v, dtype=np.float64)
        m = da.shape[1]

    out_arr = np.zeros((r, k))
    cdef double[:, ::1] out = out_arr
    scratch_g = np.empty((d + 1, r))
    scratch_e = np.empty((d + 1, r))
    scratch_w = np.empty(r)
    cdef double[:, ::1] g = scratch_g
    cdef double[:, ::1] e = scratch_e
    cdef double[::1] wcol = scratch_w
    cdef Py_ssize_t j, s, i, q, b, c
    cdef double acc, sign, coef, scale

    for j in range(p):
        for s in range(1, d + 1):
            for q in range(r):
                acc = gav[s - 1, q, j]
                for b in range(m):
                    acc -= da[s - 1, b, q] * dv[s - 1, b, j]
                g[s, q] = acc
        for q in range(r):
            e[0, q] = 1.0
            wcol[q] = 0.0
        for i in range(1, d + 1):
            sign = 1.0
            for q in range(r):
                e[i, q] = 0.0
            for s in range(1, i + 1):
                for q in range(r):
                    e[i, q] += sign * e[i - s, q] * g[s, q]
                sign = -sign
            coef = coeffs[i - 1]
            for q in range(r):
                e[i, q] /= i
                wcol[q] += coef * e[i, q]
        for c in range(k):
            scale = pi[j, c]
            if scale != 0.0:
                for q in range(r):
                    out[q, c] += wcol[q] * scale
    return out_arr
