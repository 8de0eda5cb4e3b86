# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled min-plus kernels over banded storage.

``idx[o, x]`` is the linear index of the grid point feeding ``x`` through
band slot ``o`` and ``W[o, x]`` the matching edge weight.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def minplus_apply(const double[::1] u, const long[:, ::1] idx, const double[:, ::1] W):
    """out[x] = min_o u[idx[o, x]] + W[o, x]."""
    cdef Py_ssize_t n_off = W.shape[0], n = W.shape[1]
    cdef Py_ssize_t o, x
    cdef double val
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] res = out
    with nogil:
        # slot-major so every pass streams one contiguous row of idx and W
        for x in range(n):
            res[x] = u[idx[0, x]] + W[0, x]
        for o in range(1, n_off):
            for x in range(n):
                val = u[idx[o, x]] + W[o, x]
                if val < res[x]:
                    res[x] = val
    return out


def minplus_argmin(const double[::1] u, const long[:, ::1] idx, const double[:, ::1] W):
    """Like ``minplus_apply`` but also returns the winning predecessor.

    Ties go to the smallest predecessor index.
    """
    cdef Py_ssize_t n_off = W.shape[0], n = W.shape[1]
    cdef Py_ssize_t o, x
    cdef long arg, y
    cdef double val
    out = np.empty(n, dtype=np.float64)
    args = np.empty(n, dtype=np.int64)
    cdef double[::1] res = out
    cdef long[::1] a = args
    with nogil:
        for x in range(n):
            res[x] = u[idx[0, x]] + W[0, x]
            a[x] = idx[0, x]
        for o in range(1, n_off):
            for x in range(n):
                y = idx[o, x]
                val = u[y] + W[o, x]
                if val < res[x] or (val == res[x] and y < a[x]):
                    res[x] = val
                    a[x] = y
    return out, args


def karp_table(const long[:, ::1] idx, const double[:, ::1] W, Py_ssize_t steps):
    """D[k, x]: least weight of a k-edge walk ending at x, D[0] = 0."""
    cdef Py_ssize_t n_off = W.shape[0], n = W.shape[1]
    cdef Py_ssize_t k, o, x
    cdef double val
    D = np.empty((steps + 1, n), dtype=np.float64)
    cdef double[:, ::1] d = D
    with nogil:
        for x in range(n):
            d[0, x] = 0.0
        for k in range(1, steps + 1):
            for x in range(n):
                d[k, x] = d[k - 1, idx[0, x]] + W[0, x]
            for o in range(1, n_off):
                for x in range(n):
                    val = d[k - 1, idx[o, x]] + W[o, x]
                    if val < d[k, x]:
                        d[k, x] = val
    return D
