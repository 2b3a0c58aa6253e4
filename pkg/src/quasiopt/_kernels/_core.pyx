# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled reduction kernels: row-wise segment sums of squares.

Single pass per row, serial accumulation per segment.
"""

import numpy as np


def segment_sq_sums(const double[:, ::1] values, const long long[::1] bounds):
    cdef Py_ssize_t n_rows = values.shape[0]
    cdef Py_ssize_t n_seg = bounds.shape[0] - 1
    out = np.empty((n_rows, n_seg), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, s, j
    cdef double acc, v
    for i in range(n_rows):
        for s in range(n_seg):
            acc = 0.0
            for j in range(bounds[s], bounds[s + 1]):
                v = values[i, j]
                acc += v * v
            o[i, s] = acc
    return out


def segment_sq_sums_diff(const double[:, ::1] a, const double[:, ::1] b,
                         const long long[::1] bounds):
    cdef Py_ssize_t n_rows = a.shape[0]
    cdef Py_ssize_t n_seg = bounds.shape[0] - 1
    out = np.empty((n_rows, n_seg), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, s, j
    cdef double acc, d
    for i in range(n_rows):
        for s in range(n_seg):
            acc = 0.0
            for j in range(bounds[s], bounds[s + 1]):
                d = a[i, j] - b[i, j]
                acc += d * d
            o[i, s] = acc
    return out
