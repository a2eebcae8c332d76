# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels; same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, cos, sin, exp, fabs, M_PI

cnp.import_array()


def window_stats(x, x0, double h, exps, int kernel_code):
    cdef const double[:, ::1] X = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] c = np.ascontiguousarray(x0, dtype=np.float64)
    cdef const cnp.int64_t[:, ::1] E = np.ascontiguousarray(exps, dtype=np.int64)
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], p = E.shape[0]
    cdef Py_ssize_t i, j, a, e
    cdef double k, v, m
    cdef long count = 0
    S_arr = np.zeros(p)
    cdef double[::1] S = S_arr
    t_arr = np.empty(d)
    cdef double[::1] t = t_arr
    with nogil:
        for i in range(n):
            k = 1.0
            for a in range(d):
                t[a] = (X[i, a] - c[a]) / h
                if fabs(t[a]) > 1.0:
                    k = 0.0
                    break
            if k == 0.0:
                continue
            if kernel_code == 1:
                for a in range(d):
                    k *= 0.75 * (1.0 - t[a] * t[a])
            elif kernel_code == 2:
                v = 0.0
                for a in range(d):
                    v += t[a] * t[a]
                k = exp(-0.5 * v)
            if k <= 0.0:
                continue
            count += 1
            for j in range(p):
                m = k
                for a in range(d):
                    for e in range(E[j, a]):
                        m *= t[a]
                S[j] += m
    return int(count), S_arr


def box_muller(u1, u2):
    cdef const double[::1] U1 = np.ascontiguousarray(u1, dtype=np.float64)
    cdef const double[::1] U2 = np.ascontiguousarray(u2, dtype=np.float64)
    cdef Py_ssize_t n = U1.shape[0], i
    cdef double r, a
    out_arr = np.empty(2 * n)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(n):
            r = sqrt(-2.0 * log(U1[i]))
            a = 2.0 * M_PI * U2[i]
            out[2 * i] = r * cos(a)
            out[2 * i + 1] = r * sin(a)
    return out_arr
