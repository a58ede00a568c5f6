# cython: boundscheck=False, wraparound=False, cdivision=True
"""Hot loops of the time steppers: per-step update of the exponential
history accumulators plus their weighted reduction, fused into one pass
over the (n_exponentials, n_dofs) history array.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def history_update_two_level(
    double[:, ::1] hist,
    const double[::1] decay,
    const double[::1] w1,
    const double[::1] w2,
    const double[::1] u1,
    const double[::1] u2,
    const double[::1] omega,
    double[::1] out,
):
    """hist[i] = decay[i]*hist[i] + w1[i]*u1 + w2[i]*u2; out = sum_i omega[i]*hist[i]."""
    cdef Py_ssize_t m = hist.shape[0]
    cdef Py_ssize_t n = hist.shape[1]
    cdef Py_ssize_t i, j
    cdef double d, a, b, o, h
    for j in range(n):
        out[j] = 0.0
    for i in range(m):
        d = decay[i]
        a = w1[i]
        b = w2[i]
        o = omega[i]
        for j in range(n):
            h = d * hist[i, j] + a * u1[j] + b * u2[j]
            hist[i, j] = h
            out[j] += o * h


def history_update_one_level(
    double[:, ::1] hist,
    const double[::1] decay,
    const double[::1] w,
    const double[::1] v,
    const double[::1] omega,
    double[::1] out,
):
    """hist[i] = decay[i]*hist[i] + w[i]*v; out = sum_i omega[i]*hist[i]."""
    cdef Py_ssize_t m = hist.shape[0]
    cdef Py_ssize_t n = hist.shape[1]
    cdef Py_ssize_t i, j
    cdef double d, a, o, h
    for j in range(n):
        out[j] = 0.0
    for i in range(m):
        d = decay[i]
        a = w[i]
        o = omega[i]
        for j in range(n):
            h = d * hist[i, j] + a * v[j]
            hist[i, j] = h
            out[j] += o * h
