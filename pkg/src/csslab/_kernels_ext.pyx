# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot loops; see ``_kernels_py`` for the reference versions."""
import numpy as np
from libc.math cimport log


def volterra_march(double[::1] z, double[::1] c, double[::1] wa, double[::1] wb):
    cdef Py_ssize_t n = z.shape[0], k
    cdef double A = 0.0, B = 0.0, g_prev, h, Ap, Bp, lz, val
    out = np.empty(n)
    ydi = np.empty(n)
    cdef double[::1] I = out
    cdef double[::1] D = ydi
    I[0] = 1.0
    D[0] = 0.0
    g_prev = c[0]
    for k in range(1, n):
        h = z[k] - z[k - 1]
        Ap = A + 0.5 * h * g_prev
        Bp = B + wa[k - 1] * g_prev
        lz = log(z[k])
        val = (1.0 - lz * Ap + Bp) / (1.0 + lz * 0.5 * h * c[k] - wb[k - 1] * c[k])
        I[k] = val
        g_prev = c[k] * val
        A = Ap + 0.5 * h * g_prev
        B = Bp + wb[k - 1] * g_prev
        D[k] = -A
    return out, ydi
