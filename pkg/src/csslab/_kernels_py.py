"""Pure-Python versions of the compiled loops in ``_kernels_ext``."""
import math

import numpy as np


def volterra_march(z, c, wa, wb):
    n = z.shape[0]
    out = np.empty(n)
    ydi = np.empty(n)
    out[0], ydi[0] = 1.0, 0.0
    A = B = 0.0
    g_prev = c[0]
    for k in range(1, n):
        h = z[k] - z[k - 1]
        Ap = A + 0.5 * h * g_prev
        Bp = B + wa[k - 1] * g_prev
        lz = math.log(z[k])
        val = (1.0 - lz * Ap + Bp) / (1.0 + lz * 0.5 * h * c[k] - wb[k - 1] * c[k])
        out[k] = val
        g_prev = c[k] * val
        A = Ap + 0.5 * h * g_prev
        B = Bp + wb[k - 1] * g_prev
        ydi[k] = -A
    return out, ydi
