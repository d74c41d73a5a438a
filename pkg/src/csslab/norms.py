"""Adapted Sobolev-type norms and the weighted inequality suites.

All ``L^2`` norms are over the plane: ``||f||^2 = 2 pi int |f|^2 r dr``.
"""
from __future__ import annotations

import numpy as np

from .grid import EquivariantField, build_grid

NORM_INDEX = {"l2": None, "h1_0": 0, "h1_2": 2, "h2_1": 1, "h3_0": 0, "x": None}


def _jb(x):
    return np.sqrt(1.0 + x**2)


def _l2(grid, f):
    return float(np.sqrt(2.0 * np.pi * grid.integrate(np.abs(f) ** 2)))


def l2(grid, v):
    return _l2(grid, v)


def h1_0(grid, v):
    r = grid.r
    logr = np.log(r)
    return _l2(grid, grid.diff(v, 1, 0)) + _l2(grid, v / (r * _jb(np.maximum(-logr, 0.0))))


def h1_2(grid, v):
    r = grid.r
    logr = np.log(r)
    return _l2(grid, grid.diff(v, 1, 2)) + _l2(grid, v / (r * _jb(np.maximum(logr, 0.0))))


def h2_1(grid, v):
    r = grid.r
    logr = np.log(r)
    d1 = grid.diff(v, 1, 1)
    semi = np.maximum(np.abs(d1), np.abs(v) / r)
    return _l2(grid, grid.diff(v, 2, 1)) + _l2(grid, semi / (r * _jb(logr)))


def h3_0(grid, v):
    r = grid.r
    logr = np.log(r)
    d1 = grid.diff(v, 1, 0)
    d2 = grid.diff(v, 2, 0)
    semi = np.maximum(np.abs(d2), np.abs(d1) / r)
    return (
        _l2(grid, grid.diff(v, 3, 0))
        + _l2(grid, semi / (r * _jb(logr)))
        + _l2(grid, v / (r * _jb(r) ** 2 * _jb(logr)))
    )


def x_norm(grid, v):
    r = grid.r
    return _l2(grid, _jb(np.maximum(np.log(r), 0.0)) * v / _jb(r) ** 2)


_EVAL = {"l2": l2, "h1_0": h1_0, "h1_2": h1_2, "h2_1": h2_1, "h3_0": h3_0, "x": x_norm}


def adapted_norm(f: EquivariantField, which):
    if which not in _EVAL:
        raise ValueError(f"unknown norm {which!r}")
    need = NORM_INDEX[which]
    if need is not None and f.m != need:
        raise ValueError(f"norm {which} expects index {need}, got {f.m}")
    return _EVAL[which](f.grid, f.values)


def norm_report(f: EquivariantField):
    out = {"l2": l2(f.grid, f.values), "x": x_norm(f.grid, f.values)}
    for name, idx in NORM_INDEX.items():
        if idx is not None and idx == f.m:
            out[name] = _EVAL[name](f.grid, f.values)
    return out


def sobolev_h2_1(grid, v):
    """``||(d_rr + d_r/r - 1/r^2) v||`` for an index-1 profile."""
    r = grid.r
    return _l2(grid, grid.diff(v, 2, 1) + grid.diff(v, 1, 1) / r - v / r**2)


def comparison_h2h2(grid, v, window=(0.5, 2.0)):
    """Ratio of the adapted ``H^2_1`` norm to ``Sobolev + ||1_{r~1} v||``."""
    r = grid.r
    loc = np.where((r >= window[0]) & (r <= window[1]), v, 0.0)
    return h2_1(grid, v) / (sobolev_h2_1(grid, v) + _l2(grid, loc))


# ------------------------------------------------------------------ random samples
def smooth_bumps(grid, m, count, rng, decay="compact"):
    """Seeded sample of smooth index-``m`` fields.

    Each field is ``r^m`` times a sum of 1-3 Gaussian bumps in ``r^2`` with
    random centres, widths and phases; ``decay="power"`` adds an algebraic
    tail ``(1 + r^2)^(-p)``.
    """
    r = grid.r
    out = []
    for _ in range(count):
        k = rng.integers(1, 4)
        f = np.zeros_like(r, dtype=complex)
        for _ in range(k):
            c = rng.uniform(0.2, 6.0)
            w = rng.uniform(0.5, 3.0)
            ph = rng.uniform(0, 2 * np.pi)
            f += rng.normal() * np.exp(-((r**2 - c**2) ** 2) / (2 * (w * (1 + c)) ** 2)) * np.exp(1j * ph)
        if decay == "power":
            f += rng.uniform(0.1, 1.0) * (1 + r**2) ** (-rng.uniform(1.5, 3.0))
        out.append(r**m * f)
    return out


# ------------------------------------------------------------------ inequality suite
def _interval_value(grid, f, point, m):
    return abs(grid.evaluate(f, point, 0, m))


def log_hardy_ratio(grid, f, k):
    r = grid.r
    lhs = grid.integrate(np.abs(f / (r ** (k + 1) * _jb(np.log(r)))) ** 2)
    dk = grid.diff(f, 1, k) - k * f / r
    rhs = grid.integrate(np.abs(dk / (r**k * _jb(np.log(r)))) ** 2) + _interval_value(grid, f, 1.0, k) ** 2
    return 0.0 if lhs == 0.0 else float(lhs / rhs)


def weighted_hardy_ratio(grid, f, m, weight="inverse-square"):
    """Hardy inequality with ``phi = r^-2`` (decreasing) or ``phi = r^2`` (increasing)."""
    r = grid.r
    if weight == "inverse-square":
        phi, rdphi = r**-2.0, 2.0 * r**-2.0
        boundary = 0.0  # inner endpoint r_1 -> 0, f degenerate there
    else:
        phi, rdphi = r**2, 2.0 * r**2
        boundary = phi[-1] * abs(f[-1]) ** 2
    lhs = grid.integrate(np.abs(f / r) ** 2 * rdphi)
    rhs = grid.integrate(np.abs(grid.diff(f, 1, m)) ** 2 * phi) + boundary
    return 0.0 if lhs == 0.0 else float(lhs / rhs)


def interpolation2_ratio(grid, v1):
    r = grid.r
    semi = np.maximum(np.abs(grid.diff(v1, 1, 1)), np.abs(v1) / r)
    lhs = _l2(grid, semi)
    rhs = np.sqrt(_l2(grid, v1) * h2_1(grid, v1))
    return 0.0 if lhs == 0.0 else float(lhs / rhs)


def weighted_linf_ratios(grid, v0, v1, v2):
    r = grid.r
    inner = r <= 1.0
    outer = r >= 1.0
    lp = _jb(np.maximum(np.log(r), 0.0))

    def sup(a, mask):
        return float(np.max(np.abs(a[mask]))) if np.any(mask) else 0.0

    def ratio(a, b):
        return 0.0 if a == 0.0 else a / b

    d1v = grid.diff(v0, 1, 0)
    d2v = grid.diff(v0, 2, 0)
    semi_v_m2 = np.maximum.reduce([np.abs(d2v), np.abs(d1v) / r, np.abs(v0) / r**2])
    semi_v1_m1 = np.maximum(np.abs(grid.diff(v1, 1, 1)), np.abs(v1) / r)
    return {
        "inner_v_h3": ratio(sup(v0, inner), h3_0(grid, v0)),
        "inner_v1_h2": ratio(sup(v1, inner), h2_1(grid, v1)),
        "inner_v2_h1": ratio(sup(v2, inner), h1_2(grid, v2)),
        "outer_v_h1": ratio(sup(v0, outer), h1_0(grid, v0)),
        "outer_v_h3": ratio(sup(semi_v_m2 / lp, outer), h3_0(grid, v0)),
        "outer_v1_interp": ratio(sup(v1, outer), np.sqrt(_l2(grid, v1) * h2_1(grid, v1))),
        "outer_v1_h2": ratio(sup(semi_v1_m1 / lp, outer), h2_1(grid, v1)),
        "outer_v2_h1": ratio(sup(v2 / lp, outer), h1_2(grid, v2)),
    }


def inequality_suite(grid, seed=0, count=12):
    """Worst-case ratios ``LHS/RHS`` over a seeded sample of smooth fields."""
    rng = np.random.default_rng(seed)
    s0 = smooth_bumps(grid, 0, count, rng)
    s1 = smooth_bumps(grid, 1, count, rng)
    s2 = smooth_bumps(grid, 2, count, rng)
    report = {
        "log_hardy_k0": max(log_hardy_ratio(grid, f, 0) for f in s0),
        "log_hardy_k1": max(log_hardy_ratio(grid, f, 1) for f in s1),
        "log_hardy_k2": max(log_hardy_ratio(grid, f, 2) for f in s2),
        "weighted_hardy_inv_sq": max(weighted_hardy_ratio(grid, f, 2, "inverse-square") for f in s2),
        "weighted_hardy_sq": max(weighted_hardy_ratio(grid, f, 0, "square") for f in s0),
        "interpolation_2": max(interpolation2_ratio(grid, f) for f in s1),
        "comparison_h2h2_max": max(comparison_h2h2(grid, f) for f in s1),
        "comparison_h2h2_min": min(comparison_h2h2(grid, f) for f in s1),
    }
    linf = [weighted_linf_ratios(grid, a, b, c) for a, b, c in zip(s0, s1, s2)]
    for key in linf[0]:
        report["linf_" + key] = max(d[key] for d in linf)
    return report


def counterexample_family(N, grid=None, cutoff=None):
    """``v = r * sum_{n=1}^N chi(r / 2^n)`` and its two ``H^2_1`` norms."""
    from .profiles import cutoff as default_cutoff

    chi = default_cutoff if cutoff is None else cutoff
    if grid is None:
        grid = build_grid(r_max=2.0 ** (N + 2), n_inner=2048, n_outer=max(2048, 256 * N), r_inner=4.0)
    r = grid.r
    v = r * sum(chi(r / 2.0**n) for n in range(1, N + 1))
    return {"N": N, "adapted": h2_1(grid, v), "sobolev": sobolev_h2_1(grid, v),
            "ratio": h2_1(grid, v) / sobolev_h2_1(grid, v)}
