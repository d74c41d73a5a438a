"""Coulomb-gauge potentials and covariant operators for equivariant profiles.

Array-level helpers take ``(grid, ...)`` explicitly; the field-level
wrappers at the bottom accept :class:`EquivariantField` objects.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import EquivariantField, RadialGrid, integrate_measure, values_of

SQRT8 = np.sqrt(8.0)


def vortex(r, m=0):
    """Explicit static vortex ``sqrt(8)(m+1) r^m / (1 + r^(2m+2))``."""
    r = np.asarray(r, dtype=float)
    return SQRT8 * (m + 1) * r**m / (1.0 + r ** (2 * m + 2))


def a_theta(grid, u):
    """``-1/2 int_0^r |u|^2 r' dr'``."""
    return -0.5 * grid.cumulative(np.abs(u) ** 2, "r")


def a_theta_polar(grid, v, w):
    """Polarised form ``-1/2 int_0^r Re(conj(v) w) r' dr'``."""
    return -0.5 * grid.cumulative(np.real(np.conj(v) * w), "r")


def a_t(grid, u, m=0, ath=None, tail=True):
    """``-int_r^inf (m + A_theta) |u|^2 dr'/r'`` via total minus prefix."""
    if ath is None:
        ath = a_theta(grid, u)
    integrand = (m + ath) * np.abs(u) ** 2 / grid.r
    out = -grid.tail_integral(integrand, "line")
    if tail:
        out = out - grid.power_tail(integrand, "line")
    return out


def cr(grid, v, w, m=0, ath=None):
    """``d_r w - (m + A_theta[v]) w / r``; maps index ``m`` to ``m + 1``."""
    if ath is None:
        ath = a_theta(grid, v)
    return grid.diff(w, 1, m) - (m + ath) * w / grid.r


def cr_adjoint(grid, v, g, m=0, ath=None):
    """Adjoint of :func:`cr`: ``-d_r g - (m + 1 + A_theta[v]) g / r``."""
    if ath is None:
        ath = a_theta(grid, v)
    return -grid.diff(g, 1, m + 1) - (m + 1 + ath) * g / grid.r


def lin_bogomolnyi(grid, v, w, ath=None):
    """Linearised Bogomol'nyi operator ``L_v w = D_v w + v B_v w``."""
    if ath is None:
        ath = a_theta(grid, v)
    return cr(grid, v, w, 0, ath) - 2.0 * a_theta_polar(grid, v, w) * v / grid.r


def lin_bogomolnyi_adjoint(grid, v, g, ath=None, tail=True):
    """``L_v^* g = D_v^* g + v int_r^inf Re(conj(v) g) dr'``."""
    if ath is None:
        ath = a_theta(grid, v)
    dens = np.real(np.conj(v) * g)
    tail = grid.tail_integral(dens, "line") + (grid.power_tail(dens, "line") if tail else 0.0)
    return cr_adjoint(grid, v, g, 0, ath) + v * tail


def bogomolnyi(grid, u, m=0, ath=None):
    return cr(grid, u, u, m, ath)


def hamiltonian_rhs(grid, u, m=0):
    """``-Delta_m u + (m + A_theta)^2 u / r^2 + A_t u - |u|^2 u``.

    ``i d_t u`` equals this expression along the flow.
    """
    r = grid.r
    ath = a_theta(grid, u)
    lap = grid.diff(u, 2, m) + grid.diff(u, 1, m) / r
    return -lap + ((m + ath) / r) ** 2 * u + a_t(grid, u, m, ath) * u - np.abs(u) ** 2 * u


@dataclass(frozen=True)
class GaugePotentials:
    a_theta: np.ndarray
    a_t: np.ndarray
    source_mass: float
    a_t_modified: np.ndarray


def compute_gauge_potentials(u: EquivariantField) -> GaugePotentials:
    grid, vals = u.grid, u.values
    ath = a_theta(grid, vals)
    at = a_t(grid, vals, u.m, ath)
    return GaugePotentials(ath, at, float(integrate_measure(np.abs(vals) ** 2, grid)), at - 0.5 * np.abs(vals) ** 2)


def covariant_cr_derivative(v_background: EquivariantField, w: EquivariantField, m=None):
    m = w.m if m is None else m
    return EquivariantField(w.grid, cr(w.grid, v_background.values, w.values, m), m + 1)


def linearized_bogomolnyi(v: EquivariantField, w: EquivariantField, adjoint=False):
    if adjoint:
        return EquivariantField(w.grid, lin_bogomolnyi_adjoint(w.grid, v.values, w.values), 0)
    return EquivariantField(w.grid, lin_bogomolnyi(w.grid, v.values, w.values), 1)


def conserved_quantities(u: EquivariantField):
    grid, vals = u.grid, u.values
    mass = integrate_measure(np.abs(vals) ** 2, grid)
    energy = 0.5 * integrate_measure(np.abs(bogomolnyi(grid, vals, u.m)) ** 2, grid)
    return float(mass), float(energy)


def virial_functionals(u: EquivariantField):
    grid, vals = u.grid, u.values
    r = grid.r
    dens = r**2 * np.abs(vals) ** 2
    if not np.all(np.isfinite(dens)):
        raise OverflowError("r^2 |u|^2 is not finite on the grid")
    v1 = integrate_measure(dens, grid)
    v2 = integrate_measure(r * np.imag(np.conj(vals) * grid.diff(vals, 1, u.m)), grid)
    return float(v1), float(v2)


def apply_symmetry(u: EquivariantField, kind, param=None, onto=None):
    """Apply a symmetry of the flow.

    ``kind`` is one of ``scale``, ``phase``, ``time-translate`` and
    ``pseudoconformal``.  Scalings return the profile on the rescaled grid
    (exact L2 isometry); pass ``onto`` to interpolate onto another grid.
    """
    grid, vals = u.grid, u.values
    if kind == "phase":
        return u.with_values(np.exp(1j * param) * vals)
    if kind == "time-translate":
        return u
    if kind == "scale":
        lam = float(param)
        new = EquivariantField(grid.scaled(lam), vals / lam, u.m)
    elif kind == "pseudoconformal":
        t = float(param)
        if t == 0.0:
            raise ValueError("pseudoconformal transform needs t != 0")
        lam = abs(t)
        g2 = grid.scaled(lam)
        # (1/t) e^{i r^2/(4t)} u(r/t); for t < 0 the radial reflection is the identity on profiles
        new = EquivariantField(g2, np.sign(t) ** (u.m + 1) * np.exp(1j * g2.r**2 / (4.0 * t)) * vals / lam, u.m)
    else:
        raise ValueError(f"unknown symmetry {kind!r}")
    if onto is not None:
        return EquivariantField(onto, np.nan_to_num(new.grid.interpolate(new.values, onto.r, u.m)), u.m)
    return new
