"""Linearized operators at the ground state and their outgoing inverses.

The background is always ``Q = vortex(y)`` sampled on the supplied grid.
Operator actions reuse the covariant primitives of :mod:`csslab.gauge`.

Outgoing inverses are applied through separable forms of their kernels, so
each application costs a few cumulative quadratures.  For the real part of
``L_Q`` the kernel is ``Q(y)/Q(y') I(y, y')`` where ``I`` solves a Volterra
equation; :func:`volterra_kernel_I` marches that equation directly and the
separable form below is the closed-form solution pair of

    (y d/dy)^2 phi = -y^2 Q^2 phi,   phi_1 = tanh(log y),  phi_2 = log(y) tanh(log y) - 1.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import gauge as G
from .grid import EquivariantField

OPERATORS = {
    # name: (input index, output index)
    "L_Q": (0, 1),
    "L_Q*": (1, 0),
    "A_Q": (1, 2),
    "A_Q*": (2, 1),
    "H_Q": (1, 1),
    "A_QA_Q*": (2, 2),
    "calL_Q": (0, 0),
}


class IndexError_(ValueError):
    """Field carries the wrong equivariance index for an operator."""


class GroundState:
    """Cached background quantities on one grid."""

    def __init__(self, grid):
        self.grid = grid
        y = grid.r
        self.y = y
        self.q = G.vortex(y)
        self.ath = G.a_theta(grid, self.q)
        self.J = y * self.q
        self.log_y = np.log(y)

    # -- operators -----------------------------------------------------------
    def L(self, v):
        return G.lin_bogomolnyi(self.grid, self.q, v, self.ath)

    def L_adj(self, g):
        return G.lin_bogomolnyi_adjoint(self.grid, self.q, g, self.ath)

    def A(self, v):
        return G.cr(self.grid, self.q, v, 1, self.ath)

    def A_adj(self, g):
        return G.cr_adjoint(self.grid, self.q, g, 1, self.ath)

    def H(self, v):
        return self.A_adj(self.A(v))

    def AA_adj(self, g):
        return self.A(self.A_adj(g))

    def calL(self, v):
        return self.L_adj(self.L(v))

    def apply(self, op, v):
        fn = {
            "L_Q": self.L, "L_Q*": self.L_adj, "A_Q": self.A, "A_Q*": self.A_adj,
            "H_Q": self.H, "A_QA_Q*": self.AA_adj, "calL_Q": self.calL,
        }[op]
        return fn(v)

    # -- H_Q kernel data -----------------------------------------------------
    @property
    def gamma(self):
        """Second solution of ``H_Q f = 0`` normalised by ``y W(J, Gamma) = 1``.

        Equals ``J * int_1^y J^-2 dy'/y'``; the integral is elementary.
        """
        y = self.y
        return self.J * (y**2 / 16.0 - 1.0 / (16.0 * y**2) + 0.25 * self.log_y)

    @property
    def a_gamma(self):
        """``A_Q Gamma = 1 / (y J)``."""
        return 1.0 / (self.y * self.J)

    @staticmethod
    def gamma_quadrature(points):
        """``J * int_1^y J^-2 dy'/y'`` by adaptive quadrature at ``points``."""
        from scipy.integrate import quad

        pts = np.atleast_1d(np.asarray(points, dtype=float))
        dens = lambda x: 1.0 / ((x * _q(x)) ** 2 * x)
        vals = np.array([quad(dens, 1.0, p, epsabs=0.0, epsrel=1e-13, limit=200)[0] for p in pts])
        return pts * _q(pts) * vals

    # -- L_Q real kernel data ------------------------------------------------
    def phi_pair(self, y=None):
        """``(phi_1, phi_2, d phi_1/dt, d phi_2/dt)`` with ``t = log y``."""
        y = self.y if y is None else np.asarray(y, dtype=float)
        t = np.log(y)
        th = (y**2 - 1.0) / (y**2 + 1.0)
        sech2 = 4.0 * y**2 / (1.0 + y**2) ** 2
        return th, t * th - 1.0, sech2, th + t * sech2

    # -- outgoing inverses ---------------------------------------------------
    def A_inv(self, f):
        return self.J * self.grid.cumulative(f / self.J, "line")

    def H_inv(self, f):
        grid = self.grid
        gam = self.gamma
        return self.J * grid.cumulative(gam * f, "r") - gam * grid.cumulative(self.J * f, "r")

    def L_inv(self, f):
        """Outgoing right inverse of ``L_Q`` (real and imaginary parts separately)."""
        f = np.asarray(f)
        re = np.real(f)
        im = np.imag(f)
        grid = self.grid
        F = re / self.q
        p1, p2, dp1, dp2 = self.phi_pair()
        phi = p1 * grid.cumulative(dp2 * F, "line") - p2 * grid.cumulative(dp1 * F, "line")
        out = self.q * phi
        if np.any(im != 0.0):
            out = out + 1j * self.q * grid.cumulative(im / self.q, "line")
        return out

    def inverse(self, op, f):
        return {"A_Q": self.A_inv, "H_Q": self.H_inv, "L_Q": self.L_inv}[op](f)


@lru_cache(maxsize=16)
def _ground_state_cached(grid):
    return GroundState(grid)


def ground_state(grid):
    return _ground_state_cached(grid)


# ------------------------------------------------------------------ field-level API
def apply_linearized(op, v: EquivariantField):
    if op not in OPERATORS:
        raise ValueError(f"unknown operator {op!r}")
    m_in, m_out = OPERATORS[op]
    if v.m != m_in:
        raise IndexError_(f"{op} expects index {m_in}, got {v.m}")
    gs = ground_state(v.grid)
    return EquivariantField(v.grid, gs.apply(op, v.values), m_out)


def repulsive_potential(grid):
    """``V~ = (2 + A_theta[Q])^2 + y^2 Q^2`` and ``-y dV~/dy``."""
    gs = ground_state(grid)
    y = grid.r
    vt = (2.0 + gs.ath) ** 2 + (y * gs.q) ** 2
    return vt, -y * grid.diff(vt, 1, 0)


def repulsive_potential_exact(y):
    y = np.asarray(y, dtype=float)
    vt = (4.0 + 8.0 * y**2) / (1.0 + y**2) ** 2
    dv = -16.0 * y**3 / (1.0 + y**2) ** 3
    return vt, -y * dv


def conjugation_identity_residual(phi: EquivariantField, relative=True):
    """``||(i A_Q* A_Q - L_Q i L_Q*) phi||`` for an index-1 field ``phi``.

    With ``relative`` the norm is divided by ``||i A_Q* A_Q phi||`` (returns
    0 when that vanishes identically).
    """
    if phi.m != 1:
        raise IndexError_("conjugation identity acts on index-1 fields")
    gs = ground_state(phi.grid)
    v = phi.values
    lhs = 1j * gs.H(v)
    rhs = gs.L(1j * gs.L_adj(v))
    grid = phi.grid
    num = np.sqrt(grid.integrate(np.abs(lhs - rhs) ** 2) * 2 * np.pi)
    if not relative:
        return float(num)
    den = np.sqrt(grid.integrate(np.abs(lhs) ** 2) * 2 * np.pi)
    return 0.0 if den == 0.0 else float(num / den)


# ------------------------------------------------------------------ kernels
def _q(y):
    return G.vortex(y)


def volterra_kernel_exact(y, yp):
    """Closed form of ``I(y, y')`` (zero for ``y < y'``)."""
    y = np.asarray(y, dtype=float)
    yp = np.asarray(yp, dtype=float)
    t, tau = np.log(y), np.log(yp)
    th_t = np.tanh(t)
    th_tau = np.tanh(tau)
    sech2_tau = 1.0 / np.cosh(tau) ** 2
    val = th_t * (th_tau + tau * sech2_tau) - sech2_tau * (t * th_t - 1.0)
    return np.where(y >= yp, val, 0.0)


def outgoing_green_kernel(op, y, yp, table=None):
    """Kernel ``G(y, y')`` of the outgoing inverse of ``op``.

    ``op`` is ``A_Q``, ``H_Q``, ``L_Q-real`` or ``L_Q-imag``.  For the real
    part of ``L_Q`` a :class:`VolterraTable` for ``y'`` may be passed;
    otherwise the closed-form kernel is used.
    """
    y = np.asarray(y, dtype=float)
    yp = np.asarray(yp, dtype=float)
    mask = y > yp
    if op == "A_Q":
        val = y * _q(y) / (yp * _q(yp))
    elif op == "H_Q":
        J = lambda x: x * _q(x)
        Gm = lambda x: J(x) * (x**2 / 16.0 - 1.0 / (16.0 * x**2) + 0.25 * np.log(x))
        val = yp * (J(y) * Gm(yp) - Gm(y) * J(yp))
    elif op == "L_Q-imag":
        val = _q(y) / _q(yp)
    elif op == "L_Q-real":
        ival = table(y) if table is not None else volterra_kernel_exact(y, yp)
        val = _q(y) / _q(yp) * ival
    else:
        raise ValueError(f"unknown kernel {op!r}")
    out = np.where(mask, val, 0.0)
    return float(out) if out.ndim == 0 else out


# ------------------------------------------------------------------ Volterra marching
@dataclass
class VolterraTable:
    """``I(., y')`` and ``y d_y I(., y')`` on a log-uniform node set above ``y'``."""

    y_prime: float
    z: np.ndarray
    I: np.ndarray
    y_dI: np.ndarray
    steps: int
    history: list = field(default_factory=list)

    def __call__(self, y, derivative=False):
        y = np.asarray(y, dtype=float)
        vals = self.y_dI if derivative else self.I
        if derivative:
            out = np.interp(np.log(np.clip(y, self.z[0], self.z[-1])), np.log(self.z), vals)
        else:
            out = _hermite_log(self.z, self.I, self.y_dI, y)
        return np.where(y >= self.y_prime, out, 0.0)

    def rows(self):
        return [(float(zz), self.y_prime, float(v)) for zz, v in zip(self.z, self.I)]


def _hermite_log(z, f, tdf, y):
    """Cubic Hermite interpolation in ``t = log y`` using ``df/dt``."""
    t_nodes = np.log(z)
    t = np.log(np.clip(y, z[0], z[-1]))
    j = np.clip(np.searchsorted(t_nodes, t) - 1, 0, z.size - 2)
    h = t_nodes[j + 1] - t_nodes[j]
    s = (t - t_nodes[j]) / h
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * f[j] + h10 * h * tdf[j] + h01 * f[j + 1] + h11 * h * tdf[j + 1]


def _interval_log_weights(z):
    """Per-interval weights of ``int phi_a log z`` and ``int phi_b log z`` (hat functions)."""
    a, b = z[:-1], z[1:]
    xg, wg = np.polynomial.legendre.leggauss(6)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * xg[None, :]
    lg = np.log(pts)
    phb = (pts - a[:, None]) / (b - a)[:, None]
    wb = half * np.sum(wg * phb * lg, axis=1)
    wa = half * np.sum(wg * (1.0 - phb) * lg, axis=1)
    return wa, wb


def march_volterra(z, **kw):
    """Product-trapezoid marching of ``I(z_n) = 1 - int_{z_0}^{z_n} c(z) log(z_n/z) I dz``.

    ``c(z) = z Q(z)^2`` and ``I`` is taken piecewise linear between nodes.
    Returns ``(I, y dI/dy)`` at the nodes.
    """
    from ._kernels import volterra_march

    c = z * _q(z) ** 2
    wa, wb = _interval_log_weights(z)
    return volterra_march(np.ascontiguousarray(z), np.ascontiguousarray(c), wa, wb)


def volterra_kernel_I(y_prime, y_max, tol=1e-9, n0=512, max_doublings=14):
    """Tabulate ``I(., y')`` on ``[y', y_max]`` by marching with step doubling.

    The node count doubles until two successive tables differ by at most
    ``tol`` (sup norm at the common nodes).
    """
    if not 0.0 < y_prime < y_max:
        raise ValueError("need 0 < y' < y_max")
    span = np.log(y_max / y_prime)
    n = n0
    prev = None
    history = []
    for _ in range(max_doublings):
        z = y_prime * np.exp(np.linspace(0.0, span, n + 1))
        I, ydI = march_volterra(z)
        if prev is not None:
            diff = float(np.max(np.abs(I[::2] - prev)))
            history.append((n, diff))
            if diff <= tol:
                return VolterraTable(float(y_prime), z, I, ydI, n, history)
        prev = I
        n *= 2
    raise RuntimeError(f"Volterra marching did not reach tol {tol}: history {history}")


def volterra_ode_route(y_prime, y_eval):
    """Independent route: ``(y d_y)^2 I = -y^2 Q^2 I`` with ``I = 1, y d_y I = 0`` at ``y'``."""
    from scipy.integrate import solve_ivp

    y_eval = np.atleast_1d(np.asarray(y_eval, dtype=float))

    def rhs(t, s):
        y = np.exp(t)
        return [s[1], -((y * _q(y)) ** 2) * s[0]]

    t_eval = np.log(y_eval)
    sol = solve_ivp(rhs, (np.log(y_prime), t_eval.max()), [1.0, 0.0], t_eval=t_eval,
                    rtol=1e-12, atol=1e-14, method="DOP853")
    return sol.y[0], sol.y[1]


def kernel_bound_ratio(I_vals, y, yp):
    """``|I| / (1 + <y'>^-2 log(2 + <y>/<y'>))``."""
    jy = np.sqrt(1.0 + np.asarray(y) ** 2)
    jp = np.sqrt(1.0 + np.asarray(yp) ** 2)
    return np.abs(I_vals) / (1.0 + jp**-2 * np.log(2.0 + jy / jp))


def export_kernel_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y", "y_prime", "value"])
        for row in rows:
            w.writerow([repr(float(x)) for x in row])


# ------------------------------------------------------------------ field-level inverses
def outgoing_inverse_apply(op, f: EquivariantField):
    expected = {"A_Q": 2, "H_Q": 1, "L_Q": 1}
    if op not in expected:
        raise ValueError(f"no outgoing inverse for {op!r}")
    if f.m != expected[op]:
        raise IndexError_(f"{op}^-1 expects index {expected[op]}, got {f.m}")
    gs = ground_state(f.grid)
    vals = gs.inverse(op, f.values)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("outgoing quadrature produced non-finite values")
    m_out = {"A_Q": 1, "H_Q": 1, "L_Q": 0}[op]
    return EquivariantField(f.grid, vals, m_out)


_RHO_CACHE = {}


def build_rho(grid):
    """``rho = L_Q^-1 (y Q / 2)``, real and cached per grid."""
    key = grid.grid_hash
    if key not in _RHO_CACHE:
        gs = ground_state(grid)
        rho = np.real(gs.L_inv(0.5 * gs.J))
        _RHO_CACHE[key] = EquivariantField(grid, rho, 0)
    return _RHO_CACHE[key]
