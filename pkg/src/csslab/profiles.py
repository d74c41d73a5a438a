"""Modified blow-up profiles ``P, P1, P2`` and their correction layers."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from . import gauge as G
from . import norms
from .spectral import build_rho, ground_state


# ------------------------------------------------------------------ cutoffs
def _psi(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def cutoff(x):
    """Smooth radial cutoff, 1 on ``[0, 1]`` and 0 on ``[2, inf)``."""
    x = np.asarray(x, dtype=float)
    a = _psi(2.0 - x)
    return a / (a + _psi(x - 1.0))


def chi(y, B):
    return cutoff(np.asarray(y) / B)


# ------------------------------------------------------------------ state
@dataclass(frozen=True)
class ModulationState:
    lam: float = 1.0
    gamma: float = 0.0
    b: float = 0.0
    eta: float = 0.0

    @property
    def B0(self):
        return self.b ** -0.5 if self.b > 0 else np.inf

    @property
    def B1(self):
        return self.b ** -0.5 * abs(np.log(self.b)) if self.b > 0 else np.inf

    @property
    def trapped(self):
        return self.b > 0 and abs(self.eta) <= self.b / abs(np.log(self.b))

    def c_b(self, grid=None):
        return compute_cb(self.b, grid=grid)

    def with_(self, **kw):
        return replace(self, **kw)

    def as_tuple(self):
        return (self.lam, self.gamma, self.b, self.eta)


# ------------------------------------------------------------------ c_b
def _lam_half_yq(y):
    """``Lambda(y Q / 2) = sqrt(8) y / (1 + y^2)^2``."""
    return G.SQRT8 * y / (1.0 + y**2) ** 2


def cb_numerator(grid=None):
    """``(Lambda(yQ/2), yQ/2)_r``; absolutely convergent (integrand ~ y^-3)."""
    if grid is None:
        from scipy.integrate import quad

        f = lambda y: _lam_half_yq(y) * 0.5 * y * G.vortex(y) * y
        return 2 * np.pi * quad(f, 0.0, np.inf, epsabs=0, epsrel=1e-13, limit=400)[0]
    y = grid.r
    dens = _lam_half_yq(y) * 0.5 * y * G.vortex(y)
    return 2 * np.pi * (grid.integrate(dens) + grid.power_tail(dens, "r"))


def cb_denominator(b, cutoff_radius=None, grid=None):
    B = b**-0.5 if cutoff_radius is None else cutoff_radius
    if grid is None:
        from scipy.integrate import quad

        f = lambda y: 0.25 * (y * G.vortex(y)) ** 2 * cutoff(y / B) * y
        total = quad(f, 0.0, 1.0, epsabs=0, epsrel=1e-13)[0]
        total += quad(f, 1.0, B, epsabs=0, epsrel=1e-13, limit=400)[0]
        total += quad(f, B, 2 * B, epsabs=0, epsrel=1e-13, limit=400)[0]
        return 2 * np.pi * total
    if 2 * B > grid.r[-1]:
        raise ValueError(f"cutoff radius {B:.4g} needs r_max >= {2 * B:.4g}")
    y = grid.r
    return 2 * np.pi * grid.integrate(0.25 * (y * G.vortex(y)) ** 2 * chi(y, B))


def compute_cb(b, cutoff_radius=None, grid=None):
    if not 0.0 < b < 1.0:
        raise ValueError("c_b needs 0 < b < 1")
    return cb_numerator(grid) / cb_denominator(b, cutoff_radius, grid)


# ------------------------------------------------------------------ corrections
@dataclass
class Corrections:
    b: float
    c_b: float
    g2: np.ndarray
    T20: np.ndarray
    U2: np.ndarray
    g30: np.ndarray
    U30: np.ndarray


@dataclass
class ProfileSet:
    state: ModulationState
    grid: object
    P: np.ndarray
    P1: np.ndarray
    P2: np.ndarray
    corrections: Corrections
    chi_B0: np.ndarray
    chi_B1: np.ndarray


class ProfileFactory:
    """Builds profiles on one grid; caches corrections by ``b``."""

    def __init__(self, grid, check_extent=True):
        self.grid = grid
        self.gs = ground_state(grid)
        self.rho = build_rho(grid).values
        self.check_extent = check_extent
        self._cache = {}
        self._num = cb_numerator(grid)

    # -- correction profiles -------------------------------------------------
    def corrections(self, b):
        key = float(b)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        grid, gs = self.grid, self.gs
        y = grid.r
        B0 = b**-0.5
        cb = self._num / cb_denominator(b, B0, grid)
        half = 0.5 * gs.J
        g2 = _lam_half_yq(y) - cb * half * chi(y, B0)
        gam = gs.gamma
        # (g2, yQ)_r vanishes, so int_0^y may be traded for -int_y^inf
        jg = gs.J * g2
        tail_jg = grid.tail_integral(jg, "r") + grid.power_tail(jg, "r")
        T20 = gs.J * grid.cumulative(gam * g2, "r") + gam * tail_jg
        U2 = gs.a_gamma * tail_jg
        # line measure, matching the nonlocal term of the w1-equation
        inner = grid.cumulative(gs.q * T20 + y**3 * gs.q**2 / 8.0, "line")
        g30 = y * grid.diff(T20, 1, 1) - inner * half
        U30 = -gs.a_gamma * grid.cumulative(g30 * gs.J, "r")
        out = Corrections(key, cb, g2, T20, U2, g30, U30)
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[key] = out
        return out

    # -- profiles --------------------------------------------------------------
    def assemble(self, state: ModulationState):
        grid, gs = self.grid, self.gs
        y = grid.r
        b, eta = state.b, state.eta
        if b <= 0.0:
            if eta != 0.0:
                raise ValueError("eta != 0 needs b > 0")
            z = np.zeros_like(y, dtype=complex)
            return ProfileSet(state, grid, gs.q.astype(complex), z, z.copy(), None, np.ones_like(y), np.ones_like(y))
        B0, B1 = state.B0, state.B1
        if self.check_extent and 4 * B1 > y[-1]:
            raise ValueError(f"grid r_max={y[-1]:.4g} shorter than 4 B1 = {4 * B1:.4g}")
        c = self.corrections(b)
        c0, c1 = chi(y, B0), chi(y, B1)
        half = 0.5 * gs.J
        P = gs.q + c1 * (-1j * b * y**2 * gs.q / 4.0 - eta * self.rho)
        P1 = c1 * (-(1j * b + eta) * half) + c0 * b**2 * c.T20
        P2 = c0 * ((b**2 - 2j * b * eta - eta**2) * c.U2 + 1j * b**3 * c.U30)
        return ProfileSet(state, grid, P, P1, P2, c, c0, c1)

    def parameter_derivatives(self, state, rel_step=1e-3):
        """Centred differences of ``(P, P1, P2)`` in ``b`` and ``eta``.

        Returns ``(d_b, d_eta)``; each is a triple of arrays.
        """
        h = rel_step * state.b
        pb = self.assemble(state.with_(b=state.b + h))
        mb = self.assemble(state.with_(b=state.b - h))
        pe = self.assemble(state.with_(eta=state.eta + h))
        me = self.assemble(state.with_(eta=state.eta - h))
        db = tuple((getattr(pb, k) - getattr(mb, k)) / (2 * h) for k in ("P", "P1", "P2"))
        de = tuple((getattr(pe, k) - getattr(me, k)) / (2 * h) for k in ("P", "P1", "P2"))
        return db, de

    def modulation_vectors(self, state, rel_step=1e-3):
        ps = self.assemble(state)
        grid = self.grid
        y = grid.r
        db, de = self.parameter_derivatives(state, rel_step)
        out = []
        for k, Pk in enumerate((ps.P, ps.P1, ps.P2)):
            lam = (1.0 + k) * Pk + y * grid.diff(Pk, 1, k)
            out.append((lam, -1j * Pk, -db[k], -de[k]))
        return tuple(out)

    # -- residuals ---------------------------------------------------------------
    def residuals(self, state, rel_step=1e-3):
        """``Psi, Psi1, Psi2`` from the three profile equations.

        The modulation rates cancel against ``Mod . v`` identically, so the
        residuals depend on ``(b, eta)`` only.
        """
        grid = self.grid
        y = grid.r
        ps = self.assemble(state)
        P, P1, P2 = ps.P, ps.P1, ps.P2
        b, eta = state.b, state.eta
        cb = ps.corrections.c_b
        db, de = self.parameter_derivatives(state, rel_step)
        athP = G.a_theta(grid, P)

        lamP = P + y * grid.diff(P, 1, 0)
        lP1 = G.lin_bogomolnyi_adjoint(grid, P, P1, athP)
        ipsi = -(b**2 + eta**2) * db[0] + b * lamP + eta * 1j * P + 1j * lP1

        rate_b = b**2 + eta**2 + cb * (b**2 - eta**2)
        rate_e = 2 * cb * b * eta
        line = grid.cumulative(np.real(np.conj(P) * P1), "line")
        lam1 = 2.0 * P1 + y * grid.diff(P1, 1, 1)
        aP2 = G.cr_adjoint(grid, P, P2, 1, athP)
        ipsi1 = -rate_b * db[1] - rate_e * de[1] + b * lam1 - eta * 1j * P1 + 1j * aP2 - line * 1j * P1

        lam2 = 3.0 * P2 + y * grid.diff(P2, 1, 2)
        aaP2 = G.cr(grid, P, aP2, 1, athP)
        ipsi2 = (-rate_b * db[2] - rate_e * de[2] + b * lam2 - eta * 1j * P2 + 1j * aaP2
                 - line * 1j * P2 - 1j * np.conj(P) * P1**2)
        return -1j * ipsi, -1j * ipsi1, -1j * ipsi2

    def residual_norms(self, state, M=50.0):
        psi, psi1, psi2 = self.residuals(state)
        grid = self.grid
        mask = grid.r <= 2 * M
        return {
            "sup_psi": float(np.max(np.abs(psi[mask]))),
            "x_psi1": norms.x_norm(grid, psi1),
            "h1_2_psi2": norms.h1_2(grid, psi2),
        }

    def compatibility_defects(self, state):
        grid = self.grid
        ps = self.assemble(state)
        athP = G.a_theta(grid, ps.P)
        d1 = G.cr(grid, ps.P, ps.P, 0, athP) - ps.P1
        d2 = G.cr(grid, ps.P, ps.P1, 1, athP) - ps.P2
        return norms.l2(grid, d1), norms.h2_1(grid, d1), norms.h1_2(grid, d2)

    def b3_bracket(self, b):
        """Step-5 bracket ``A_Q Lambda_1 T20 - (Q T20 + y^3 Q^2/8)(yQ/2) - A_Q g30``.

        ``(Q T20 + ...)`` enters ``g30`` through its primitive ``int_0^y (.) dy'``.
        Returns the bracket and ``A_Q Lambda_1 T20`` for scaling.
        """
        grid, gs = self.grid, self.gs
        y = grid.r
        c = self.corrections(b)
        lam1 = y * grid.diff(c.T20, 1, 1)
        a_lam1 = gs.A(lam1)
        prod = (gs.q * c.T20 + y**3 * gs.q**2 / 8.0) * 0.5 * gs.J
        bracket = a_lam1 - prod - gs.A(c.g30)
        return bracket, a_lam1

    def export_csv(self, path, state, M=50.0):
        res = self.residual_norms(state, M)
        defects = self.compatibility_defects(state)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["b", "eta", "M", "grid_hash", "sup_psi", "x_psi1", "h1_2_psi2",
                        "defect_l2", "defect_h2_1", "defect_h1_2"])
            w.writerow([repr(state.b), repr(state.eta), repr(M), self.grid.grid_hash,
                        *(repr(v) for v in res.values()), *(repr(v) for v in defects)])


_FACTORIES = {}


def factory_for(grid):
    key = grid.grid_hash
    if key not in _FACTORIES:
        _FACTORIES[key] = ProfileFactory(grid)
    return _FACTORIES[key]


def build_correction_profiles(b, grid):
    c = factory_for(grid).corrections(b)
    return c.g2, c.T20, c.U2, c.g30, c.U30


def assemble_modified_profiles(state, grid):
    return factory_for(grid).assemble(state)


def modulation_vectors(state, grid):
    return factory_for(grid).modulation_vectors(state)


def profile_equation_residuals(state, grid, M=50.0):
    if state.b > 0 and not state.trapped:
        raise ValueError("profile residuals need |eta| <= b/|log b|")
    return factory_for(grid).residual_norms(state, M)


def compatibility_defects(state, grid):
    return factory_for(grid).compatibility_defects(state)
