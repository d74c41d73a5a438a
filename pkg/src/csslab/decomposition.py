"""Orthogonality vectors, modulation decompositions and the derived diagnostics.

Pairings ``(f, g)_r`` are ``int Re(conj f g) y dy`` without the ``2 pi``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import gauge as G
from . import norms
from .cascade import cascade_arrays, pullback
from .grid import EquivariantField
from .profiles import ModulationState, ProfileFactory, chi
from .spectral import build_rho, ground_state


class DecompositionError(RuntimeError):
    pass


def pair(grid, f, g):
    return float(grid.integrate(np.real(np.conj(f) * g)))


def _norm(grid, f):
    return float(np.sqrt(grid.integrate(np.abs(f) ** 2)))


@dataclass(frozen=True, eq=False)
class OrthogonalityVectors:
    grid: object
    Z1: np.ndarray
    Z2: np.ndarray
    Z3: np.ndarray
    Z4: np.ndarray
    Z3t: np.ndarray
    Z4t: np.ndarray
    Z3d: np.ndarray
    Z4d: np.ndarray
    M: float
    delta: float
    B_delta: float
    scale: float  # (yQ, yQ chi_M)_r
    scale_delta: float  # (yQ/2, yQ chi_{B_delta})_r

    def rough(self):
        return (self.Z1, self.Z2, self.Z3, self.Z4)


def orthogonality_vectors(grid, M=50.0, delta=0.02, b=None):
    if 2 * M > grid.r[-1]:
        raise ValueError("grid too short for the truncation radius M")
    gs = ground_state(grid)
    y = grid.r
    rho = build_rho(grid).values
    cm = chi(y, M)
    J = gs.J
    yqm = J * cm
    scale = pair(grid, J, yqm)
    y2qm = y * J * cm
    Z4 = gs.L_adj(yqm.astype(complex))
    Z3 = gs.L_adj(1j * yqm)
    Z1 = y2qm - (2 * pair(grid, rho, y2qm) / scale) * Z4
    rm = 1j * rho * cm
    Z2 = rm - (pair(grid, y * J, rho * cm) / (2 * scale)) * Z3
    if b is None:
        B = np.inf
        Z3d = 1j * J.astype(complex)
        Z4d = J.astype(complex)
        sd = np.nan
    else:
        B = b ** -delta
        if 2 * B > y[-1]:
            raise ValueError("grid too short for B_delta")
        cd = chi(y, B)
        Z3d, Z4d = 1j * J * cd, (J * cd).astype(complex)
        sd = pair(grid, 0.5 * J, J * cd)
    return OrthogonalityVectors(grid, Z1, Z2, Z3, Z4, 1j * yqm, yqm.astype(complex), Z3d, Z4d,
                                float(M), float(delta), float(B), scale, sd)


def transversality_matrix(zv: OrthogonalityVectors):
    """Rows: ``Lambda Q, -iQ, i y^2 Q/4, rho``; columns ``Z_1..Z_4``."""
    grid = zv.grid
    gs = ground_state(grid)
    y = grid.r
    lamq = gs.q + y * grid.diff(gs.q, 1, 0)
    rho = build_rho(grid).values
    rows = [lamq, -1j * gs.q, 1j * y**2 * gs.q / 4, rho]
    return np.array([[pair(grid, v, z) for z in zv.rough()] for v in rows])


# ------------------------------------------------------------------ decomposition
@dataclass
class DecompositionResult:
    state: ModulationState
    eps: np.ndarray
    eps1: np.ndarray
    eps2: np.ndarray
    eps3: np.ndarray
    ortho_residuals: np.ndarray
    newton_iters: int
    mode: str
    grid: object = None
    history: list = field(default_factory=list)
    tail_used: bool = False

    def norms(self):
        g = self.grid
        return {
            "eps_l2": norms.l2(g, self.eps),
            "eps1_l2": norms.l2(g, self.eps1),
            "eps3_l2": norms.l2(g, self.eps3),
            "eps_h1_0": norms.h1_0(g, self.eps),
            "eps1_h2_1": norms.h2_1(g, self.eps1),
            "eps_h3_0": norms.h3_0(g, self.eps),
            "eps2_h1_2": norms.h1_2(g, self.eps2),
        }


class Decomposer:
    """Solves the rough or nonlinear orthogonality system on a fixed ``y`` grid."""

    STEPS = (1e-7, 1e-7, 1e-7, 1e-7)

    def __init__(self, grid, M=5.0, delta=0.02):
        self.grid = grid
        self.gs = ground_state(grid)
        self.factory = ProfileFactory(grid, check_extent=False)
        self.zv = orthogonality_vectors(grid, M, delta)
        self.M = M

    def vectors(self, mode):
        zv = self.zv
        if mode == "rough":
            return zv.rough()
        if mode == "nonlinear":
            return (zv.Z1, zv.Z2, zv.Z3t, zv.Z4t)
        raise ValueError(f"unknown mode {mode!r}")

    def fields(self, u, state, need_all=False):
        grid = self.grid
        w, tail = pullback(u, state.lam, state.gamma, grid, 1, kind="lagrange")
        ps = self.factory.assemble(state)
        eps = w - ps.P
        if not need_all:
            return w, ps, eps, tail
        w1, w2 = cascade_arrays(grid, w)
        eps1 = w1 - ps.P1
        eps2 = w2 - ps.P2
        return w, ps, eps, eps1, eps2, self.gs.A_adj(eps2), tail

    def residual(self, u, state, mode):
        grid = self.grid
        Z = self.vectors(mode)
        if mode == "rough":
            _, _, eps, _ = self.fields(u, state)
            vals = [pair(grid, eps, z) for z in Z]
        else:
            w, ps, eps, _ = self.fields(u, state)
            eps1 = G.cr(grid, w, w, 0) - ps.P1
            vals = [pair(grid, eps, Z[0]), pair(grid, eps, Z[1]), pair(grid, eps1, Z[2]), pair(grid, eps1, Z[3])]
        return np.array(vals)

    def initial_guess(self, u):
        """Scale and phase from the origin value, ``b`` from the phase curvature."""
        u0 = u.grid.origin_value(u.values, 0)
        lam = np.sqrt(8.0) / abs(u0)
        gamma = float(np.angle(u0))
        y = u.grid.r
        sel = (y >= 0.5 * lam) & (y <= 2.0 * lam)
        ph = np.unwrap(np.angle(u.values[sel] * np.exp(-1j * gamma)))
        b = -4.0 * np.polyfit((y[sel] / lam) ** 2, ph, 1)[0]
        return ModulationState(float(lam), gamma, float(max(b, 1e-6)), 0.0)

    def solve(self, u, mode="nonlinear", init=None, tol=1e-11, max_iter=50):
        grid = self.grid
        state = self.initial_guess(u) if init is None else init
        unorm = np.sqrt(u.grid.integrate(np.abs(u.values) ** 2))
        scales = np.array([unorm * _norm(grid, z) for z in self.vectors(mode)])

        def F(st):
            return self.residual(u, st, mode) / scales

        def to_state(x):
            return ModulationState(float(x[0]), float(x[1]), float(x[2]), float(x[3]))

        x = np.array(state.as_tuple(), dtype=float)
        r = F(state)
        history = [float(np.max(np.abs(r)))]
        it = 0
        while history[-1] > tol:
            if it >= max_iter:
                raise DecompositionError(f"Newton did not converge in {max_iter} iterations; last residual {history[-1]:.3e}")
            it += 1
            jac = np.empty((4, 4))
            for k in range(4):
                h = self.STEPS[k] * (abs(x[k]) if k in (0, 2, 3) and abs(x[k]) > 0 else 1.0)
                if k == 3:
                    h = self.STEPS[k] * max(abs(x[2]), 1e-6)
                xp = x.copy()
                xp[k] += h
                jac[:, k] = (F(to_state(xp)) - r) / h
            try:
                dx = np.linalg.solve(jac, -r)
            except np.linalg.LinAlgError as exc:
                raise DecompositionError("singular decomposition Jacobian") from exc
            t = 1.0
            while True:
                xn = x + t * dx
                if xn[0] > 0 and xn[2] > 0:
                    rn = F(to_state(xn))
                    if np.max(np.abs(rn)) < history[-1] or t < 1e-3:
                        break
                t *= 0.5
                if t < 1e-4:
                    raise DecompositionError(f"line search failed; last residual {history[-1]:.3e}")
            x, r = xn, rn
            history.append(float(np.max(np.abs(r))))
        state = to_state(x)
        w, ps, eps, eps1, eps2, eps3, tail = self.fields(u, state, need_all=True)
        return DecompositionResult(state, eps, eps1, eps2, eps3, r * scales, it, mode, grid, history, tail)


_DECOMPOSERS = {}


def decomposer_for(grid, M=5.0, delta=0.02):
    key = (grid.grid_hash, float(M), float(delta))
    if key not in _DECOMPOSERS:
        _DECOMPOSERS[key] = Decomposer(grid, M, delta)
    return _DECOMPOSERS[key]


def decompose(u: EquivariantField, mode="nonlinear", init=None, grid=None, M=5.0, delta=0.02, tol=1e-11):
    return decomposer_for(grid or u.grid, M, delta).solve(u, mode, init, tol)


def modulated_profile(state: ModulationState, grid, onto=None):
    """``lam^-1 e^{i gamma} P(r / lam)`` as a field on the scaled grid (or ``onto``)."""
    ps = ProfileFactory(grid, check_extent=False).assemble(state)
    f = EquivariantField(grid.scaled(state.lam), np.exp(1j * state.gamma) * ps.P / state.lam, 0)
    if onto is not None:
        return EquivariantField(onto, f.grid.interpolate(f.values, onto.r, 0, kind="lagrange"), 0)
    return f


def parameter_distance(s1, s2):
    return (abs(np.log(s1.lam / s2.lam)) + abs(np.angle(np.exp(1j * (s1.gamma - s2.gamma))))
            + abs(s1.b - s2.b) + abs(s1.eta - s2.eta))


def decomposition_difference(u, grid=None, M=5.0):
    """``dist(G1(u), G2(u))`` and ``|(eps1, Z3t)| + |(eps1, Z4t)|`` from the rough fit."""
    dec = decomposer_for(grid or u.grid, M)
    r1 = dec.solve(u, "rough")
    r2 = dec.solve(u, "nonlinear", init=r1.state)
    zv = dec.zv
    g = dec.grid
    rhs = abs(pair(g, r1.eps1, zv.Z3t)) + abs(pair(g, r1.eps1, zv.Z4t))
    return parameter_distance(r1.state, r2.state), rhs


def transition_defect(b, grid, M=5.0, eta=0.0):
    """``|(eps1_hat, Z3t)| + |(eps1_hat, Z4t)|`` for ``w = P(b, eta)`` with ``eps_hat = 0``."""
    zv = decomposer_for(grid, M).zv
    ps = ProfileFactory(grid, check_extent=False).assemble(ModulationState(1.0, 0.0, b, eta))
    e1 = G.cr(grid, ps.P, ps.P, 0) - ps.P1
    return abs(pair(grid, e1, zv.Z3t)) + abs(pair(grid, e1, zv.Z4t))


def nonlinear_adapted_derivatives(u: EquivariantField, state: ModulationState, grid=None):
    dec = decomposer_for(grid or u.grid)
    _, _, eps, eps1, eps2, eps3, _ = dec.fields(u, state, need_all=True)
    return eps, eps1, eps2, eps3


# ------------------------------------------------------------------ coercivity
_COERCIVITY = {
    # name: (input index, operator, input norm, output norm)
    "A_Q*": (2, "A_Q*", norms.h1_2, norms.l2),
    "L_Q-H1": (0, "L_Q", norms.h1_0, norms.l2),
    "A_Q-H2": (1, "A_Q", norms.h2_1, norms.h1_2),
    "L_Q-H3": (0, "L_Q", norms.h3_0, norms.h2_1),
}


def _projection_data(grid, name, M):
    gs = ground_state(grid)
    y = grid.r
    if name == "A_Q*":
        return None, None
    if name in ("L_Q-H1", "L_Q-H3"):
        zv = decomposer_for(grid, M).zv
        kern = [gs.q + y * grid.diff(gs.q, 1, 0), 1j * gs.q]
        return kern, [zv.Z1, zv.Z2]
    cm = chi(y, M)
    return [gs.J.astype(complex), 1j * gs.J], [gs.J * cm, 1j * gs.J * cm]


def coercivity_ratio(name, grid, count=16, M=50.0, seed=0):
    """Smallest ``||op v|| / ||v||`` over a seeded sample, after removing kernel directions.

    The projection subtracts a combination of the kernel elements so that
    ``v`` becomes orthogonal to the test vectors; ``op v`` is unchanged.
    """
    if name not in _COERCIVITY:
        raise ValueError(f"unknown coercivity pair {name!r}")
    m, op, n_in, n_out = _COERCIVITY[name]
    gs = ground_state(grid)
    kern, tests = _projection_data(grid, name, M)
    if tests is not None:
        gram = np.array([[pair(grid, k, t) for k in kern] for t in tests])
        if abs(np.linalg.det(gram)) < 1e-12 * np.prod([_norm(grid, t) for t in tests]) ** 2:
            raise ValueError("degenerate pairing matrix")
    rng = np.random.default_rng(seed)
    worst = np.inf
    for v in norms.smooth_bumps(grid, m, count, rng):
        if tests is not None:
            c = np.linalg.solve(gram, [pair(grid, v, t) for t in tests])
            v = v - sum(ci * k for ci, k in zip(c, kern))
        worst = min(worst, n_out(grid, gs.apply(op, v)) / n_in(grid, v))
    return float(worst)


def kernel_witness(grid, a=1.0, c=1.0):
    gs = ground_state(grid)
    y = grid.r
    v = a * (gs.q + y * grid.diff(gs.q, 1, 0)) + c * 1j * gs.q
    return norms.l2(grid, gs.L(v)) / norms.l2(grid, v)


# ------------------------------------------------------------------ refined parameters, energy
def refined_parameters(grid, eps1, b, eta, delta=0.02):
    zv = orthogonality_vectors(grid, 2.0, delta, b) if b > 0 else None
    if zv is None:
        raise ValueError("refined parameters need b > 0")
    d = zv.scale_delta
    return b - pair(grid, eps1, zv.Z3d) / d, eta - pair(grid, eps1, zv.Z4d) / d


def modified_energy_F3(grid, eps1, eps2, eps3, b):
    y = grid.r
    gs = ground_state(grid)
    main = 0.5 * grid.integrate(np.abs(eps3) ** 2)
    corr = b * pair(grid, 1j * eps2, y * gs.q**2 * eps1)
    from .spectral import repulsive_potential_exact

    _, ydv = repulsive_potential_exact(y)  # -y dV/dy
    repuls = grid.integrate(-ydv / y**2 * np.abs(eps2) ** 2)
    return {"F3": float(main - corr), "main": float(main), "correction": float(corr), "repulsivity": float(repuls)}


@dataclass(frozen=True)
class BootstrapVerdict:
    b_range: bool
    eta: bool
    eps: bool
    eps1: bool
    eps3: bool

    @property
    def all(self):
        return self.b_range and self.eta and self.eps and self.eps1 and self.eps3

    def as_dict(self):
        return {"b": self.b_range, "eta": self.eta, "eps": self.eps, "eps1": self.eps1, "eps3": self.eps3, "all": self.all}


def bootstrap_check(result: DecompositionResult, K=100.0, b_star=0.05):
    g = result.grid
    b, eta = result.state.b, result.state.eta
    L = abs(np.log(b)) if 0 < b < 1 else np.inf
    return BootstrapVerdict(
        0 < b < b_star,
        abs(eta) < b / L,
        norms.l2(g, result.eps) < b_star**0.25,
        norms.l2(g, result.eps1) < K * b * L**2,
        norms.l2(g, result.eps3) < K * b**2 / L,
    )


CSV_COLUMNS = ["t", "lam", "gamma", "b", "eta", "eps_l2", "eps1_l2", "eps3_l2", "F3", "flags"]


def result_row(result: DecompositionResult, t=0.0, K=100.0, b_star=0.05):
    g = result.grid
    energy = modified_energy_F3(g, result.eps1, result.eps2, result.eps3, result.state.b)
    v = bootstrap_check(result, K, b_star)
    st = result.state
    flags = "".join("1" if f else "0" for f in (v.b_range, v.eta, v.eps, v.eps1, v.eps3))
    return [t, st.lam, st.gamma, st.b, st.eta, norms.l2(g, result.eps), norms.l2(g, result.eps1),
            norms.l2(g, result.eps3), energy["F3"], flags]


def export_rows(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])
