"""Crank-Nicolson integration of the radial flow in the lab and renormalized frames."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded

from . import gauge as G
from . import norms
from .cascade import cascade_arrays, nonlocal_phase
from .decomposition import (DecompositionError, bootstrap_check, decomposer_for, modified_energy_F3,
                            pair, DecompositionResult)
from .grid import EquivariantField, build_grid
from .profiles import ModulationState


class PicardError(RuntimeError):
    pass


@dataclass
class SolverConfig:
    frame: str = "renormalized"
    ds: float = 0.01
    picard_iters: int = 3
    picard_max: int = 40
    picard_tol: float = 1e-10
    decomposition_every: int = 20
    y_max: float = 1.0e4
    n_inner: int = 4096
    n_outer: int = 4096
    r_inner: float = 10.0
    M: float = 5.0
    record_every: int = 10
    b_end: float = 0.008
    s_max: float = 100.0
    K: float = 100.0
    b_star: float = 0.05

    def __post_init__(self):
        if self.ds <= 0:
            raise ValueError("ds must be positive")
        if self.picard_tol > 1e-9:
            raise ValueError("picard_tol must be <= 1e-9")
        if self.frame not in ("lab", "renormalized"):
            raise ValueError(f"unknown frame {self.frame!r}")

    def grid(self):
        return build_grid(self.y_max, self.n_inner, self.n_outer, self.r_inner)


# ------------------------------------------------------------------ Crank-Nicolson core
def _banded(A, lower=4, upper=4):
    A = A.tocoo()
    ab = np.zeros((lower + upper + 1, A.shape[0]), dtype=complex)
    ab[upper + A.row - A.col, A.col] = A.data
    return ab


def potential(grid, u, m=0):
    """``(m + A_theta)^2 / r^2 + A_t - |u|^2``."""
    ath = G.a_theta(grid, u)
    return ((m + ath) / grid.r) ** 2 + G.a_t(grid, u, m, ath) - np.abs(u) ** 2


class CNStepper:
    """``(1 + i dt K/2) u_new = (1 - i dt K/2) u_old`` with ``K = -Delta + V(u_mid) + g + i a Lambda``.

    ``V`` is re-evaluated at the midpoint on every Picard sweep.  ``a`` and
    ``g`` are the renormalized-frame rates ``lambda_s/lambda`` and ``gamma_s``
    (zero in the lab frame).
    """

    def __init__(self, grid, m=0, picard_min=3, picard_max=40, tol=1e-10):
        self.grid = grid
        self.m = m
        r = grid.r
        self.lap = (grid.diff_matrix(2, m) + sp.diags(1.0 / r) @ grid.diff_matrix(1, m)).tocsr()
        self.dil = (sp.identity(grid.n) + sp.diags(r) @ grid.diff_matrix(1, m)).tocsr()
        self.eye = sp.identity(grid.n, format="csr", dtype=complex)
        self.picard_min, self.picard_max, self.tol = picard_min, picard_max, tol
        self.last_sweeps = 0

    def operator(self, v, a=0.0, g=0.0):
        return -self.lap + sp.diags(v + g) + 1j * a * self.dil

    def step(self, u, dt, a=0.0, g=0.0, guess=None):
        new = u.copy() if guess is None else guess.copy()
        for k in range(1, self.picard_max + 1):
            K = self.operator(potential(self.grid, 0.5 * (u + new), self.m), a, g)
            rhs = u - 0.5j * dt * (K @ u)
            nn = solve_banded((4, 4), _banded(self.eye + 0.5j * dt * K), rhs, check_finite=False)
            change = float(np.max(np.abs(nn - new)))
            new = nn
            if k >= self.picard_min and change < self.tol:
                self.last_sweeps = k
                return new
        raise PicardError(f"Picard sweeps did not converge (last change {change:.3e})")


def step_lab_frame(u: EquivariantField, dt, stepper=None, **kw):
    stepper = stepper or CNStepper(u.grid, u.m, **kw)
    return u.with_values(stepper.step(np.asarray(u.values, dtype=complex), dt))


def mass_energy(grid, u, m=0):
    f = EquivariantField(grid, u, m)
    return G.conserved_quantities(f)


# ------------------------------------------------------------------ trajectories
TRAJ_COLUMNS = ["s", "t", "lam", "gamma", "b", "eta", "lam_s_over_lam", "gamma_s", "gamma_tilde_s",
                "b_s", "eta_s", "c_b", "mass", "energy", "eps_l2", "eps1_l2", "eps3_l2",
                "F3", "F3_correction", "repulsivity", "flags"]


@dataclass
class ParameterTrajectory:
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    truncated: str = ""

    def column(self, name):
        k = TRAJ_COLUMNS.index(name) if name in TRAJ_COLUMNS else None
        if k is None:
            return np.array([r[name] for r in self.rows])
        return np.array([r.get(name, np.nan) for r in self.rows], dtype=float if name != "flags" else object)

    def __len__(self):
        return len(self.rows)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRAJ_COLUMNS)
            for r in self.rows:
                w.writerow([repr(r[c]) if isinstance(r.get(c), float) else r.get(c, "") for c in TRAJ_COLUMNS])

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump({"meta": self.meta, "truncated": self.truncated, "n_rows": len(self.rows)}, fh,
                      indent=2, sort_keys=True, default=float)


# ------------------------------------------------------------------ dynamic rescaling
class RenormalizedEvolution:
    """Dynamic rescaling with rates fixed by the nonlinear orthogonality system.

    Per step the unknowns ``(a, g, b_new, eta_new)`` are corrected until the
    four nonlinear orthogonality conditions hold for the new frame with
    ``lambda = 1, gamma = 0``, so ``w`` never needs to be re-interpolated.
    A full Newton decomposition every ``decomposition_every`` steps guards
    against drift.
    """

    def __init__(self, config: SolverConfig, grid=None):
        self.cfg = config
        self.grid = grid or config.grid()
        self.dec = decomposer_for(self.grid, config.M)
        self.cn = CNStepper(self.grid, 0, config.picard_iters, config.picard_max, config.picard_tol)
        self.Z = self.dec.vectors("nonlinear")
        self.scales = None

    # residual of the orthogonality system and its linearisation
    def _conditions(self, w, b, eta):
        grid = self.grid
        ps = self.dec.factory.assemble(ModulationState(1.0, 0.0, b, eta))
        eps = w - ps.P
        eps1 = G.cr(grid, w, w, 0) - ps.P1
        Z = self.Z
        return np.array([pair(grid, eps, Z[0]), pair(grid, eps, Z[1]), pair(grid, eps1, Z[2]), pair(grid, eps1, Z[3])])

    def _lin(self, w, dw):
        grid = self.grid
        Z = self.Z
        l = G.lin_bogomolnyi(grid, w, dw)
        return np.array([pair(grid, dw, Z[0]), pair(grid, dw, Z[1]), pair(grid, l, Z[2]), pair(grid, l, Z[3])])

    def _jacobian(self, w, b, eta, ds):
        y = self.grid.r
        lam_w = w + y * self.grid.diff(w, 1, 0)
        cols = [self._lin(w, ds * lam_w), self._lin(w, -1j * ds * w)]
        for k, (db, de) in enumerate(((1e-4 * b, 0.0), (0.0, 1e-4 * b))):
            cp = self._conditions(w, b + db, eta + de)
            cm = self._conditions(w, b - db, eta - de)
            cols.append((cp - cm) / (2e-4 * b))
        return np.array(cols).T

    def diagnostics(self, w, b, eta, lam):
        grid = self.grid
        ps = self.dec.factory.assemble(ModulationState(1.0, 0.0, b, eta))
        w1, w2 = cascade_arrays(grid, w)
        eps, eps1, eps2 = w - ps.P, w1 - ps.P1, w2 - ps.P2
        eps3 = self.dec.gs.A_adj(eps2)
        res = DecompositionResult(ModulationState(lam, 0.0, b, eta), eps, eps1, eps2, eps3,
                                  np.zeros(4), 0, "nonlinear", grid)
        en = modified_energy_F3(grid, eps1, eps2, eps3, b)
        flags = bootstrap_check(res, self.cfg.K, self.cfg.b_star)
        mass = 2 * np.pi * grid.integrate(np.abs(w) ** 2)
        energy = np.pi * grid.integrate(np.abs(w1) ** 2) / lam**2
        return {
            "mass": float(mass), "energy": float(energy), "phase_integral": nonlocal_phase(grid, w, w1),
            "eps_l2": norms.l2(grid, eps), "eps1_l2": norms.l2(grid, eps1), "eps3_l2": norms.l2(grid, eps3),
            "F3": en["F3"], "F3_main": en["main"], "F3_correction": en["correction"],
            "repulsivity": en["repulsivity"], "flags": flags,
        }

    def run(self, u0: EquivariantField, init=None, callback=None):
        cfg, grid = self.cfg, self.grid
        start = self.dec.solve(u0, "nonlinear", init=init)
        st = start.state
        # move into the frame of the first decomposition
        from .cascade import pullback

        w, _ = pullback(u0, st.lam, st.gamma, grid, 1, kind="lagrange")
        lam, gam, b, eta = st.lam, st.gamma, st.b, st.eta
        traj = ParameterTrajectory(meta={"config": asdict(cfg), "grid_hash": grid.grid_hash,
                                         "initial_state": list(st.as_tuple())})
        s = t = 0.0
        ds = cfg.ds
        a, g, bs, es = -b, eta, -b * b, 0.0
        unorm = np.sqrt(grid.integrate(np.abs(w) ** 2))
        self.scales = np.array([unorm * np.sqrt(grid.integrate(np.abs(z) ** 2)) for z in self.Z])
        J = None
        w_prev = None
        step = 0
        self._record(traj, s, t, lam, gam, b, eta, a, g, bs, es, w)
        while b > cfg.b_end and s < cfg.s_max - 1e-12:
            if J is None or step % cfg.decomposition_every == 0:
                J = self._jacobian(w, b, eta, ds)
            x = np.array([a, g, b + ds * bs, eta + ds * es])
            guess = w if w_prev is None else 2 * w - w_prev
            for _ in range(6):
                wn = self.cn.step(w, ds, x[0], x[1], guess)
                R = self._conditions(wn, x[2], x[3])
                if np.max(np.abs(R / self.scales)) < 1e-12:
                    break
                x = x - np.linalg.solve(J, R)
                guess = wn
            else:
                traj.truncated = f"rate projection did not converge at s={s:.4g}"
                break
            a, g = x[0], x[1]
            bs, es = (x[2] - b) / ds, (x[3] - eta) / ds
            lam_mid = lam * np.exp(0.5 * a * ds)
            t += ds * lam_mid**2
            lam *= np.exp(a * ds)
            gam += g * ds
            w_prev, w = w, wn
            b, eta = x[2], x[3]
            s += ds
            step += 1
            if step % cfg.decomposition_every == 0:
                try:
                    chk = self.dec.solve(EquivariantField(grid, w, 0), "nonlinear",
                                         init=ModulationState(1.0, 0.0, b, eta))
                except DecompositionError as exc:
                    traj.truncated = f"decomposition failed at s={s:.4g}: {exc}"
                    break
                c = chk.state
                if abs(c.lam - 1) > 1e-9 or abs(c.gamma) > 1e-9:
                    w, _ = pullback(EquivariantField(grid, w, 0), c.lam, c.gamma, grid, 1, kind="lagrange")
                    lam *= c.lam
                    gam += c.gamma
                    w_prev = None
                b, eta = c.b, c.eta
            if step % cfg.record_every == 0:
                self._record(traj, s, t, lam, gam, b, eta, a, g, bs, es, w)
                if callback is not None and callback(traj.rows[-1]):
                    traj.truncated = f"stopped by callback at s={s:.4g}"
                    break
        if traj.rows[-1]["s"] != s:
            self._record(traj, s, t, lam, gam, b, eta, a, g, bs, es, w)
        self.final_w = w
        return traj

    def _record(self, traj, s, t, lam, gam, b, eta, a, g, bs, es, w):
        d = self.diagnostics(w, b, eta, lam)
        flags = d.pop("flags")
        from .profiles import compute_cb

        row = {"s": s, "t": t, "lam": lam, "gamma": gam, "b": b, "eta": eta, "lam_s_over_lam": a,
               "gamma_s": g, "gamma_tilde_s": g + d.pop("phase_integral"), "b_s": bs, "eta_s": es,
               "c_b": compute_cb(b) if 0 < b < 1 else 0.0, **d,
               "flags": "".join("1" if f else "0" for f in (flags.b_range, flags.eta, flags.eps, flags.eps1, flags.eps3))}
        traj.rows.append({k: (float(v) if isinstance(v, (np.floating, float, int)) and k != "flags" else v)
                          for k, v in row.items()})


def evolve_renormalized(u0: EquivariantField, config: SolverConfig = None, grid=None, init=None):
    """Dynamic-rescaling run from ``u0``; returns ``(trajectory, final w field)``."""
    config = config or SolverConfig()
    grid = grid or config.grid()
    if _is_ground_state(u0):
        return _static_trajectory(u0, config), u0
    ev = RenormalizedEvolution(config, grid)
    traj = ev.run(u0, init)
    return traj, EquivariantField(grid, ev.final_w, 0)


def _is_ground_state(u0):
    """``u0`` is a modulated ``Q`` (zero Bogomol'nyi energy to round-off)."""
    mass, energy = G.conserved_quantities(u0)
    return energy < 1e-12 * max(mass, 1.0)


def _static_trajectory(u0, cfg):
    lam = np.sqrt(8.0) / abs(u0.origin_value())
    gam = float(np.angle(u0.origin_value()))
    traj = ParameterTrajectory(meta={"config": asdict(cfg), "static": True})
    n = int(round(cfg.s_max / cfg.ds))
    mass = G.conserved_quantities(u0)[0]
    for k in range(0, n + 1, cfg.record_every):
        s = k * cfg.ds
        traj.rows.append({"s": s, "t": s * lam**2, "lam": lam, "gamma": gam, "b": 0.0, "eta": 0.0,
                          "lam_s_over_lam": 0.0, "gamma_s": 0.0, "gamma_tilde_s": 0.0, "b_s": 0.0,
                          "eta_s": 0.0, "c_b": 0.0, "mass": mass, "energy": 0.0, "flags": ""})
    return traj


def evolve_lab_frame(u0: EquivariantField, dt, steps, record_every=10, **kw):
    """Plain lab-frame run; returns the final field and ``(t, mass, energy)`` records."""
    st = CNStepper(u0.grid, u0.m, **kw)
    u = np.asarray(u0.values, dtype=complex)
    rec = [(0.0, *mass_energy(u0.grid, u, u0.m))]
    for k in range(1, steps + 1):
        u = st.step(u, dt)
        if k % record_every == 0 or k == steps:
            rec.append((k * dt, *mass_energy(u0.grid, u, u0.m)))
    return u0.with_values(u), rec
