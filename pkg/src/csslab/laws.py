"""Formal modulation laws, rate extraction, eta-shooting and the pseudoconformal push."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp

from .dynamics import ParameterTrajectory
from .profiles import ModulationState


class BracketError(ValueError):
    pass


def reference_cb(b):
    """Leading-order closed form ``2 / |log b|`` used by the formal laws by default."""
    return 2.0 / abs(np.log(b))


def quadrature_cb(b_min=1e-14, b_max=0.5, n=200):
    """``c_b`` from the exact quadrature ratio, tabulated in ``log b`` and interpolated."""
    from .profiles import compute_cb

    lb = np.linspace(np.log(b_min), np.log(b_max), n)
    vals = np.array([compute_cb(np.exp(x)) * abs(x) for x in lb])

    def cb(b):
        x = np.log(b)
        return float(np.interp(x, lb, vals)) / abs(x)

    return cb


# ------------------------------------------------------------------ parameter laws
def _rhs_m0(cb):
    def rhs(s, y):
        loglam, gam, b, eta, t = y
        c = cb(b)
        lam2 = np.exp(2 * loglam)
        return [-b, -eta, -b * b - eta * eta - c * (b * b - eta * eta), -2 * c * b * eta, lam2]

    return rhs


def _rhs_m1(m):
    def rhs(s, y):
        loglam, gam, b, eta, t = y
        return [-b, (m + 1) * eta, -b * b - eta * eta, 0.0, np.exp(2 * loglam)]

    return rhs


def integrate_parameter_law(initial: ModulationState, law="m0_log", s_span=(100.0, 1e6), m=1, cb=None,
                            rtol=1e-12, atol=1e-16, n_out=2001, events=None):
    """Adaptive Runge-Kutta integration of the formal law, with ``dt = lam^2 ds``.

    ``m0_log`` is integrated in ``sigma = log s`` (so ``s_span`` must be
    positive); ``m_ge1`` is integrated in ``s`` directly.
    """
    if not initial.b > 0 and law == "m0_log":
        raise ValueError("the m=0 law needs b0 > 0")
    y0 = [np.log(initial.lam), initial.gamma, initial.b, initial.eta, 0.0]
    s0, s1 = s_span
    if law == "m0_log":
        cb = cb or reference_cb
        f = _rhs_m0(cb)
        if s0 <= 0:
            raise ValueError("m0_log integrates in log s; need s0 > 0")

        def g(sig, y):
            s = np.exp(sig)
            return [s * v for v in f(s, y)]

        ts = np.linspace(np.log(s0), np.log(s1), n_out)
        sol = solve_ivp(g, (ts[0], ts[-1]), y0, method="DOP853", t_eval=ts, rtol=rtol, atol=atol,
                        events=events)
        s_out = np.exp(sol.t)
    elif law == "m_ge1":
        f = _rhs_m1(m)
        ts = np.linspace(s0, s1, n_out)
        sol = solve_ivp(f, (s0, s1), y0, method="DOP853", t_eval=ts, rtol=rtol, atol=atol, events=events)
        s_out = sol.t
        cb = lambda b: 0.0
    else:
        raise ValueError(f"unknown law {law!r}")
    if sol.status < 0:
        raise FloatingPointError(f"step-size underflow: {sol.message}")
    traj = ParameterTrajectory(meta={"law": law, "m": m if law == "m_ge1" else 0,
                                     "initial": list(initial.as_tuple()), "s_span": [s0, s1]})
    for k, s in enumerate(s_out):
        loglam, gam, b, eta, t = sol.y[:, k]
        rates = f(s, sol.y[:, k])
        c = cb(b) if b > 0 else 0.0
        gs = (m + 1) * eta if law == "m_ge1" else eta
        gts = rates[1]
        traj.rows.append({"s": float(s), "t": float(t), "lam": float(np.exp(loglam)), "gamma": float(gam),
                          "b": float(b), "eta": float(eta), "lam_s_over_lam": float(rates[0]),
                          "gamma_s": float(gs), "gamma_tilde_s": float(gts), "b_s": float(rates[2]),
                          "eta_s": float(rates[3]), "c_b": float(c), "flags": ""})
    traj.meta["events"] = [list(e) for e in sol.t_events] if events is not None else []
    traj.meta["y_events"] = [e.tolist() for e in sol.y_events] if events is not None else []
    return traj


def rotational_instability(t, eta0, m=1):
    """Explicit ``(b, lam, gamma)`` of the ``m >= 1`` law at fixed ``eta0``."""
    t = np.asarray(t, dtype=float)
    lam = np.sqrt(t**2 + eta0**2)
    gam = np.zeros_like(t) if eta0 == 0 else np.sign(eta0) * (m + 1) * np.arctan(t / abs(eta0))
    return -t, lam, gam


def rotational_run(eta0, t0, t1, m=1, **kw):
    """Integrate the ``m >= 1`` law between lab times ``t0 < t1`` and compare with the explicit solution."""
    if eta0 == 0:
        if t1 >= 0:
            raise ValueError("with eta0 = 0 the solution blows up at t = 0")
        s0, s1 = -1.0 / t0, -1.0 / t1
    else:
        s0, s1 = np.arctan(t0 / abs(eta0)) / abs(eta0), np.arctan(t1 / abs(eta0)) / abs(eta0)
    b0, lam0, gam0 = rotational_instability(t0, eta0, m)
    init = ModulationState(float(lam0), float(gam0), float(b0), eta0)
    traj = integrate_parameter_law(init, "m_ge1", (s0, s1), m=m, rtol=kw.pop("rtol", 1e-13), atol=kw.pop("atol", 1e-20), **kw)
    t = t0 + traj.column("t")
    b, lam, gam = rotational_instability(t, eta0, m)
    # b is measured on the scale of lam (|b| <= lam along the explicit solution)
    res = max(np.max(np.abs(traj.column("lam") - lam) / lam), np.max(np.abs(traj.column("b") - b) / lam),
              np.max(np.abs(traj.column("gamma") - gam)))
    swing = traj.rows[-1]["gamma"] - traj.rows[0]["gamma"]
    return {"trajectory": traj, "t": t, "residual": float(res), "phase_swing": float(swing)}


# ------------------------------------------------------------------ residual series
def modulation_residual_series(traj: ParameterTrajectory):
    b, eta = traj.column("b"), traj.column("eta")
    cb = traj.column("c_b")
    return {
        "s": traj.column("s"),
        "scale": traj.column("lam_s_over_lam") + b,
        "phase": traj.column("gamma_s") - eta,
        "phase_tilde": traj.column("gamma_tilde_s") + eta,
        "b": traj.column("b_s") + b**2 + eta**2 + cb * (b**2 - eta**2),
        "eta": traj.column("eta_s") + 2 * cb * b * eta,
    }


def fit_exponent(x, y):
    """Slope of ``log |y|`` against ``log x`` (points with ``y == 0`` dropped)."""
    x, y = np.asarray(x, float), np.abs(np.asarray(y, float))
    ok = (y > 0) & (x > 0)
    if ok.sum() < 2:
        return np.nan
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


# ------------------------------------------------------------------ blow-up rate
@dataclass
class RateReport:
    T: float
    ell: float
    flatness: float
    lam_flatness: float
    b_ratio: float
    b_flatness: float
    exponent: float
    log_power: float
    window: tuple = field(default_factory=tuple)

    def as_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else float(v)) for k, v in self.__dict__.items()}


def _flat(v):
    v = np.asarray(v, float)
    return float((v.max() - v.min()) / abs(v.mean()))


def time_to_blowup(traj: ParameterTrajectory):
    """``T`` and ``T - t(s) = int_s^inf lam^2 ds'`` at every sample.

    The remaining time is accumulated backwards from the last sample (so it
    keeps full relative precision when ``T - t`` is far below ``T``); beyond
    the last sample ``lam^2 ~ s^-p`` with ``p = 2 b s``.
    """
    s, t, lam, b = (traj.column(k) for k in ("s", "t", "lam", "b"))
    p = 2 * b[-1] * s[-1]
    tail = lam[-1] ** 2 * s[-1] / (p - 1.0) if p > 1.0 else np.inf
    # Simpson in log s on lam^2 s, accumulated from the far end
    f = lam**2 * s
    sig = np.log(s)
    back = cumulative_simpson(f[::-1], x=-sig[::-1], initial=0.0)
    rest = tail + back[::-1]
    return t[-1] + tail, rest


def extract_blowup_rate(traj: ParameterTrajectory, decade=10.0, log_rate=True):
    s, lam, b = traj.column("s"), traj.column("lam"), traj.column("b")
    T, rest = time_to_blowup(traj)
    if not np.isfinite(T):
        raise ValueError("no blow-up plateau detected (lam^2 not integrable)")
    win = s >= s[-1] / decade
    if win.sum() < 4:
        raise ValueError("final decade has too few samples")
    lr = np.abs(np.log(rest[win]))
    # free fit log lam = c + p log(T - t) + q log|log(T - t)|
    A = np.column_stack([np.ones(win.sum()), np.log(rest[win]), np.log(lr)])
    coef = np.linalg.lstsq(A, np.log(lam[win]), rcond=None)[0]
    if log_rate:
        ell_series = b[win] * np.log(b[win]) ** 2 / lam[win]
        lam_check = lam[win] * lr**2 / rest[win]
        b_check = b[win] * lr**4 / rest[win]
    else:
        ell_series = b[win] / lam[win]
        lam_check = lam[win] / rest[win]
        b_check = b[win] / rest[win]
    ell = float(ell_series[-1])
    return RateReport(float(T), ell, _flat(ell_series), _flat(lam_check), float(b_check[-1] / ell**2),
                      _flat(b_check), float(coef[1]), float(coef[2]), (float(s[win][0]), float(s[-1])))


# ------------------------------------------------------------------ eta shooting
def ode_exit_runner(b0, s_max=1e12, cb=None):
    """Run the ``m = 0`` law from ``(b0, eta0)``; report the sign of ``eta`` on leaving ``|eta| <= b/|log b|``."""
    def run(eta0):
        if eta0 == 0.0:
            return 0, np.inf
        def leave(sig, y):
            b, eta = y[2], y[3]
            return abs(eta) * abs(np.log(b)) / b - 1.0
        leave.terminal = True
        init = ModulationState(1.0, 0.0, b0, eta0)
        tr = integrate_parameter_law(init, "m0_log", (1.0 / b0, s_max), cb=cb, rtol=1e-10, atol=1e-30,
                                     n_out=2, events=leave)
        ev = tr.meta["y_events"][0]
        if ev:
            return int(np.sign(ev[0][3])), float(np.exp(tr.meta["events"][0][0]))
        return int(np.sign(tr.rows[-1]["eta"])), np.inf
    return run


def eta_shooting(b0, bracket=None, budget=40, runner=None, resolution=0.0):
    """Bisection on the exit sign of ``eta``.

    Returns ``(eta_hat, log)``; each log entry is ``(lo, hi, mid, sign, exit_s)``.
    """
    L = abs(np.log(b0))
    if bracket is None:
        bracket = (-0.2 * b0 / L, 0.2 * b0 / L)
    lo, hi = bracket
    if not (-0.5 * b0 / L <= lo < hi <= 0.5 * b0 / L):
        raise BracketError("bracket must sit inside (-b0/(2|log b0|), b0/(2|log b0|))")
    runner = runner or ode_exit_runner(b0)
    s_lo, e_lo = runner(lo)
    s_hi, e_hi = runner(hi)
    log = [(lo, hi, lo, s_lo, e_lo), (lo, hi, hi, s_hi, e_hi)]
    if s_lo == s_hi or s_lo == 0 or s_hi == 0:
        raise BracketError(f"bracket endpoints exit with signs {s_lo}, {s_hi}")
    for _ in range(budget):
        if hi - lo <= resolution:
            break
        mid = 0.5 * (lo + hi)
        sg, ex = runner(mid)
        log.append((lo, hi, mid, sg, ex))
        if sg == 0:
            lo = hi = mid
            break
        if sg == s_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), log


def pde_exit_runner(b0, config=None, grid=None):
    """Exit-sign runner driven by the renormalized PDE evolution from ``P(b0, eta0)``.

    A run that is still trapped at ``config.s_max`` reports the sign of
    ``eta`` there.
    """
    from .dynamics import RenormalizedEvolution, SolverConfig
    from .grid import EquivariantField
    from .profiles import ProfileFactory

    cfg = config or SolverConfig(b_end=0.0, s_max=5.0)
    grid = grid or cfg.grid()

    def run(eta0):
        P = ProfileFactory(grid, check_extent=False).assemble(ModulationState(1.0, 0.0, b0, eta0)).P
        exit_s = [np.inf]

        def stop(row):
            if abs(row["eta"]) >= row["b"] / abs(np.log(row["b"])):
                exit_s[0] = row["s"]
                return True
            return False

        tr = RenormalizedEvolution(cfg, grid).run(EquivariantField(grid, P, 0), callback=stop)
        return int(np.sign(tr.rows[-1]["eta"])), exit_s[0]

    return run


# ------------------------------------------------------------------ pseudoconformal
def pseudoconformal_field(u, t):
    """``(1/t) e^{i r^2/(4t)} u(r/t)``: the snapshot at time ``-1/t`` of the transformed flow."""
    from .gauge import apply_symmetry

    return apply_symmetry(u, "pseudoconformal", t)


def pseudoconformal_inverse(v, t):
    """Undo :func:`pseudoconformal_field` with parameter ``t``.

    Two transforms with parameters ``t`` and ``-1/t`` compose to
    ``u -> -u(-x)``, i.e. ``(-1)^(m+1)`` on an index-``m`` profile.
    """
    w = pseudoconformal_field(v, -1.0 / t)
    return w.with_values((-1) ** (v.m + 1) * w.values)


def pseudoconformal_push(traj: ParameterTrajectory, decade=10.0):
    """Scale history ``lam_inf(tau) = lam(t)/(T - t)`` at ``tau = 1/(T - t)`` and its flatness."""
    T, rest = time_to_blowup(traj)
    lam = traj.column("lam")
    s = traj.column("s")
    tau = 1.0 / rest
    lam_inf = lam / rest
    win = s >= s[-1] / decade
    prod = lam_inf[win] * np.log(tau[win]) ** 2
    return {"tau": tau, "lam_inf": lam_inf, "flatness": _flat(prod), "limit": float(prod[-1]), "T": T}
