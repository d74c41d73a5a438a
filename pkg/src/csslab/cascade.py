"""Nonlinear cascade ``u -> u1 = D_u u -> u2 = A_u u1`` and the renormalized frame."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gauge as G
from .grid import EquivariantField


@dataclass(frozen=True)
class CascadeState:
    u: EquivariantField
    u1: EquivariantField
    u2: EquivariantField

    def compatibility(self):
        """Sup-norm defects of ``u1 = D_u u`` and ``u2 = A_u u1``."""
        grid = self.u.grid
        ath = G.a_theta(grid, self.u.values)
        d1 = G.cr(grid, self.u.values, self.u.values, 0, ath) - self.u1.values
        d2 = G.cr(grid, self.u.values, self.u1.values, 1, ath) - self.u2.values
        return float(np.max(np.abs(d1))), float(np.max(np.abs(d2)))


def cascade_arrays(grid, u, ath=None):
    if ath is None:
        ath = G.a_theta(grid, u)
    u1 = G.cr(grid, u, u, 0, ath)
    return u1, G.cr(grid, u, u1, 1, ath)


def build_cascade(u: EquivariantField) -> CascadeState:
    if u.m != 0:
        raise ValueError("the cascade starts from an index-0 profile")
    u1, u2 = cascade_arrays(u.grid, u.values)
    return CascadeState(u, EquivariantField(u.grid, u1, 1), EquivariantField(u.grid, u2, 2))


# ------------------------------------------------------------------ pullback
def _tail_extension(grid, f, pts):
    """Continue ``f`` past ``r_max`` along a power law fitted on the outer third."""
    r = grid.nodes
    sel = r >= r[-1] / 3.0
    g = np.abs(f[sel])
    if np.all(g > 0) and sel.sum() >= 8:
        slope = np.polyfit(np.log(r[sel]), np.log(g), 1)[0]
    else:
        slope = -np.inf
    ratio = pts / r[-1]
    return f[-1] * (ratio ** slope if np.isfinite(slope) else 0.0)


def pullback(field: EquivariantField, lam, gamma, y_grid, power, kind="pchip"):
    """``lam^power e^{-i gamma} f(lam y)`` on ``y_grid``.

    Returns the values and a flag telling whether the tail policy was used.
    """
    src = field.grid
    pts = lam * y_grid.r
    vals = src.interpolate(field.values, pts, field.m, kind=kind)
    vals = np.asarray(vals, dtype=complex)
    out = pts > src.nodes[-1]
    if np.any(out):
        vals[out] = _tail_extension(src, np.asarray(field.values, dtype=complex), pts[out])
    return lam**power * np.exp(-1j * gamma) * vals, bool(np.any(out))


@dataclass
class RenormalizedFrame:
    s: float
    y_grid: object
    w: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    lambda_s_over_lambda: float = 0.0
    gamma_s: float = 0.0
    gamma_tilde_s: float = field(default=None)
    lam: float = 1.0
    gamma: float = 0.0
    tail_used: bool = False

    def __post_init__(self):
        if self.gamma_tilde_s is None:
            self.gamma_tilde_s = self.gamma_s + nonlocal_phase(self.y_grid, self.w, self.w1)

    def fields(self):
        g = self.y_grid
        return (EquivariantField(g, self.w, 0), EquivariantField(g, self.w1, 1), EquivariantField(g, self.w2, 2))

    def to_csv(self, path):
        self.fields()[0].to_csv(path, extra={"s": self.s, "lambda": self.lam, "gamma": self.gamma})


def nonlocal_phase(grid, w, w1):
    """``int_0^inf Re(conj(w) w1) dy`` (line measure)."""
    dens = np.real(np.conj(w) * w1)
    return float(grid.integrate(dens, "line") + grid.power_tail(dens, "line"))


def renormalize_frame(u: EquivariantField, lam, gamma, y_grid=None, s=0.0, kind="pchip",
                      lambda_s_over_lambda=0.0, gamma_s=0.0) -> RenormalizedFrame:
    if lam <= 0:
        raise ValueError("lambda must be positive")
    y_grid = u.grid if y_grid is None else y_grid
    c = build_cascade(u)
    w, t0 = pullback(c.u, lam, gamma, y_grid, 1, kind)
    w1, t1 = pullback(c.u1, lam, gamma, y_grid, 2, kind)
    w2, t2 = pullback(c.u2, lam, gamma, y_grid, 3, kind)
    return RenormalizedFrame(s, y_grid, w, w1, w2, lambda_s_over_lambda, gamma_s,
                             lam=lam, gamma=gamma, tail_used=t0 or t1 or t2)


# ------------------------------------------------------------------ residuals
def _lam_sigma(grid, f, sigma, m):
    return (1.0 - sigma) * f + grid.r * grid.diff(f, 1, m)


def cascade_equation_residual(frame: RenormalizedFrame, which, ds_field=None, form="tilde"):
    """Left-hand side of the renormalized ``w``, ``w1`` or ``w2`` equation.

    ``ds_field`` is the caller's estimate of the ``s``-derivative of the
    selected variable.  ``form="tail"`` assembles the ``w1``/``w2`` equations
    with ``gamma_s`` and the nonlocal term over ``[y, inf)`` instead.
    """
    if ds_field is None:
        raise ValueError("cascade residual needs an s-derivative estimate")
    grid = frame.y_grid
    w, w1, w2 = frame.w, frame.w1, frame.w2
    a = frame.lambda_s_over_lambda
    ds = ds_field.values if isinstance(ds_field, EquivariantField) else np.asarray(ds_field)
    ath = G.a_theta(grid, w)
    if which == "w":
        return EquivariantField(grid, ds - a * _lam_sigma(grid, w, 0, 0) + 1j * frame.gamma_s * w
                                + 1j * G.lin_bogomolnyi_adjoint(grid, w, w1, ath), 0)
    dens = np.real(np.conj(w) * w1)
    if form == "tilde":
        phase, nl = frame.gamma_tilde_s, -grid.cumulative(dens, "line")
    else:
        phase = frame.gamma_s
        nl = grid.tail_integral(dens, "line") + grid.power_tail(dens, "line")
    if which == "w1":
        lhs = (ds - a * _lam_sigma(grid, w1, -1, 1) + 1j * phase * w1
               + 1j * G.cr_adjoint(grid, w, G.cr(grid, w, w1, 1, ath), 1, ath) + nl * 1j * w1)
        return EquivariantField(grid, lhs, 1)
    if which == "w2":
        lhs = (ds - a * _lam_sigma(grid, w2, -2, 2) + 1j * phase * w2
               + 1j * G.cr(grid, w, G.cr_adjoint(grid, w, w2, 1, ath), 1, ath)
               + nl * 1j * w2 - 1j * np.conj(w) * w1**2)
        return EquivariantField(grid, lhs, 2)
    raise ValueError(f"unknown equation {which!r}")


def central_difference(frames, h):
    """Second-order ``d/ds`` of ``(w, w1, w2)`` at the middle of three frames."""
    a, _, c = frames
    return tuple((getattr(c, k) - getattr(a, k)) / (2.0 * h) for k in ("w", "w1", "w2"))
