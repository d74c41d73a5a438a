import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csslab import _kernels_py
from csslab.grid import EquivariantField, build_grid
from csslab.spectral import (IndexError_, apply_linearized, build_rho, conjugation_identity_residual,
                             ground_state, kernel_bound_ratio, march_volterra, outgoing_green_kernel,
                             outgoing_inverse_apply, repulsive_potential, repulsive_potential_exact,
                             volterra_kernel_exact, volterra_kernel_I, volterra_ode_route)

from conftest import q_exact


def _l2(g, f):
    return float(np.sqrt(2 * np.pi * g.integrate(np.abs(f) ** 2)))


def test_kernel_elements(grid):
    gs = ground_state(grid)
    y = grid.r
    q = gs.q
    lam_q = q + y * grid.diff(q, 1, 0)
    assert _l2(grid, gs.L(lam_q)) < 1e-6
    assert _l2(grid, gs.L(1j * q)) < 1e-6
    assert _l2(grid, gs.A(y * q)) < 1e-6
    assert _l2(grid, gs.H(y * q)) < 1e-5
    assert not np.any(gs.A_adj(np.zeros(grid.n)))


def test_generalized_kernel(grid):
    gs = ground_state(grid)
    y = grid.r
    q = gs.q
    lam_q = q + y * grid.diff(q, 1, 0)
    sel = y < 50
    out = 1j * gs.calL(1j * y**2 * q / 4)
    assert np.max(np.abs(out - lam_q)[sel]) < 1e-5
    rho = build_rho(grid).values
    assert np.max(np.abs(1j * gs.calL(rho) - 1j * q)[sel]) < 1e-4


def test_index_checks(grid):
    f = EquivariantField(grid, np.zeros(grid.n), 0)
    with pytest.raises(IndexError_):
        apply_linearized("A_Q", f)
    with pytest.raises(ValueError):
        apply_linearized("B_Q", f)
    with pytest.raises(IndexError_):
        outgoing_inverse_apply("A_Q", f)
    assert apply_linearized("L_Q", f).m == 1


def test_green_kernel_values():
    assert outgoing_green_kernel("A_Q", 2.0, 1.0) == pytest.approx(0.8, rel=1e-14)
    for op in ("A_Q", "H_Q", "L_Q-real", "L_Q-imag"):
        assert outgoing_green_kernel(op, 1.0, 2.0) == 0.0
    # continuous and zero on the diagonal
    assert outgoing_green_kernel("H_Q", 1.5 + 1e-9, 1.5) == pytest.approx(0.0, abs=1e-8)
    with pytest.raises(ValueError):
        outgoing_green_kernel("X", 2.0, 1.0)


def test_gamma_wronskian(fine_grid):
    grid = fine_grid
    gs = ground_state(grid)
    y = grid.r
    J, Gm = gs.J, gs.gamma
    w = y * (grid.diff(Gm, 1, 1) * J - grid.diff(J, 1, 1) * Gm)
    sel = (y > 0.5) & (y < 20)
    assert np.max(np.abs(w[sel] - 1)) < 1e-8
    pts = np.array([0.3, 2.0, 7.0])
    closed = pts * q_exact(pts) * (pts**2 / 16 - 1 / (16 * pts**2) + np.log(pts) / 4)
    assert np.allclose(gs.gamma_quadrature(pts), closed, rtol=1e-10)


def test_repulsive_potential(grid):
    vt, ydv = repulsive_potential(grid)
    assert grid.origin_value(vt) == pytest.approx(4.0, abs=1e-8)
    assert np.all(vt >= 0)
    assert np.all(ydv >= -1e-8)
    ve, ydve = repulsive_potential_exact(grid.r)
    assert np.max(np.abs(vt - ve)) < 1e-7


def test_conjugation_identity(grid):
    y = grid.r
    yq = y * q_exact(y)
    # the bump must be even in y for phi to be a smooth index-1 profile
    phi = EquivariantField(grid, yq * np.exp(-((y**2 - 4) ** 2) / 8) * (1 + 0.3j), 1)
    assert conjugation_identity_residual(phi) < 1e-6
    assert conjugation_identity_residual(EquivariantField(grid, np.zeros(grid.n), 1)) == 0.0
    assert conjugation_identity_residual(EquivariantField(grid, 0.5 * yq + 0j, 1), relative=False) < 1e-5
    with pytest.raises(IndexError_):
        conjugation_identity_residual(EquivariantField(grid, yq, 0))


def _compact(y, m):
    f = y**m * np.exp(-((y**2 - 4) ** 2) / 8) * (1 + 0.3j)
    return np.where(y < 8, f * (1 - (y / 8) ** 2) ** 4, 0.0)


def test_outgoing_inverses(grid):
    gs = ground_state(grid)
    y = grid.r
    for op, m, fwd in (("A_Q", 2, gs.A), ("H_Q", 1, gs.H), ("L_Q", 1, gs.L)):
        f = _compact(y, m)
        u = outgoing_inverse_apply(op, EquivariantField(grid, f, m))
        assert _l2(grid, fwd(u.values) - f) / _l2(grid, f) < 1e-6


def test_volterra_against_closed_form_and_ode():
    tab = volterra_kernel_I(0.5, 50.0)
    ys = np.array([0.5, 1.0, 3.0, 20.0])
    assert np.allclose(tab(ys), volterra_kernel_exact(ys, 0.5), atol=1e-8)
    I_ode, yd_ode = volterra_ode_route(0.5, ys[1:])
    assert np.allclose(tab(ys[1:]), I_ode, atol=1e-8)
    assert tab(0.5) == pytest.approx(1.0, abs=1e-12)
    assert tab(0.5, derivative=True) == pytest.approx(0.0, abs=1e-12)
    assert tab(0.4) == 0.0
    with pytest.raises(ValueError):
        volterra_kernel_I(2.0, 1.0)


def test_kernel_bound_sample():
    ys = np.geomspace(0.01, 100, 12)
    C = 0.0
    for yp in ys:
        y = ys[ys >= yp]
        C = max(C, np.max(kernel_bound_ratio(volterra_kernel_exact(y, yp), y, yp)))
    assert C <= 10


def test_backends_agree():
    z = 0.3 * np.exp(np.linspace(0, np.log(100), 257))
    from csslab import _kernels

    c = z * q_exact(z) ** 2
    from csslab.spectral import _interval_log_weights

    wa, wb = _interval_log_weights(z)
    a = _kernels.volterra_march(z, c, wa, wb)
    b = _kernels_py.volterra_march(z, c, wa, wb)
    assert np.allclose(a[0], b[0], rtol=1e-13, atol=1e-15)
    assert np.allclose(a[1], b[1], rtol=1e-13, atol=1e-15)


def test_rho_properties(grid):
    gs = ground_state(grid)
    y = grid.r
    rho = build_rho(grid).values
    assert np.isrealobj(rho)
    assert _l2(grid, gs.L(rho) - 0.5 * gs.J) < 1e-5
    ratio = np.abs(rho) / (y**2 * gs.q)
    assert np.all(np.isfinite(ratio)) and ratio.max() < 10


@settings(max_examples=15, deadline=None)
@given(st.floats(0.02, 20.0), st.floats(1.01, 50.0))
def test_volterra_closed_form_matches_ode(yp, factor):
    y = yp * factor
    I, _ = volterra_ode_route(yp, [y])
    assert volterra_kernel_exact(y, yp) == pytest.approx(I[0], abs=1e-8)


@settings(max_examples=15, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_adjoint_pairings_hold(a, c):
    g = build_grid(100.0, 512, 512, 10.0)
    gs = ground_state(g)
    y = g.r
    v = _compact(y, 1) * (a + 1j)
    w = _compact(y, 2) * (1 + 1j * c)
    lhs = g.integrate(np.real(np.conj(gs.A(v)) * w))
    rhs = g.integrate(np.real(np.conj(v) * gs.A_adj(w)))
    assert lhs == pytest.approx(rhs, rel=1e-5, abs=1e-9)


def test_pure_python_switch():
    import os
    import subprocess
    import sys

    env = dict(os.environ, CSSLAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from csslab import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
