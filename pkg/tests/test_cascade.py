import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csslab import gauge as G
from csslab.cascade import (build_cascade, cascade_equation_residual, central_difference, nonlocal_phase,
                            renormalize_frame)
from csslab.dynamics import CNStepper
from csslab.grid import EquivariantField, build_grid, l2_norm

from conftest import q_exact


@pytest.fixture(scope="module")
def small():
    return build_grid(200.0, 1024, 1024, 10.0)


def _bump(g):
    return np.exp(-(g.r - 1.0) ** 2) * (1 + 0.5j)


def test_cascade_of_q_vanishes(small):
    c = build_cascade(EquivariantField(small, q_exact(small.r) + 0j, 0))
    assert np.max(np.abs(c.u1.values)) < 1e-5
    assert np.max(np.abs(c.u2.values)) < 1e-4
    assert c.u1.m == 1 and c.u2.m == 2


def test_cascade_of_modulated_q(small):
    lam, gam = 1.7, 0.4
    g = small.scaled(lam)
    c = build_cascade(EquivariantField(g, np.exp(1j * gam) * q_exact(small.r) / lam, 0))
    assert np.max(np.abs(c.u1.values)) < 1e-5


def test_cascade_is_compatible(small):
    c = build_cascade(EquivariantField(small, q_exact(small.r) + 0.1 * _bump(small), 0))
    assert c.compatibility() == (0.0, 0.0)


def test_first_order_in_bump_amplitude(small):
    q = q_exact(small.r)
    n1 = l2_norm(build_cascade(EquivariantField(small, q + 1e-4 * _bump(small), 0)).u1)
    n2 = l2_norm(build_cascade(EquivariantField(small, q + 2e-4 * _bump(small), 0)).u1)
    assert n2 / n1 == pytest.approx(2.0, rel=1e-3)


def test_cascade_rejects_nonzero_index(small):
    with pytest.raises(ValueError):
        build_cascade(EquivariantField(small, _bump(small), 1))


def test_identity_frame(small):
    u = EquivariantField(small, q_exact(small.r) + 0.1 * _bump(small), 0)
    c = build_cascade(u)
    f = renormalize_frame(u, 1.0, 0.0)
    assert np.allclose(f.w, u.values, atol=1e-14)
    assert np.allclose(f.w1, c.u1.values, atol=1e-14)
    assert np.allclose(f.w2, c.u2.values, atol=1e-14)
    with pytest.raises(ValueError):
        renormalize_frame(u, 0.0, 0.0)


def test_matching_scale_recovers_q(small):
    lam = 2.0
    u = EquivariantField(small.scaled(lam), q_exact(small.r) / lam + 0j, 0)
    f = renormalize_frame(u, lam, 0.0, y_grid=small, kind="lagrange")
    assert np.max(np.abs(f.w - q_exact(small.r))) < 1e-12


@settings(max_examples=10, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(-3, 3))
def test_renormalization_preserves_l2(lam, gam):
    g = build_grid(200.0, 512, 512, 10.0)
    u = EquivariantField(g.scaled(lam), np.exp(-g.r**2 / 3) * (1 + 0.1j * g.r) / lam, 0)
    f = renormalize_frame(u, lam, gam, y_grid=g, kind="lagrange")
    assert l2_norm(f.w, g) == pytest.approx(l2_norm(u), rel=1e-10)


def test_nonlocal_phase_uses_line_measure(small):
    y = small.r
    w = np.exp(-y**2)
    w1 = np.exp(-y**2) + 0j
    # int_0^inf e^{-2 y^2} dy
    assert nonlocal_phase(small, w, w1) == pytest.approx(np.sqrt(np.pi / 8), rel=1e-10)


def test_static_residual_vanishes_under_refinement():
    # w2 carries three derivatives of the data, so it converges at second order
    sup = []
    for n in (512, 1024):
        g = build_grid(200.0, n, n, 10.0)
        f = renormalize_frame(EquivariantField(g, q_exact(g.r) + 0j, 0), 1.0, 0.0)
        zero = np.zeros(g.n, dtype=complex)
        sup.append([np.max(np.abs(cascade_equation_residual(f, w, zero).values[g.r < 50])) for w in ("w", "w1", "w2")])
    assert sup[1][0] < 2e-6 and sup[1][1] < 1e-4
    assert all(a / b > 3.5 for a, b in zip(*sup))
    with pytest.raises(ValueError):
        cascade_equation_residual(f, "w")


def test_phase_rotated_static_frame(small):
    # Q e^{-is}: d_s w = -i w is balanced by gamma_s = 1
    q = q_exact(small.r) + 0j
    f = renormalize_frame(EquivariantField(small, q, 0), 1.0, 0.0, gamma_s=1.0)
    r = cascade_equation_residual(f, "w", -1j * q)
    assert np.max(np.abs(r.values[small.r < 50])) < 1e-5


def _frames(g, u0, h):
    st_ = CNStepper(g, 0, tol=1e-13)
    us = [u0]
    for _ in range(2):
        us.append(st_.step(us[-1], h))
    return [renormalize_frame(EquivariantField(g, u, 0), 1.0, 0.0) for u in us]


def test_residual_is_second_order_in_step():
    g = build_grid(60.0, 512, 512, 6.0)
    u0 = 0.8 * np.exp(-g.r**2 / 2) * (1 + 0.3j * g.r**2)
    sup = []
    for h in (2e-3, 1e-3):
        fr = _frames(g, u0, h)
        dw, _, _ = central_difference(fr, h)
        sup.append(np.max(np.abs(cascade_equation_residual(fr[1], "w", dw).values)))
    assert sup[0] / sup[1] == pytest.approx(4.0, rel=0.15)


def test_tilde_and_tail_forms_agree():
    g = build_grid(60.0, 512, 512, 6.0)
    u0 = 0.8 * np.exp(-g.r**2 / 2) * (1 + 0.3j * g.r**2)
    fr = _frames(g, u0, 1e-3)
    d = central_difference(fr, 1e-3)
    for which, ds in (("w1", d[1]), ("w2", d[2])):
        a = cascade_equation_residual(fr[1], which, ds, form="tilde").values
        b = cascade_equation_residual(fr[1], which, ds, form="tail").values
        assert np.max(np.abs(a - b)) < 1e-8 * max(1.0, np.max(np.abs(a)))
