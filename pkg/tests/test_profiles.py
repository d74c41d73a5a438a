import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csslab.profiles import (ModulationState, ProfileFactory, cb_denominator, cb_numerator, chi, compute_cb,
                             cutoff)
from csslab.spectral import build_rho, ground_state

from conftest import q_exact


@pytest.fixture(scope="module")
def factory(grid):
    return ProfileFactory(grid)


def _l2(g, f):
    return float(np.sqrt(2 * np.pi * g.integrate(np.abs(f) ** 2)))


def test_state_scales():
    s = ModulationState(1.0, 0.0, 0.01, 0.0)
    assert s.B1 / s.B0 == pytest.approx(abs(np.log(0.01)), rel=1e-14)
    assert s.trapped
    assert not s.with_(eta=0.01).trapped
    assert not ModulationState().trapped


def test_cutoff_shape():
    x = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 3.0])
    c = cutoff(x)
    assert c[0] == c[1] == c[2] == 1.0
    assert 0 < c[3] < 1 and c[4] == c[5] == 0.0
    assert np.all(np.diff(cutoff(np.linspace(0, 3, 301))) <= 0)


def test_zero_parameters_give_ground_state(grid, factory):
    ps = factory.assemble(ModulationState())
    assert np.array_equal(ps.P, q_exact(grid.r) + 0j)
    assert not np.any(ps.P1) and not np.any(ps.P2)
    assert factory.compatibility_defects(ModulationState())[0] < 1e-6
    with pytest.raises(ValueError):
        factory.assemble(ModulationState(eta=0.01))


def test_profile_mass(grid, factory):
    ps = factory.assemble(ModulationState(1.0, 0.0, 0.01, 0.0))
    assert _l2(grid, ps.P) ** 2 == pytest.approx(8 * np.pi, rel=0.05)


def test_extent_check():
    from csslab.grid import build_grid

    small = ProfileFactory(build_grid(50.0, 256, 256, 10.0))
    with pytest.raises(ValueError):
        small.assemble(ModulationState(1.0, 0.0, 0.01, 0.0))


def test_p2_support(grid, factory):
    st_ = ModulationState(1.0, 0.0, 0.01, 0.001)
    ps = factory.assemble(st_)
    assert not np.any(ps.P2[grid.r > 2 * st_.B0])


def test_parameter_derivatives_near_origin(grid, factory):
    st_ = ModulationState(1.0, 0.0, 0.01, 0.0)
    (dbP, _, _), (deP, deP1, _) = factory.parameter_derivatives(st_)
    y = grid.r
    q = q_exact(y)
    inner = y <= 10.0
    assert np.max(np.abs(dbP + 1j * y**2 * q / 4)[inner]) < 1e-10
    assert np.max(np.abs(deP + build_rho(grid).values)[inner]) < 1e-10
    assert np.max(np.abs(deP1 + chi(y, st_.B1) * 0.5 * y * q)) < 1e-10


def test_cb_numerator_and_denominator(grid):
    assert cb_numerator() == pytest.approx(2 * np.pi, rel=1e-10)
    assert cb_numerator(grid) == pytest.approx(2 * np.pi, rel=1e-3)
    # 16 pi log M + O(1): consecutive differences settle to 16 pi per unit of log M
    d = [cb_denominator(None, np.exp(L)) for L in (10.0, 12.0)]
    assert (d[1] - d[0]) / 2 == pytest.approx(4 * np.pi, rel=1e-3)
    with pytest.raises(ValueError):
        compute_cb(1.5)


def test_cb_log_scaling():
    vals = [compute_cb(b) * abs(np.log(b)) for b in (1e-4, 1e-6, 1e-8)]
    assert all(abs(a / c - 1) < 0.1 for a, c in zip(vals[:-1], vals[1:]))


def test_correction_layers(grid, factory):
    gs = ground_state(grid)
    y = grid.r
    c = factory.corrections(0.01)
    dens = c.g2 * gs.J
    # the algebraic tail beyond r_max is part of the pairing
    assert abs(grid.integrate(dens) + grid.power_tail(dens)) < 1e-6 * grid.integrate(np.abs(dens))
    sel = y < 50
    assert np.max(np.abs(gs.A_adj(c.U2) - c.g2)[sel]) < 1e-5
    near = y <= 1.0
    assert np.all(np.isfinite(c.T20[near] / y[near] ** 3))
    assert np.max(np.abs(c.T20[near] / y[near] ** 3)) < 10
    assert factory.corrections(0.01) is c


def test_residuals_shrink_with_b(grid, factory):
    r = [factory.residual_norms(ModulationState(1.0, 0.0, b, 0.0), M=10.0) for b in (0.02, 0.005)]
    for key in r[0]:
        assert r[1][key] < r[0][key]


def test_compatibility_defects_scale(grid, factory):
    d = [factory.compatibility_defects(ModulationState(1.0, 0.0, b, 0.0)) for b in (0.02, 0.01)]
    assert d[0][0] / d[1][0] == pytest.approx(2.0, rel=0.5)


def test_modulation_vectors_shapes(grid, factory):
    vs = factory.modulation_vectors(ModulationState(1.0, 0.0, 0.01, 0.0))
    assert len(vs) == 3 and all(len(v) == 4 for v in vs)
    _, minus_i_p, _, _ = vs[0]
    assert np.allclose(minus_i_p, -1j * factory.assemble(ModulationState(1.0, 0.0, 0.01, 0.0)).P)


def test_csv_export(tmp_path, factory):
    path = tmp_path / "p.csv"
    factory.export_csv(path, ModulationState(1.0, 0.0, 0.01, 0.0), M=10.0)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("b,eta,M") and len(lines) == 2


@settings(max_examples=10, deadline=None)
@given(st.floats(0.005, 0.04), st.floats(-1, 1))
def test_profile_linear_in_eta(b, frac):
    from csslab.grid import build_grid

    g = build_grid(800.0, 512, 1024, 10.0)
    f = ProfileFactory(g, check_extent=False)
    eta = frac * b / abs(np.log(b))
    p0 = f.assemble(ModulationState(1.0, 0.0, b, 0.0)).P
    p1 = f.assemble(ModulationState(1.0, 0.0, b, eta)).P
    p2 = f.assemble(ModulationState(1.0, 0.0, b, 2 * eta)).P
    assert np.allclose(p2 - p0, 2 * (p1 - p0), atol=1e-13)
