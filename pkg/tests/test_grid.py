import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csslab.grid import (ConfigurationError, EquivariantField, GridMismatchError, build_grid, differentiate,
                         fornberg_weights, inner_product_real, integrate_measure, l2_norm, pointwise_seminorm)

from conftest import q_exact


def test_quadrature_of_one(grid):
    assert grid.integrate(np.ones(grid.n)) == pytest.approx(400.0**2 / 2, rel=1e-12)


def test_derivative_of_cubic_is_exact(grid):
    r = grid.r
    assert np.max(np.abs(grid.diff(r**3, 1, 1) - 3 * r**2) / (1 + 3 * r**2)) < 1e-9


def test_q_mass_is_8pi(grid):
    q = EquivariantField(grid, q_exact(grid.r), 0)
    # truncated at r_max: 8 pi r_max^2 / (1 + r_max^2)
    assert integrate_measure(np.abs(q.values) ** 2, grid) == pytest.approx(8 * np.pi * 400**2 / (1 + 400**2), rel=1e-9)
    assert l2_norm(q) ** 2 == pytest.approx(8 * np.pi, rel=1e-4)


def test_indicator_integral():
    g = build_grid(4.0, 512, 512, 1.0)
    ind = np.where(g.r <= 1.0, 1.0, 0.0)
    assert integrate_measure(ind, g) == pytest.approx(np.pi, rel=1e-2)


def test_refinement_ratio_fourth_order():
    errs = []
    for n in (128, 256, 512):
        g = build_grid(40.0, n, n, 4.0)
        errs.append(np.max(np.abs(g.diff(q_exact(g.r), 1, 0) + 2 * np.sqrt(8) * g.r / (1 + g.r**2) ** 2)))
    ratios = [a / b for a, b in zip(errs[:-1], errs[1:])]
    assert all(12 <= r <= 20 for r in ratios)


def test_point_derivatives(grid):
    q = q_exact(grid.r)
    assert grid.evaluate(q, 1.0, 1, 0) == pytest.approx(-np.sqrt(2), abs=1e-8)
    assert grid.evaluate(grid.r * q, 0.0, 1, 1) == pytest.approx(np.sqrt(8), abs=1e-8)


def test_seminorm_of_linear_profile(grid):
    f = EquivariantField(grid, grid.r.astype(complex), 1)
    s = pointwise_seminorm(f, 1)
    assert np.allclose(s, grid.r, rtol=1e-9)
    with pytest.raises(ValueError):
        pointwise_seminorm(f, 4)


def test_differentiate_order_limit(grid):
    f = EquivariantField(grid, q_exact(grid.r), 0)
    with pytest.raises(ValueError):
        differentiate(f, 4)


def test_field_shape_and_grid_checks(grid):
    with pytest.raises(GridMismatchError):
        EquivariantField(grid, np.zeros(grid.n - 1))
    other = build_grid(100.0, 64, 64, 5.0)
    with pytest.raises(GridMismatchError):
        inner_product_real(EquivariantField(grid, np.ones(grid.n)), EquivariantField(other, np.ones(other.n)))


def test_bad_grid_parameters():
    with pytest.raises(ConfigurationError):
        build_grid(5.0, 64, 64, 10.0)


def test_csv_round_trip(tmp_path, grid):
    f = EquivariantField(grid, q_exact(grid.r) * np.exp(0.3j * grid.r), 0)
    path = tmp_path / "f.csv"
    f.to_csv(path)
    g = EquivariantField.from_csv(path)
    assert g.grid.grid_hash == grid.grid_hash
    assert np.array_equal(g.values, f.values)


def test_fornberg_reproduces_polynomials():
    x = np.array([[0.0, 0.3, 0.7, 1.2, 1.5]])
    w = fornberg_weights(np.array([0.5]), x, 2)
    assert w[0, 0] @ x[0] ** 3 == pytest.approx(0.125)
    assert w[2, 0] @ x[0] ** 3 == pytest.approx(3.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.2, 3.0))
def test_inner_product_symmetric_and_bilinear(a, c, width):
    g = build_grid(40.0, 128, 128, 4.0)
    r = g.r
    f = np.exp(-r**2 / width) * (1 + 1j * r)
    h = np.exp(-(r - 1) ** 2) + 0j
    k = r * np.exp(-r) * 1j
    ip = lambda x, y: inner_product_real(x, y, g)
    assert ip(f, h) == pytest.approx(ip(h, f), rel=1e-12, abs=1e-14)
    assert ip(f, a * h + c * k) == pytest.approx(a * ip(f, h) + c * ip(f, k), rel=1e-10, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 4.0))
def test_scaled_grid_preserves_l2(lam):
    g = build_grid(40.0, 128, 128, 4.0)
    f = EquivariantField(g, np.exp(-g.r**2) + 0j)
    scaled = EquivariantField(g.scaled(lam), f.values / lam)
    assert l2_norm(scaled) == pytest.approx(l2_norm(f), rel=1e-12)


def test_constructor_contract():
    g = build_grid(100.0, 1024, 1024, 10.0)
    assert g.n == 2048 and g.r[-1] == 100.0
    assert g.integrate(np.ones(g.n)) == pytest.approx(5000.0, rel=1e-12)


def test_pairing_examples(grid):
    y = grid.r
    q = q_exact(y)
    lam_q = q + y * grid.diff(q, 1, 0)
    assert inner_product_real(lam_q + 0j, 1j * q, grid) == 0.0
    assert integrate_measure(np.zeros(grid.n), grid) == 0.0


def test_log_divergent_pairing():
    g = build_grid(3.0e4, 2048, 4096, 10.0)
    y = g.r
    M = np.exp(10.0)
    yq = y * q_exact(y)
    got = 2 * np.pi * g.integrate(yq * yq * (y <= M))
    # 8 pi (log(1 + M^2) + 1/(1 + M^2) - 1) ~ 160 pi - 8 pi
    exact = 8 * np.pi * (np.log1p(M**2) + 1 / (1 + M**2) - 1)
    assert got == pytest.approx(exact, rel=2e-3)
    assert got / (160 * np.pi) == pytest.approx(1, abs=0.06)


def test_seminorm_examples(grid):
    y = grid.r
    c = np.full(grid.n, 2.5 - 1j)
    assert np.allclose(grid.seminorm(c, 2, 0), abs(2.5 - 1j), rtol=1e-8)
    yq = y * q_exact(y)
    s = grid.seminorm(yq, 1, 1)
    assert np.interp(1.0, y, s) == pytest.approx(np.sqrt(2), rel=1e-5)
    q = q_exact(y)
    # k = -1: max(|Q'|, |Q|/r) at r = 2, with Q'(2) = -4 sqrt(8) / 25
    sm = grid.seminorm(q, -1, 0)
    assert np.interp(2.0, y, sm) == pytest.approx(max(4 * np.sqrt(8) / 25, q_exact(2.0) / 2), rel=1e-5)
