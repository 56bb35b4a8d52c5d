import numpy as np
import pytest

from wedgeheat.discretization import (BoundaryTrace, GridError, SupportError, TestFunctionSpec,
                                      WedgeField, cutoff, diff_matrix, load_field, make_grid,
                                      quad_ray, quad_wedge, sample, save_field)

SQRT_HALF_PI = np.sqrt(np.pi / 2)


def test_grid_spacing_includes_end_points():
    g = make_grid(1.0, -8.0, 8.0, 256, 64)
    assert g.ds == pytest.approx(16.0 / 255.0, rel=1e-15)
    assert g.s[0] == -8.0 and g.s[-1] == 8.0
    assert g.phi[0] == 0.0 and g.phi[-1] == pytest.approx(1.0)


def test_large_grid_shape():
    g = make_grid(np.pi / np.sqrt(2), -10, 10, 512, 128)
    assert g.shape == (512, 128)


@pytest.mark.parametrize("kwargs", [
    dict(theta=2 * np.pi * 1.0001, s_min=-8, s_max=8, n_s=256, n_phi=64),
    dict(theta=0.0, s_min=-8, s_max=8, n_s=256, n_phi=64),
    dict(theta=1.0, s_min=-8, s_max=8, n_s=300, n_phi=64),
    dict(theta=1.0, s_min=8, s_max=-8, n_s=256, n_phi=64),
])
def test_invalid_grids_rejected(kwargs):
    with pytest.raises(GridError):
        make_grid(**kwargs)


def test_log_gaussian_peak_at_unit_radius(unit_grid):
    f = sample(TestFunctionSpec("log_gaussian"), unit_grid)
    i, _ = np.unravel_index(np.abs(f.values).argmax(), f.values.shape)
    assert unit_grid.s[i] == pytest.approx(0.0, abs=unit_grid.ds)
    assert np.abs(f.values).max() == pytest.approx(1.0, abs=unit_grid.ds ** 2)


def test_cutoff_sandwich():
    r = np.exp(np.linspace(-5, 2, 2001))
    z = cutoff(r)
    assert np.all((z >= 0) & (z <= 1))
    assert np.all(z[r <= 1] == 1.0)
    assert np.all(z[r >= 2] == 0.0)


def test_monomial_vanishes_beyond_two(unit_grid):
    f = sample(TestFunctionSpec("monomial", exponent=0.5), make_grid(1.0, -40, 4, 512, 9))
    r = np.exp(f.grid.s)
    assert np.all(f.values[r >= 2] == 0)


def test_random_sampling_is_reproducible(unit_grid):
    a = sample(TestFunctionSpec("random", seed=42), unit_grid)
    b = sample(TestFunctionSpec("random", seed=42), unit_grid)
    c = sample(TestFunctionSpec("random", seed=43), unit_grid)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_support_error_on_narrow_window():
    g = make_grid(1.0, -2, 2, 64, 9)
    with pytest.raises(SupportError):
        sample(TestFunctionSpec("log_gaussian", width=2.0), g)


def test_quadrature_zero_field(unit_grid):
    assert quad_wedge(WedgeField(unit_grid, np.zeros(unit_grid.shape))) == 0.0


def test_quadrature_gaussian_oracle(unit_grid):
    f = sample(TestFunctionSpec("log_gaussian"), unit_grid)
    assert quad_wedge(f) == pytest.approx(1.0 * SQRT_HALF_PI, rel=1e-8)   # 1.25331


@pytest.mark.parametrize("beta", [0.25, 0.5, -0.7])
def test_weighted_quadrature_completes_square(unit_grid, beta):
    # int e^{-2 s^2 - 2 beta s} ds = sqrt(pi/2) e^{beta^2 / 2}
    f = sample(TestFunctionSpec("log_gaussian"), unit_grid)
    assert quad_wedge(f, beta) == pytest.approx(SQRT_HALF_PI * np.exp(beta ** 2 / 2), rel=1e-8)


def test_weighted_quadrature_frozen_values(unit_grid):
    f = sample(TestFunctionSpec("log_gaussian"), unit_grid)
    assert quad_wedge(f, 0.5) == pytest.approx(1.420191, abs=1e-6)
    assert quad_wedge(f, 0.25) == pytest.approx(1.293099, abs=1e-6)


def test_trapezoid_second_order():
    # non-periodic integrand: cut at the window edge so the trapezoid rule is only O(h^2)
    exact = None
    errs = []
    for n in (65, 129, 257):
        s = np.linspace(0.0, 1.0, n)
        v = np.sqrt(np.exp(s))
        errs.append(quad_ray(v, s))
    exact = np.e - 1.0
    e = [abs(x - exact) for x in errs]
    assert e[0] / e[1] > 3 and e[1] / e[2] > 3


def test_overflow_reports_node():
    g = make_grid(1.0, -8, 800, 256, 5)
    with pytest.raises(OverflowError, match="s="):
        quad_wedge(WedgeField(g, np.ones(g.shape)), -1.0)


def test_diff_matrix_orders():
    n, h = 64, 0.05
    x = np.arange(n) * h
    D = diff_matrix(n, h, 1, 4)
    assert np.abs(D @ x ** 3 - 3 * x ** 2).max() < 1e-9
    D2 = diff_matrix(n, h, 2, 4)
    assert np.abs(D2 @ x ** 4 - 12 * x ** 2).max() < 1e-7


def test_field_file_round_trip_is_bit_exact(tmp_path, unit_grid):
    f = sample(TestFunctionSpec("random", seed=7), unit_grid)
    save_field(tmp_path / "f.txt", f)
    back = load_field(tmp_path / "f.txt")
    assert np.array_equal(back.values, f.values)
    assert back.grid == f.grid
    tr = BoundaryTrace(unit_grid, None, f.values[:, -1])
    save_field(tmp_path / "t.txt", tr)
    tb = load_field(tmp_path / "t.txt")
    assert tb.lower is None and np.array_equal(tb.upper, tr.upper)
