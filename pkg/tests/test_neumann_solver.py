import numpy as np
import pytest

from wedgeheat.discretization import BoundaryTrace, WedgeField, make_grid
from wedgeheat.guards import GuardError
from wedgeheat.neumann_solver import (extend_trace, kernel_between, laplacian_residual,
                                      neumann_residual, redsol_check, solve_neumann,
                                      tracenorm_constants)
from wedgeheat.norms import boundary_seminorm


def manufactured(grid, eps=0.3):
    """w = e^{-s^2} (1 + eps cos phi) with its Laplacian and Neumann data."""
    S, PH = grid.mesh()
    gs = np.exp(-S ** 2)
    w = gs * (1 + eps * np.cos(PH))
    lap = np.exp(-2 * S) * ((4 * S ** 2 - 2) * gs * (1 + eps * np.cos(PH)) - eps * gs * np.cos(PH))
    s = grid.s
    # d_nu = -r^-1 d_phi on phi = 0 and +r^-1 d_phi on phi = theta
    upper = -eps * np.sin(grid.theta) * np.exp(-s) * np.exp(-s ** 2)
    return WedgeField(grid, w), WedgeField(grid, lap), BoundaryTrace(grid, np.zeros_like(s), upper)


@pytest.fixture(scope="module")
def grid():
    return make_grid(2.2, -10.0, 10.0, 256, 33)


@pytest.mark.parametrize("ell,alpha", [(0, -0.4), (0, 0.5), (1, -0.3)])
def test_manufactured_recovery(grid, ell, alpha):
    w, f, g = manufactured(grid)
    sol = solve_neumann(f, g, ell, alpha)
    assert sol.contour_re == pytest.approx(ell + alpha + 1)
    inner = np.abs(grid.s) <= 6
    assert np.abs(sol.field.values - w.values)[inner].max() <= 1e-7
    assert laplacian_residual(sol, f, phi_order=8) <= 1e-7
    assert neumann_residual(sol, g, use_fd=False) <= 1e-7
    assert neumann_residual(sol, g) <= 1e-4   # 4th-order one-sided stencil, 33 angular nodes


def test_zero_data_gives_zero(grid):
    z = BoundaryTrace(grid, np.zeros(grid.n_s), np.zeros(grid.n_s))
    sol = solve_neumann(None, z, 0, -0.4)
    assert not np.any(sol.field.values)


def test_resonant_contour_rejected(grid):
    # theta (l + alpha + 1) = pi  ->  resonance
    w, f, g = manufactured(grid)
    with pytest.raises(GuardError):
        solve_neumann(f, g, 0, np.pi / 2.2 - 1.0)


def _bump_data(grid):
    s = grid.s
    tr = BoundaryTrace(grid, 0.3 * np.exp(-4 * (s - 0.5) ** 2), np.exp(-4 * s ** 2) * (1 + 0.5 * s))
    f = WedgeField(grid, np.outer(np.exp(-2 * s) * np.exp(-3 * s ** 2), np.cos(np.linspace(0, 2, grid.n_phi))))
    return f, tr


def _shift_check(grid, f, tr, lev1, lev2):
    v1 = solve_neumann(f, tr, *lev1).field.values
    v2 = solve_neumann(f, tr, *lev2).field.values
    elems = kernel_between(f, tr, lev1, lev2)
    K = sum((e.evaluate(grid) for e in elems), np.zeros(grid.shape))
    inner = np.abs(grid.s) <= 6
    d = v1 - v2
    return elems, np.abs((d - K)[inner]).max(), max(np.abs(d[inner]).max(), 1e-300)


def test_contour_shift_across_one_pole(grid):
    f, tr = _bump_data(grid)
    elems, err, size = _shift_check(grid, f, tr, (0, 0.6), (0, -0.4))
    assert [e.k for e in elems] == [1]
    assert err <= 1e-7 * size


def test_contour_shift_across_level_zero(grid):
    f, tr = _bump_data(grid)
    elems, err, size = _shift_check(grid, f, tr, (0, -0.4), (0, -1.6))
    assert [e.k for e in elems] == [0]
    assert abs(elems[0].term.log_coefficient) > 0.1
    assert err <= 1e-7 * size


def test_no_pole_between_contours(grid):
    f, tr = _bump_data(grid)
    elems, err, _ = _shift_check(grid, f, tr, (0, -0.4), (0, -0.2))
    assert elems == []
    assert err <= 1e-9


def test_redsol_estimate_ratio_below_constant(grid):
    f, tr = _bump_data(grid)
    for data in ((None, tr), (f, None)):
        rep = redsol_check(solve_neumann(*data, 0, -0.4), *data)
        assert 0 < rep["ratio"] <= rep["C"]


@pytest.mark.parametrize("theta,ell,alpha", [(1.0, 1, -0.3), (2.2, 1, 0.4), (1.0, 2, -0.6)])
def test_trace_extension_bounds(theta, ell, alpha):
    g = make_grid(theta, -12, 12, 512, 129)
    s = g.s
    psi = BoundaryTrace(g, None, np.exp(-s ** 2) * (1 + 0.3 * np.sin(3 * s)))
    ext = extend_trace(psi, ell, alpha)
    k = tracenorm_constants(theta, ell, alpha)
    nv, npsi = ext.seminorm(ell), boundary_seminorm(psi, ell - 0.5, alpha)
    assert k["c"] * npsi <= nv
    assert nv ** 2 <= k["C"] * npsi ** 2
    assert ext.laplacian_residual() <= 1e-7
    assert np.abs(ext.field.values[:, -1] - psi.upper).max() <= 1e-10


def test_trace_extension_zero():
    g = make_grid(1.0, -8, 8, 128, 17)
    ext = extend_trace(BoundaryTrace(g, None, np.zeros(g.n_s)), 1, -0.3)
    assert not np.any(ext.field.values)


def test_trace_extension_guard():
    g = make_grid(1.0, -8, 8, 128, 17)
    with pytest.raises(GuardError):
        extend_trace(BoundaryTrace(g, None, np.exp(-g.s ** 2)), 0, 1.0)
