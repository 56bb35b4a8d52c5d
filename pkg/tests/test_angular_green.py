import numpy as np
import pytest

from wedgeheat.angular_green import (AngularProblem, PoleError, ResidueTerm, angular_residual,
                                     apriori_bound_check, aux_bounds, aux_constant, green_kernel,
                                     green_kernel_dphi, residue_at_pole, solve_angular,
                                     solve_angular_batch)


def test_green_kernel_closed_form():
    assert green_kernel(1.0, 1.0, 0.0, 1.0) == pytest.approx(1 / np.sin(1.0), rel=1e-14)
    assert abs(green_kernel(1.0, 1.0, 0.0, 1.0)) == pytest.approx(1.18840, abs=1e-5)


@pytest.mark.parametrize("lam", [1.0, 0.3 + 2j, -1.7 - 40j, 5.5 + 0.1j])
def test_green_kernel_symmetry_and_branches(lam):
    th = 2.2
    a = green_kernel(lam, th, 0.3, 0.7)
    b = green_kernel(lam, th, 0.7, 0.3)
    assert a == b
    # direct formula on the phi <= phi' branch
    direct = np.cos(lam * 0.3) * np.cos(lam * (th - 0.7)) / (lam * np.sin(lam * th))
    assert abs(a - direct) <= 1e-12 * max(1.0, abs(direct))


def test_green_kernel_pole_guard():
    with pytest.raises(PoleError):
        green_kernel(np.pi / 2.2 + 1e-10, 2.2, 0.1, 0.2)
    with pytest.raises(PoleError):
        green_kernel(0.0, 2.2, 0.1, 0.2)


def test_green_kernel_derivative_matches_difference():
    lam, th, h = 0.8 + 0.6j, 1.3, 1e-5
    d = green_kernel_dphi(lam, th, 0.4, 0.9)
    fd = (green_kernel(lam, th, 0.4 + h, 0.9) - green_kernel(lam, th, 0.4 - h, 0.9)) / (2 * h)
    assert abs(d - fd) < 1e-8


def test_constant_solution():
    lam = 1.3 + 0.4j
    phi = np.linspace(0, 2.0, 33)
    sol = solve_angular(AngularProblem(lam, 2.0, lambda p: lam ** 2 * np.ones_like(p, dtype=complex)), phi)
    assert np.abs(sol.values - 1.0).max() <= 1e-8
    assert np.abs(sol.dphi_values).max() <= 1e-8


def test_manufactured_cosine():
    # v = cos(2 phi): f = (1 - 4) cos(2 phi), -v'(0) = 0, v'(1) = -2 sin 2
    g2 = -2 * np.sin(2.0)
    assert g2 == pytest.approx(-1.81859, abs=1e-5)
    phi = np.linspace(0, 1, 41)
    p = AngularProblem(1.0, 1.0, lambda x: -3 * np.cos(2 * x), 0.0, g2)
    sol = solve_angular(p, phi)
    assert np.abs(sol.values - np.cos(2 * phi)).max() <= 1e-8
    assert np.abs(sol.dphi_values + 2 * np.sin(2 * phi)).max() <= 1e-8


@pytest.mark.parametrize("lam", [0.5, 2.0 + 1j, 0.3 - 25j, 3.1 + 0.2j])
def test_manufactured_general(lam):
    a, th = 1.7, 2.2
    phi = np.linspace(0, th, 33)
    f = lambda x: (lam ** 2 - a ** 2) * np.cos(a * x + 0.4)  # noqa: E731
    p = AngularProblem(lam, th, f, a * np.sin(0.4), -a * np.sin(a * th + 0.4))
    sol = solve_angular(p, phi)
    assert np.abs(sol.values - np.cos(a * phi + 0.4)).max() <= 1e-8 * (1 + abs(lam) ** 2)
    res = angular_residual(p)
    assert max(res["bc_lower"], res["bc_upper"]) <= 1e-8
    assert res["ode"] <= 1e-8 * (1 + abs(lam) ** 2)


def test_linearity():
    lam, th = 0.7 + 1.1j, 1.5
    phi = np.linspace(0, th, 17)
    f1 = lambda x: np.exp(x)  # noqa: E731
    f2 = lambda x: x ** 2  # noqa: E731
    s1 = solve_angular(AngularProblem(lam, th, f1, 0.3, -1.0), phi).values
    s2 = solve_angular(AngularProblem(lam, th, f2, 2.0, 0.5j), phi).values
    s = solve_angular(AngularProblem(lam, th, lambda x: 2 * f1(x) + f2(x), 2.6, -2 + 0.5j), phi).values
    assert np.abs(s - 2 * s1 - s2).max() <= 1e-10


def test_grid_data_and_batch_agree():
    th = 2.2
    phi = np.linspace(0, th, 65)
    f = np.exp(-(phi - 1) ** 2)
    lams = np.array([0.2 + 1j, 1.1 - 3j, 2.0 + 0.5j])
    V, _ = solve_angular_batch(lams, th, np.tile(f, (3, 1)), np.full(3, 0.4), np.full(3, -0.2), phi)
    for i, lam in enumerate(lams):
        one = solve_angular(AngularProblem(lam, th, f, 0.4, -0.2), phi).values
        assert np.abs(V[i] - one).max() <= 1e-12 * (1 + np.abs(one).max())


def test_apriori_bound_manufactured_and_zero():
    p = AngularProblem(1.0, 1.0, lambda x: -3 * np.cos(2 * x), 0.0, -2 * np.sin(2.0))
    lhs, rhs = apriori_bound_check(p, 0, 4.0, 0.05)
    assert lhs <= rhs
    z = AngularProblem(1.0, 1.0, None, 0.0, 0.0)
    assert apriori_bound_check(z, 0, 4.0, 0.05) == (0.0, 0.0)


def test_apriori_bound_sweep():
    f = lambda x: np.cos(3 * x) + 0.5j * x  # noqa: E731
    for ell in (0, 1):
        for om in np.linspace(-50, 50, 201):
            lam = 0.3 + 1j * om
            lhs, rhs = apriori_bound_check(AngularProblem(lam, 1.0, f, 0.7, -0.2 + 0.1j), ell, 4.0, 0.05)
            assert lhs <= rhs


def test_apriori_hypotheses_enforced():
    with pytest.raises(ValueError):
        apriori_bound_check(AngularProblem(5.0, 1.0, None, 1.0, 0.0), 0, 4.0, 0.05)


def test_aux_bounds_sweep():
    c = aux_constant(4.0, 0.05)
    rng = np.random.default_rng(3)
    for _ in range(500):
        th = rng.uniform(0.3, 6.0)
        lam = rng.uniform(-4, 4) / th + 1j * rng.uniform(-30, 30)
        d = abs(th * lam.real - np.pi * np.round(th * lam.real / np.pi))
        if d < 0.05:
            continue
        b = aux_bounds(lam, th, "cos", "sin")
        assert np.sin(0.05) <= b["abs_g"] <= b["cosh_bound"] * (1 + 1e-12)
        assert b["integral"] <= c


def test_residue_simple_pole():
    for th in (1.0, 2.2, 4.0):
        t = residue_at_pole(1, th, (None, 1.0, 0.0))
        assert t.coefficient == pytest.approx(-1 / np.pi, rel=1e-14)
        assert t.log_coefficient == 0


def test_residue_zero_data():
    t = residue_at_pole(2, 2.2, (None, 0.0, 0.0))
    assert t.coefficient == 0
    t0 = residue_at_pole(0, 2.2, lambda lam: (None, 0.0, 0.0))
    assert t0.coefficient == 0 and t0.log_coefficient == 0


def test_residue_level_zero_log_part():
    th = 2.2
    # g2 = theta near lambda = 0 (no lambda dependence): only a log part.
    t = residue_at_pole(0, th, lambda lam: (None, 0.0, th))
    assert t.log_coefficient == pytest.approx(-1.0, rel=1e-14)
    assert abs(t.coefficient) < 1e-12
    # lambda-dependent data gives the constant part through the derivative
    t = residue_at_pole(0, th, lambda lam: (None, 0.0, th * np.exp(2 * lam)))
    assert t.coefficient == pytest.approx(-2.0, rel=1e-10)


def test_residue_term_evaluation():
    t = ResidueTerm(1, 2.0, 0.5)
    r, phi = np.array([1.0, 4.0]), np.array([0.0, 2.0])
    v = t.evaluate(r, phi)
    q = np.pi / 2
    assert np.allclose(v, 0.5 * np.outer(r ** q, np.cos(q * phi)))
