import numpy as np
import pytest
from scipy.special import gamma

from wedgeheat.discretization import BoundaryTrace, TestFunctionSpec, WedgeField, make_grid, sample
from wedgeheat.transforms import (ContourError, MellinField, analyticity_check, contour_forward,
                                  derivative_law_check, laplace_at, laplace_forward,
                                  laplace_inverse, mellin_at, mellin_forward, mellin_inverse,
                                  plancherel_check, shift_law_check)

SQRT2PI = np.sqrt(2 * np.pi)
KINDS = [TestFunctionSpec("log_gaussian", width=0.8),
         TestFunctionSpec("log_gaussian", center=0.5, angular_mode=1),
         TestFunctionSpec("random", seed=3)]


@pytest.fixture
def exp_ray():
    g = make_grid(1.0, -34.0, 4.0, 1024, 5)
    return BoundaryTrace(g, None, np.exp(-np.exp(g.s)))


def test_mellin_of_exponential(exp_ray):
    # M(e^{-r})(lambda) = Gamma(-lambda) / sqrt(2 pi)
    val = mellin_at(exp_ray, np.array([-1.0]))[0, 1]
    assert val.real == pytest.approx(0.398942, abs=1e-6)
    assert abs(val - 1 / SQRT2PI) < 1e-12
    lam = np.array([-1.5 + 0.7j, -1.0 - 0.5j, -2.0 + 2.0j])
    assert np.allclose(mellin_at(exp_ray, lam)[:, 1], gamma(-lam) / SQRT2PI, rtol=1e-10)


def test_mellin_fft_matches_direct_quadrature(exp_ray):
    mf = mellin_forward(exp_ray, -1.0)
    k = np.argmin(np.abs(mf.im_nodes))
    assert mf.im_nodes[k] == 0.0
    assert abs(mf.values[k, 1] - 1 / SQRT2PI) < 1e-12


def test_zero_transforms_to_zero(unit_grid):
    mf = mellin_forward(WedgeField(unit_grid, np.zeros(unit_grid.shape)), 0.3)
    assert not np.any(mf.values)


def test_contour_outside_strip_rejected(exp_ray):
    # e^{-r} -> 1 as r -> 0, so the weight r^{-beta} with beta > 0 blows up at the tip
    with pytest.raises(ContourError):
        mellin_forward(exp_ray, 0.5)


@pytest.mark.parametrize("spec", KINDS)
def test_round_trip(unit_grid, spec):
    f = sample(spec, unit_grid)
    for beta in (-0.5, 0.0, 0.7):
        back = mellin_inverse(mellin_forward(f, beta))
        assert np.abs(back.values - f.values).max() <= 1e-12


def test_round_trip_trace(unit_grid):
    tr = sample(TestFunctionSpec("random", seed=5), unit_grid, "trace")
    back = mellin_inverse(mellin_forward(tr, 0.25))
    assert np.abs(back.lower - tr.lower).max() <= 1e-12
    assert np.abs(back.upper - tr.upper).max() <= 1e-12


def test_single_mode_inverts_to_power(unit_grid):
    f = WedgeField(unit_grid, np.zeros(unit_grid.shape))
    mf = mellin_forward(f, 0.3, tail_tol=None)
    k = len(mf.im_nodes) // 2 + 5
    vals = np.zeros_like(mf.values)
    vals[k] = 1.0
    v = mellin_inverse(mf.with_values(vals)).values[:, 0]
    lam = 0.3 + 1j * mf.im_nodes[k]
    expected = np.exp(lam * unit_grid.s) * mf.d_omega / SQRT2PI
    assert np.abs(v - expected).max() < 1e-12 * np.abs(expected).max()


def test_inverse_is_linear(unit_grid):
    a = mellin_forward(sample(KINDS[0], unit_grid), 0.1)
    b = mellin_forward(sample(KINDS[2], unit_grid), 0.1)
    lhs = mellin_inverse(a.with_values(2.5 * a.values + b.values)).values
    rhs = 2.5 * mellin_inverse(a).values + mellin_inverse(b).values
    assert np.abs(lhs - rhs).max() < 1e-12


@pytest.mark.parametrize("spec", KINDS)
def test_shift_law(unit_grid, spec):
    f = sample(spec, unit_grid)
    assert shift_law_check(f, 0.4, 0.3) <= 1e-12


@pytest.mark.parametrize("spec", KINDS)
def test_derivative_law_high_order_stencil(unit_grid, spec):
    f = sample(spec, unit_grid)
    assert derivative_law_check(f, 0.2, fd_order=6) <= 1e-6


def test_derivative_law_second_order_convergence():
    devs = []
    for n in (256, 512, 1024):
        g = make_grid(1.0, -8.0, 8.0, n, 5)
        devs.append(derivative_law_check(sample(KINDS[0], g), 0.0, fd_order=2))
    for a, b in zip(devs, devs[1:]):
        assert a / b == pytest.approx(4.0, rel=0.05)


def test_derivative_law_is_linear(unit_grid):
    f = sample(KINDS[0], unit_grid)
    d1 = derivative_law_check(f, 0.0)
    d3 = derivative_law_check(WedgeField(unit_grid, 3.0 * f.values), 0.0)
    assert d3 == pytest.approx(3 * d1, rel=1e-12)


def test_plancherel_gaussian_closed_form(unit_grid):
    tr = sample(TestFunctionSpec("log_gaussian"), unit_grid, "upper")
    lhs, rhs = plancherel_check(tr, tr, 0.5)
    expected = np.sqrt(np.pi / 2) * np.exp(1 / 8)
    assert lhs.real == pytest.approx(expected, rel=1e-10)
    assert abs(lhs - rhs) <= 1e-10 * abs(lhs)


@pytest.mark.parametrize("spec", KINDS)
@pytest.mark.parametrize("gamma_shift", [0.0, 0.5])
def test_plancherel_identity(unit_grid, spec, gamma_shift):
    f1 = sample(spec, unit_grid)
    f2 = sample(TestFunctionSpec("random", seed=11), unit_grid)
    lhs, rhs = plancherel_check(f1, f2, 0.3, gamma_shift)
    if gamma_shift == 0.0:
        assert abs(lhs - rhs) <= 1e-10 * abs(lhs)
    else:
        # shifted pairing equals the unshifted integral on the same combined weight
        assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), abs(rhs))


def test_plancherel_zero(unit_grid):
    f = sample(KINDS[0], unit_grid)
    z = WedgeField(unit_grid, np.zeros(unit_grid.shape))
    assert plancherel_check(f, z, 0.0) == (0j, 0j)


def test_transform_is_analytic(unit_grid):
    f = sample(KINDS[2], unit_grid)
    assert analyticity_check(f, 0.2, np.linspace(-3, 3, 13)) <= 1e-6


# ---------------------------------------------------------------- Laplace

@pytest.fixture
def decay_series():
    t = -4.0 + 64.0 * np.arange(4096) / 4096
    return t, np.where(t > 0, np.exp(-t), 0.0)


def test_laplace_of_causal_exponential(decay_series):
    t, f = decay_series
    f = f.copy()
    f[t == 0.0] = 0.5   # mean of the jump keeps the trapezoid rule second order
    val = laplace_at(f, t, np.array([1.0]))[0]
    assert abs(val - 1 / (2 * SQRT2PI)) < 1e-4
    assert 1 / (2 * SQRT2PI) == pytest.approx(0.199471, abs=1e-6)


def test_laplace_smooth_oracle():
    # t e^{-t} for t > 0 is continuous at 0: L(mu) = 1/(sqrt(2 pi) (mu + 1)^2)
    t = -4.0 + 64.0 * np.arange(8192) / 8192
    f = np.where(t > 0, t * np.exp(-t), 0.0)
    for mu in (1.0, 2.0 + 1j):
        val = laplace_at(f, t, np.array([mu]))[0]
        assert abs(val - 1 / (SQRT2PI * (mu + 1) ** 2)) < 1e-5


def test_laplace_round_trip(decay_series):
    t, f = decay_series
    v = f * t ** 2
    lf = laplace_forward(v, t, 0.1, tail_tol=None)
    assert np.abs(laplace_inverse(lf) - v).max() <= 1e-12 * np.abs(v).max()


def test_laplace_zero(decay_series):
    t, _ = decay_series
    assert not np.any(laplace_forward(np.zeros_like(t), t, 1.0).values)


def test_laplace_rejects_acausal(decay_series):
    t, _ = decay_series
    with pytest.raises(ValueError):
        laplace_forward(np.exp(-t ** 2), t, 1.0)
