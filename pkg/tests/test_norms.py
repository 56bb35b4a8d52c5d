import numpy as np
import pytest
from scipy.integrate import quad

from wedgeheat.discretization import BoundaryTrace, TestFunctionSpec, WedgeField, cutoff, make_grid, sample
from wedgeheat.norms import (ExpansionTerm, ExponentError, NormReport, SingularExpansion,
                             boundary_norm, boundary_seminorm, boundary_seminorm_real, bulk_norm,
                             bulk_seminorm, bulk_seminorm_mellin, monomial_divergence,
                             parabolic_norm, poly_norm, radial_derivative_norm, sigma_bd,
                             sigma_omega, split_singular, trace_two_sided_constants,
                             weighted_time_norm)

SQRT_HALF_PI = np.sqrt(np.pi / 2)


@pytest.fixture
def grid22():
    return make_grid(2.2, -10.0, 10.0, 512, 65)


def test_scaling_indices():
    for x in np.linspace(-3, 3, 13):
        assert sigma_omega(x) == x - 1
        assert sigma_bd(x) == x - 0.5
        assert sigma_bd(x) == sigma_omega(x + 0.5)


def test_bulk_seminorm_gaussian(unit_grid):
    f = sample(TestFunctionSpec("log_gaussian"), unit_grid)
    assert bulk_seminorm(f, 0, 1.0, squared=True) == pytest.approx(SQRT_HALF_PI, rel=1e-8)
    assert bulk_seminorm(f, 0, 1.0, squared=True) == pytest.approx(1.25331, abs=1e-5)


def test_zero_field_norms(unit_grid):
    z = WedgeField(unit_grid, np.zeros(unit_grid.shape))
    assert bulk_seminorm(z, 2, 0.3) == 0.0
    assert bulk_norm(z, 2, 0.3) == 0.0
    zt = BoundaryTrace(unit_grid, np.zeros(unit_grid.n_s), None)
    assert boundary_seminorm(zt, 1.5, 0.2) == 0.0
    assert boundary_norm(zt, 1.5, 0.2) == 0.0


@pytest.mark.parametrize("seed", range(4))
@pytest.mark.parametrize("ell", [0, 1, 2, 3])
def test_real_space_and_mellin_forms_agree(grid22, seed, ell):
    f = sample(TestFunctionSpec("random", seed=seed), grid22)
    a = bulk_seminorm(f, ell, 0.3, squared=True)
    b = bulk_seminorm_mellin(f, ell, 0.3, squared=True)
    assert abs(a - b) <= 1e-8 * a


def test_bulk_norm_is_sum_of_seminorms(grid22):
    f = sample(TestFunctionSpec("random", seed=9), grid22)
    parts = [bulk_seminorm(f, l, -0.4, squared=True) for l in range(3)]
    assert bulk_norm(f, 2, -0.4, squared=True) == pytest.approx(sum(parts), rel=1e-14)
    assert bulk_norm(f, 0, -0.4) == pytest.approx(bulk_seminorm(f, 0, -0.4), rel=1e-14)


def test_boundary_seminorm_gaussian(unit_grid):
    tr = sample(TestFunctionSpec("log_gaussian"), unit_grid, "upper")
    assert boundary_seminorm(tr, 0.0, 0.5, squared=True) == pytest.approx(SQRT_HALF_PI, rel=1e-10)
    assert boundary_norm(tr, 0.0, 0.5) == pytest.approx(boundary_seminorm(tr, 0.0, 0.5), rel=1e-14)


@pytest.mark.parametrize("ell,beta", [(1, 0.0), (2, 0.3), (3, -0.6)])
def test_boundary_contour_and_real_space_agree(unit_grid, ell, beta):
    tr = sample(TestFunctionSpec("random", seed=ell), unit_grid, "trace")
    a = boundary_seminorm(tr, ell, beta, squared=True)
    b = boundary_seminorm_real(tr, ell, beta, squared=True)
    assert abs(a - b) <= 1e-8 * a


def test_boundary_norm_composition(unit_grid):
    tr = sample(TestFunctionSpec("random", seed=2), unit_grid, "trace")
    expected = boundary_seminorm(tr, 0, 0.1, True) + boundary_seminorm(tr, 1.5, 0.1, True)
    assert boundary_norm(tr, 1.5, 0.1, squared=True) == pytest.approx(expected, rel=1e-14)


def test_radial_derivative_two_sided_bound():
    g = make_grid(1.0, -12.0, 12.0, 512, 5)
    rng = np.random.default_rng(2024)
    worst = []
    for k in range(200):
        ell = int(rng.integers(0, 4))
        alpha = rng.uniform(-2, 2)
        if min(abs(sigma_bd(j + alpha)) for j in range(ell + 1)) < 0.05:
            continue
        tr = sample(TestFunctionSpec("random", seed=1000 + k, width=0.8), g, "trace")
        c, C = trace_two_sided_constants(ell, alpha)
        mid = radial_derivative_norm(tr, ell, alpha)
        semi = boundary_seminorm(tr, ell, alpha)
        assert c * semi <= mid * (1 + 1e-8)
        assert mid <= C * semi * (1 + 1e-8)
        worst.append(mid / semi)
    assert len(worst) > 150


def test_poly_norm_single_cosine():
    phi = np.linspace(0, 2.0, 257)
    e = SingularExpansion(2.0, (ExpansionTerm(np.pi / 2, np.cos(np.pi * phi / 2)),))
    assert poly_norm(e, 0, 2.6, squared=True) == pytest.approx(1.0, rel=1e-6)
    with pytest.raises(ExponentError):
        poly_norm(e, 0, 2.0)


def test_poly_norm_empty():
    assert poly_norm(SingularExpansion(2.0), 2, 0.0) == 0.0


def test_only_level_zero_carries_log():
    with pytest.raises(ExponentError):
        SingularExpansion(1.0, (ExpansionTerm(1.0, np.ones(5), log_coeff=np.ones(5)),))


def _tip_grid():
    return make_grid(2.2, -24.0, 5.0, 2048, 65)


def test_split_recovers_resonant_term():
    g = _tip_grid()
    q = np.pi / 2.2
    a = np.cos(np.pi * g.phi / 2.2)
    f = WedgeField(g, cutoff(g.r)[:, None] * np.outer(g.r ** q, a))
    res = split_singular(f, 2, 0.5)          # threshold 1.5 > pi/2.2
    t = res.expansion.term(q)
    assert t is not None
    assert np.abs(t.coeff - a).max() <= 1e-8
    assert np.abs(res.regular.values).max() <= 1e-8


def test_split_two_terms():
    g = _tip_grid()
    q = np.pi / 2.2
    a1 = 0.5 + 0.2 * g.phi
    a2 = np.cos(np.pi * g.phi / 2.2)
    f = WedgeField(g, cutoff(g.r)[:, None] * (np.outer(g.r, a1) + np.outer(g.r ** q, a2)))
    res = split_singular(f, 2, 0.5)
    assert np.abs(res.expansion.term(1.0).coeff - a1).max() <= 1e-6
    assert np.abs(res.expansion.term(q).coeff - a2).max() <= 1e-6


def test_split_of_regular_field_is_empty():
    g = _tip_grid()
    f = sample(TestFunctionSpec("log_gaussian", center=1.5, width=0.2), g)
    res = split_singular(f, 2, 0.5)
    assert len(res.expansion) == 0


@pytest.mark.parametrize("delta,k,beta,diverges", [
    (0.2, 1, 0.5, True),      # threshold 0.5
    (0.7, 1, 0.5, False),
    (-0.5, 0, 0.0, True),     # threshold -1 ... see below
])
def test_monomial_threshold(delta, k, beta, diverges):
    thr = sigma_omega(k + beta)
    expected = delta < thr
    flag, vals = monomial_divergence(delta, k, beta)
    assert flag == expected
    assert np.all(np.isfinite(vals))


def test_parabolic_norm_reduces_to_weighted_time_norm():
    t = -4 + 40 * np.arange(1024) / 1024
    F = np.where(t > 0, t * np.exp(-2 * t), 0.0)[:, None] * np.array([1.0, 0.5j])
    a = parabolic_norm(F, t, 0.0, 1.0, gamma=0.0, squared=True)
    b = weighted_time_norm(F, t, 1.0, squared=True)
    assert abs(a - b) <= 1e-12 * b


def test_parabolic_norm_zero():
    t = -4 + 40 * np.arange(256) / 256
    assert parabolic_norm(np.zeros((256, 3)), t, 1.0, 1.0) == 0.0


def _laplace_side(power, order):
    # L(t^p e^{-2t}) = p! / (sqrt(2 pi) (mu + 2)^(p+1)) on Re mu = 1
    fact = np.prod(np.arange(1, power + 1))
    return quad(lambda w: (abs(1 + 1j * w) + 1) ** (2 * order) * fact ** 2
                / (2 * np.pi * abs(3 + 1j * w) ** (2 * power + 2)),
                -np.inf, np.inf, epsabs=1e-15, epsrel=1e-13, limit=500)[0]


def test_parabolic_norm_dual_routes_smooth_onset():
    t = -4 + 40 * np.arange(4096) / 4096
    F = np.where(t > 0, t ** 3 * np.exp(-2 * t), 0.0)[:, None]
    dF = np.where(t > 0, (3 * t ** 2 - 2 * t ** 3) * np.exp(-2 * t), 0.0)[:, None]
    # gamma = 0: the multiplier |mu|^2 is the time derivative
    a = parabolic_norm(F, t, 1.0, 1.0, gamma=0.0, squared=True)
    b = weighted_time_norm(dF, t, 1.0, squared=True)
    assert abs(a - b) <= 1e-6 * b
    # gamma = 1 against direct quadrature of the closed-form transform
    c = parabolic_norm(F, t, 1.0, 1.0, gamma=1.0, squared=True)
    assert abs(c - _laplace_side(3, 1)) <= 1e-6 * c


def test_parabolic_norm_kinked_profile_converges():
    # t e^{-2t} has a derivative jump at t = 0, so the order-one multiplier
    # has a slowly decaying tail; the sampled value converges like 1/n
    exact = _laplace_side(1, 1)
    errs = []
    for n in (4096, 16384):
        t = -4 + 40 * np.arange(n) / n
        F = np.where(t > 0, t * np.exp(-2 * t), 0.0)[:, None]
        errs.append(abs(parabolic_norm(F, t, 1.0, 1.0, 1.0, squared=True) - exact) / exact)
    assert errs[1] < 0.3 * errs[0]
    assert errs[1] < 5e-3


def test_norm_report_rejects_negative_and_serializes():
    rep = NormReport()
    rep.add("bulk-seminorm", 0, 0.5, 1.25)
    assert "(bulk-seminorm, 0, 0.5)" in rep.dumps()
    with pytest.raises(ValueError):
        rep.add("bulk-seminorm", 1, 0.5, -1.0)
