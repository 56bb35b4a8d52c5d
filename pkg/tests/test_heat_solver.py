import numpy as np
import pytest

from wedgeheat.discretization import LogPolarGrid
from wedgeheat.heat_solver import (ParabolicProblem, heat_residual, manufactured_heat, norm_recipe,
                                   solve_heat, verify_wellposedness)
from wedgeheat.robin_resolvent import ResolventParams

P = ResolventParams(1.0, 2.2, -0.4)


def _times(n_t):
    return -8 + 40 * np.arange(n_t) / n_t


def _weighted_error(sol, U, beta=1.0):
    w = np.exp(-beta * sol.t)[:, None, None]
    return np.abs(w * (sol.U - U)).max() / np.abs(w * U).max()


def _run(n_s, n_t, smooth=True):
    g = LogPolarGrid(2.2, -8.0, 6.0, n_s, 9)
    t = _times(n_t)
    U, F, G = manufactured_heat(g, t, smooth)
    return solve_heat(ParabolicProblem(g, t, 1.0, P, F, G)), U


def test_manufactured_recovery_second_order_in_space():
    coarse, Uc = _run(64, 512)
    fine, Uf = _run(128, 512)
    ec, ef = _weighted_error(coarse, Uc), _weighted_error(fine, Uf)
    assert ef <= 2e-3
    assert ec / ef > 3.5


def test_causality_and_discrete_residual():
    sol, _ = _run(128, 256)
    assert sol.causality_defect() <= 1e-8
    assert heat_residual(sol) <= 1e-10


def test_truncated_nodes_not_counted_in_residual():
    sol, _ = _run(64, 1024)
    assert sol.info["dropped"] > 0
    assert heat_residual(sol) <= 1e-10


def test_real_data_gives_real_solution_and_mirrored_transforms():
    sol, _ = _run(64, 256)
    assert np.abs(sol.U.imag).max() == 0
    assert sol.info["solved"] < sol.info["nodes"]


def test_zero_data_gives_zero():
    g = LogPolarGrid(2.2, -8.0, 6.0, 64, 9)
    t = _times(128)
    sol = solve_heat(ParabolicProblem(g, t, 1.0, P, np.zeros((128,) + g.shape), None))
    assert not np.any(sol.U)
    rep = verify_wellposedness(sol, 0)
    assert rep.get("ratio", 0, P.alpha) == 0.0


def test_problem_validation():
    g = LogPolarGrid(2.2, -8.0, 6.0, 64, 9)
    t = _times(128)
    U, F, G = manufactured_heat(g, t)
    with pytest.raises(ValueError, match="vanish"):
        ParabolicProblem(g, t, 1.0, P, F + 1.0, G).validate()
    with pytest.raises(ValueError, match="power of two"):
        ParabolicProblem(g, t[:100], 1.0, P).validate()
    with pytest.raises(ValueError, match="gamma"):
        ParabolicProblem(g, t, 0.5, P, F, G).validate()
    with pytest.raises(ValueError, match="shape"):
        ParabolicProblem(g, t, 1.0, P, F[:, :10], G).validate()


def test_norm_recipes_cover_both_orders():
    for ell in (0, 1):
        rec = norm_recipe(ell)
        assert set(rec) >= {"U", "F", "G"}
        assert all(len(rec[k]) > 0 for k in ("U", "F", "G"))


def test_wellposedness_ratio_stable_under_refinement():
    t = _times(64)
    for ell in (0, 1):
        p = ResolventParams(1.0, 2.2, -0.4, ell=ell)
        ratios = []
        for ns, nph in [(256, 9), (512, 17)]:
            g = LogPolarGrid(2.2, -16.0, 6.0, ns, nph)
            U, F, G = manufactured_heat(g, t, True)
            sol = solve_heat(ParabolicProblem(g, t, 1.0, p, F, G))
            ratios.append(verify_wellposedness(sol, ell, eval_s_min=-11).get("ratio", ell, -0.4))
        assert min(ratios) > 0
        assert max(ratios) / min(ratios) - 1 <= 0.2
