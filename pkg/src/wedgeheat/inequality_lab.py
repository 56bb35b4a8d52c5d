"""Randomized property tests for the explicit-constant weighted inequalities.

Each registry entry draws parameters and a test function from a seeded
generator, rejects draws that violate the inequality's hypotheses, evaluates
both sides by quadrature and records the margin

    margin = rhs * (1 + slack) - lhs,

with any explicit constant folded into the side it multiplies.

Weighted quantities are computed so that the two sides share samples: a
weight shift r^(-b) v on contour Re lambda = sigma uses exactly the samples of
v on Re lambda = sigma + b, and r d_r is applied spectrally on that contour.
Pointwise Mellin-side inequalities therefore hold for the discrete norms up to
round-off; only angular differences (4th order) carry a genuine truncation
error, and those enter only inequalities with constants far from sharp.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from .angular_green import aux_bounds, aux_constant, aux_hypotheses
from .discretization import (BoundaryTrace, LogPolarGrid, WedgeField, cutoff, make_grid,
                             save_field, trapezoid_weights)
from .guards import GuardError
from .neumann_solver import extend_trace, tracenorm_constants
from .norms import angular_diff, bulk_seminorm, sigma_bd, sigma_omega
from .transforms import contour_forward, weighted_s_derivative

__all__ = [
    "SLACK",
    "SIGMA_MIN",
    "InequalityCase",
    "HypothesisError",
    "QuadratureDivergence",
    "REGISTRY",
    "run_case",
    "summarize",
    "sharpness_probe",
    "run_suite",
]

SLACK = 1e-6
# hypotheses of the form sigma != 0 are enforced with this margin so that
# constants like |sigma|^(-k) stay representable
SIGMA_MIN = 0.05
_TAIL = 1e-12

_S_RANGE = (-20.0, 20.0)
_N_S = 512
_N_PHI = 41


class HypothesisError(ValueError):
    """Parameters violate the hypotheses of the inequality."""


class QuadratureDivergence(ArithmeticError):
    """A weighted integrand does not decay inside the window."""


@dataclass
class InequalityCase:
    id: str
    params: dict
    lhs: float
    rhs: float
    constant: float
    formula: str
    margin: float = 0.0
    passed: bool = False
    seed: Optional[list] = None
    sides: Optional[dict] = None
    witness: Optional[object] = dc_field(default=None, repr=False)

    def finish(self, slack: float = SLACK) -> "InequalityCase":
        self.margin = float(self.rhs * (1.0 + slack) - self.lhs)
        self.passed = bool(self.margin >= 0.0)
        return self

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else math.inf)

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("witness")
        d["ratio"] = self.ratio
        return d


# ---------------------------------------------------------------- helpers

_GRIDS: dict = {}


def _grid(theta: float, s_range=_S_RANGE, n_s=_N_S, n_phi=_N_PHI) -> LogPolarGrid:
    key = (float(theta), s_range, n_s, n_phi)
    if key not in _GRIDS:
        _GRIDS[key] = make_grid(theta, s_range[0], s_range[1], n_s, n_phi)
    return _GRIDS[key]


def _need(cond: bool, what: str):
    if not cond:
        raise HypothesisError(what)


def _nonzero(x: float, what: str):
    _need(abs(x) >= SIGMA_MIN, f"|{what}| = {abs(x):.3g} < {SIGMA_MIN}")


def _tails(values: np.ndarray, s: np.ndarray, sigma: float):
    w = np.abs(values) * np.exp(-sigma * s).reshape((-1,) + (1,) * (values.ndim - 1))
    top = w.max()
    if not np.isfinite(top) or max(w[0].max(), w[-1].max()) > _TAIL * top:
        raise QuadratureDivergence(f"weighted samples do not decay on Re lambda = {sigma:.4g}")


def _ray_sq(psi: np.ndarray, s: np.ndarray, order: float, line: float) -> float:
    """Squared boundary seminorm: sum of |lambda|^(2 order) |psi^|^2 on Re lambda = line."""
    _tails(psi, s, line)
    omega, F = contour_forward(psi, s, line, None)
    lam = line + 1j * omega
    return float((omega[1] - omega[0]) * np.sum(np.abs(lam) ** (2 * order) * np.abs(F) ** 2))


def _ray_cols_sq(v: np.ndarray, s: np.ndarray, order: float, line: float) -> np.ndarray:
    """_ray_sq for every column of v."""
    _tails(v, s, line)
    omega, F = contour_forward(v, s, line, None)
    lam = (line + 1j * omega)[:, None]
    return (omega[1] - omega[0]) * np.sum(np.abs(lam) ** (2 * order) * np.abs(F) ** 2, axis=0)


def _bulk_sq(v: np.ndarray, grid: LogPolarGrid, ell: int, weight: float) -> float:
    _tails(v, grid.s, sigma_omega(ell + weight))
    return bulk_seminorm(WedgeField(grid, v), ell, weight, squared=True)


def _rdr(v: np.ndarray, s: np.ndarray, line: float) -> np.ndarray:
    """Unweighted r d_r v, computed spectrally on Re lambda = line."""
    _tails(v, s, line)
    w = weighted_s_derivative(v, s, line, 1, None)
    return np.exp(line * s).reshape((-1,) + (1,) * (v.ndim - 1)) * w


def _shift(v: np.ndarray, s: np.ndarray, b: float) -> np.ndarray:
    """Samples of r^(-b) v."""
    return np.exp(-b * s).reshape((-1,) + (1,) * (v.ndim - 1)) * v


def _random_ray(rng, s: np.ndarray) -> np.ndarray:
    out = np.zeros(s.shape, dtype=complex)
    for _ in range(rng.integers(1, 4)):
        c, w = rng.uniform(-2, 2), rng.uniform(0.35, 1.2)
        out += (rng.normal() + 1j * rng.normal()) * np.exp(-((s - c) / w) ** 2)
    return out


def _random_wedge(rng, grid: LogPolarGrid) -> np.ndarray:
    S, PHI = grid.mesh()
    out = np.zeros(grid.shape, dtype=complex)
    for _ in range(rng.integers(1, 4)):
        c, w = rng.uniform(-2, 2), rng.uniform(0.35, 1.2)
        k, ph = rng.uniform(0, 3), rng.uniform(0, 2 * np.pi)
        amp = rng.normal() + 1j * rng.normal()
        out += amp * np.exp(-((S - c) / w) ** 2) * np.cos(k * np.pi * PHI / grid.theta + ph)
    return out


def _theta(rng) -> float:
    return float(rng.uniform(0.3, 6.0))


def _case(id_, params, lhs, rhs, constant, formula, sides=None, witness=None) -> InequalityCase:
    return InequalityCase(id_, params, float(lhs), float(rhs), float(constant), formula,
                          sides=sides, witness=witness)


def _two_sided(id_, params, lower, upper, formula, witness=None) -> InequalityCase:
    """lower = (lhs, rhs, c) and upper = (lhs, rhs, C); keeps the tighter side."""
    sides = {"lower": {"lhs": lower[0], "rhs": lower[1], "constant": lower[2]},
             "upper": {"lhs": upper[0], "rhs": upper[1], "constant": upper[2]}}
    q = [(lo / hi if hi > 0 else math.inf) for lo, hi, _ in (lower, upper)]
    pick = lower if q[0] >= q[1] else upper
    return _case(id_, params, pick[0], pick[1], pick[2], formula, sides, witness)


# ---------------------------------------------------------------- 1-D Hardy

def _hardy(rng, p):
    beta = p.get("beta", float(rng.choice([-1, 1]) * rng.uniform(0.2, 2.0)))
    _need(beta != 0, "beta != 0")
    s = np.linspace(-40.0, 40.0, 4097)
    w0 = rng.uniform(0.1, 0.3) / max(1.0, abs(beta))
    c0 = rng.uniform(-2, 2)
    a, b = rng.normal(size=2)
    x = 2 * (s - c0) / w0
    # v = a + b expit(x) + bumps; store v minus its limit on the side where the
    # weight grows, so that the large weight never multiplies a cancellation
    d = -b * expit(-x) if beta > 0 else b * expit(x)
    dv = (2 / w0) * b * expit(x) * expit(-x)
    for _ in range(rng.integers(0, 3)):
        c, w, amp = rng.uniform(-2, 2), rng.uniform(0.3, 1.2), rng.normal()
        g = amp * np.exp(-((s - c) / w) ** 2)
        d, dv = d + g, dv - 2 * (s - c) / w ** 2 * g
    q = trapezoid_weights(len(s), s[1] - s[0]) * np.exp(2 * beta * s)
    c_opt = (q @ d) / q.sum()   # weighted least squares minimiser
    lhs = math.sqrt(q @ (d - c_opt) ** 2)
    rhs = math.sqrt(q @ dv ** 2) / abs(beta)
    limit = a + b if beta > 0 else a
    return _case("hardy", {"beta": beta, "c_opt": float(limit + c_opt)}, lhs, rhs, 1 / abs(beta),
                 "inf_c ||r^b (v-c)|| <= |b|^-1 ||r^(b+1) d_r v||")


def hardy_example() -> InequalityCase:
    """v = exp(-(ln r)^2), beta = 1/2, with the closed-form derivative."""
    s = np.linspace(-30.0, 30.0, 4097)
    beta = 0.5
    v = np.exp(-s ** 2)
    dv = -2 * s * v
    q = trapezoid_weights(len(s), s[1] - s[0]) * np.exp(2 * beta * s)
    c_opt = (q @ v) / q.sum()
    lhs = math.sqrt(q @ (v - c_opt) ** 2)
    rhs = 2.0 * math.sqrt(q @ dv ** 2)
    return _case("hardy", {"beta": beta, "c_opt": float(c_opt)}, lhs, rhs, 2.0,
                 "inf_c ||r^b (v-c)|| <= |b|^-1 ||r^(b+1) d_r v||").finish()


# ---------------------------------------------------------------- boundary weight shifts

def _mel_params(rng, p, need_beta_nonneg=False):
    s_ord = p.get("s", float(rng.uniform(-1.5, 3.0)))
    alpha = p.get("alpha", float(rng.uniform(-2.0, 2.0)))
    beta = p.get("beta", float(rng.uniform(0.0 if need_beta_nonneg else -1.5, 1.5)))
    _nonzero(sigma_bd(s_ord + alpha), "sigma_d(s+alpha)")
    _nonzero(sigma_bd(s_ord + alpha + beta), "sigma_d(s+alpha+beta)")
    ratio = abs(sigma_bd(s_ord + alpha + beta) / sigma_bd(s_ord + alpha)) ** np.sign(s_ord)
    return s_ord, alpha, beta, min(ratio, 1.0), max(ratio, 1.0)


def _hardy_mel_3(rng, p):
    s_ord, alpha, beta, c, C = _mel_params(rng, p)
    g = _grid(1.0)
    v = _random_ray(rng, g.s)
    mid = math.sqrt(_ray_sq(v, g.s, s_ord, sigma_bd(s_ord + alpha + beta)))
    shifted = math.sqrt(_ray_sq(_shift(v, g.s, beta), g.s, s_ord, sigma_bd(s_ord + alpha)))
    k = abs(s_ord)
    return _two_sided("hardy-mel-3", {"s": s_ord, "alpha": alpha, "beta": beta},
                      (c ** k * shifted, mid, c ** k), (mid, C ** k * shifted, C ** k),
                      "c^|s| |r^-b v|_{s,a} <= |v|_{s,a+b} <= C^|s| |r^-b v|_{s,a}, "
                      "c, C = min/max{|sd(s+a+b)/sd(s+a)|^sgn(s), 1}",
                      BoundaryTrace(g, None, v))


def _hardy_mel_4(rng, p):
    s_ord, alpha, beta, c, C = _mel_params(rng, p)
    g = _grid(1.0)
    v = _random_ray(rng, g.s)
    line = sigma_bd(s_ord + alpha + beta)
    mid = math.sqrt(_ray_sq(v, g.s, s_ord + 1, line))
    # r^(1-b) d_r v = r^(-b) (r d_r v)
    w = _shift(_rdr(v, g.s, line), g.s, beta)
    shifted = math.sqrt(_ray_sq(w, g.s, s_ord, sigma_bd(s_ord + alpha)))
    k = abs(s_ord)
    return _two_sided("hardy-mel-4", {"s": s_ord, "alpha": alpha, "beta": beta},
                      (c ** k * shifted, mid, c ** k), (mid, C ** k * shifted, C ** k),
                      "c^|s| |r^(1-b) d_r v|_{s,a} <= |v|_{s+1,a+b-1} <= C^|s| |r^(1-b) d_r v|_{s,a}",
                      BoundaryTrace(g, None, v))


def _hardy_mel_5(rng, p):
    s_ord, alpha, beta, _, _ = _mel_params(rng, p, need_beta_nonneg=True)
    _need(beta >= 0, "beta >= 0")
    g = _grid(1.0)
    v = _random_ray(rng, g.s)
    line = sigma_bd(s_ord + alpha + beta)
    k = abs(line) ** beta
    lhs = k * math.sqrt(_ray_sq(v, g.s, s_ord, line))
    rhs = math.sqrt(_ray_sq(v, g.s, s_ord + beta, line))
    return _case("hardy-mel-5", {"s": s_ord, "alpha": alpha, "beta": beta}, lhs, rhs, k,
                 "|sd(s+a+b)|^b |v|_{s,a+b} <= |v|_{s+b,a}", witness=BoundaryTrace(g, None, v))


def _hardy_mel_6(rng, p):
    s_ord, alpha, beta, c, _ = _mel_params(rng, p)
    g = _grid(1.0)
    v = _random_ray(rng, g.s)
    line = sigma_bd(s_ord + alpha + beta + 1)
    k = c ** abs(s_ord) * abs(line)
    lhs = k * math.sqrt(_ray_sq(_shift(v, g.s, beta + 1), g.s, s_ord, sigma_bd(s_ord + alpha)))
    dv = _shift(_rdr(v, g.s, line), g.s, 1.0)   # d_r v = r^-1 (r d_r v)
    rhs = math.sqrt(_ray_sq(dv, g.s, s_ord, sigma_bd(s_ord + alpha + beta)))
    return _case("hardy-mel-6", {"s": s_ord, "alpha": alpha, "beta": beta}, lhs, rhs, k,
                 "c^|s| |sd(s+a+b+1)| |r^(-b-1) v|_{s,a} <= |d_r v|_{s,a+b}",
                 witness=BoundaryTrace(g, None, v))


# ---------------------------------------------------------------- wedge weight shifts

def _b_const(ell, alpha, beta):
    q = abs(sigma_omega(ell + alpha) / sigma_omega(ell + alpha + beta))
    return 0.5 / sum(max(q ** j, 1.0) for j in range(ell + 1))


def _B_const(ell, alpha, beta):
    q = abs(sigma_omega(ell + alpha + beta) / sigma_omega(ell + alpha))
    return 2.0 * sum(max(q ** j, 1.0) for j in range(ell + 1))


def _wedge_params(rng, p):
    theta = p.get("theta", _theta(rng))
    ell = int(p.get("ell", rng.integers(0, 3)))
    alpha = p.get("alpha", float(rng.uniform(-2.0, 2.0)))
    beta = p.get("beta", float(rng.uniform(-1.5, 1.5)))
    return theta, ell, alpha, beta


_B_TXT = "b_b = 1/2 (sum_j max{|sO(l+a)/sO(l+a+b)|^j, 1})^-1, B_b = 2 sum_j max{|sO(l+a+b)/sO(l+a)|^j, 1}"


def _wedge_1(rng, p):
    theta, ell, alpha, beta = _wedge_params(rng, p)
    _nonzero(sigma_omega(ell + alpha), "sO(l+a)")
    _nonzero(sigma_omega(ell + alpha + beta), "sO(l+a+b)")
    g = _grid(theta)
    v = _random_wedge(rng, g)
    mid = math.sqrt(_bulk_sq(v, g, ell, alpha + beta))
    sh = math.sqrt(_bulk_sq(_shift(v, g.s, beta), g, ell, alpha))
    b, B = _b_const(ell, alpha, beta), _B_const(ell, alpha, beta)
    return _two_sided("wedge-1", {"theta": theta, "ell": ell, "alpha": alpha, "beta": beta},
                      (b * sh, mid, b), (mid, B * sh, B),
                      "b_b |r^-b v|_{l,a} <= |v|_{l,a+b} <= B_b |r^-b v|_{l,a}; " + _B_TXT,
                      WedgeField(g, v))


def _wedge_2(rng, p):
    theta, ell, alpha, beta = _wedge_params(rng, p)
    _nonzero(sigma_omega(ell + alpha), "sO(l+a)")
    _nonzero(sigma_omega(ell + alpha + beta + 1), "sO(l+a+b+1)")
    g = _grid(theta)
    v = _random_wedge(rng, g)
    line = sigma_omega(ell + 1 + alpha + beta)
    mid = math.sqrt(_bulk_sq(v, g, ell + 1, alpha + beta))
    # r^-b grad v = (r^(-b-1) r d_r v, r^(-b-1) d_phi v)
    gr = _shift(_rdr(v, g.s, line), g.s, beta + 1)
    gp = _shift(angular_diff(v, g.dphi, 1), g.s, beta + 1)
    sh = math.sqrt(_bulk_sq(gr, g, ell, alpha) + _bulk_sq(gp, g, ell, alpha))
    b, B = _b_const(ell, alpha, beta + 1), _B_const(ell, alpha, beta + 1)
    return _two_sided("wedge-2", {"theta": theta, "ell": ell, "alpha": alpha, "beta": beta},
                      (b * sh, mid, b), (mid, B * sh, B),
                      "b_(b+1) |r^-b grad v|_{l,a} <= |v|_{l+1,a+b} <= B_(b+1) |r^-b grad v|_{l,a}",
                      WedgeField(g, v))


def _wedge_3(rng, p):
    theta, ell, alpha, _ = _wedge_params(rng, p)
    k = int(p.get("k", rng.integers(1, 3)))
    line = sigma_omega(ell + alpha + k)
    _nonzero(line, "sO(l+a+k)")
    g = _grid(theta)
    v = _random_wedge(rng, g)
    const = abs(line) ** (-k)
    lhs = math.sqrt(_bulk_sq(v, g, ell, alpha + k))
    rhs = const * math.sqrt(_bulk_sq(v, g, ell + k, alpha))
    return _case("wedge-3", {"theta": theta, "ell": ell, "alpha": alpha, "k": k}, lhs, rhs, const,
                 "|v|_{l,a+k} <= |sO(l+a+k)|^-k |v|_{l+k,a}", witness=WedgeField(g, v))


def _wedge_4(rng, p):
    theta, ell, alpha, beta = _wedge_params(rng, p)
    _nonzero(sigma_omega(ell + alpha), "sO(l+a)")
    _nonzero(sigma_omega(ell + alpha + beta - 1), "sO(l+a+b-1)")
    g = _grid(theta)
    v = _random_wedge(rng, g)
    line = sigma_omega(ell + alpha + beta)
    const = _b_const(ell, alpha, beta - 1) * abs(line)
    lhs = const * math.sqrt(_bulk_sq(_shift(v, g.s, beta), g, ell, alpha))
    dv = _shift(_rdr(v, g.s, line), g.s, 1.0)
    rhs = math.sqrt(_bulk_sq(dv, g, ell, alpha + beta - 1))
    return _case("wedge-4", {"theta": theta, "ell": ell, "alpha": alpha, "beta": beta}, lhs, rhs,
                 const, "b_(b-1) |sO(l+a+b)| |r^-b v|_{l,a} <= |d_r v|_{l,a+b-1}",
                 witness=WedgeField(g, v))


def _wedge_5(rng, p):
    theta, ell, alpha, beta = _wedge_params(rng, p)
    _nonzero(sigma_omega(ell + alpha), "sO(l+a)")
    _nonzero(sigma_omega(ell + alpha + beta - 1), "sO(l+a+b-1)")
    g = _grid(theta)
    # phi^(l+1) makes d_phi^m v vanish on the lower ray for m <= l
    v = _random_wedge(rng, g) * (g.phi[None, :] / theta) ** (ell + 1)
    b = _b_const(ell, alpha, beta - 1)
    lhs = b * math.sqrt(_bulk_sq(_shift(v, g.s, beta), g, ell, alpha))
    dp = _shift(angular_diff(v, g.dphi, 1), g.s, 1.0)
    rhs = theta * math.sqrt(_bulk_sq(dp, g, ell, alpha + beta - 1))
    return _case("wedge-5", {"theta": theta, "ell": ell, "alpha": alpha, "beta": beta}, lhs, rhs,
                 b / theta, "b_(b-1) |r^-b v|_{l,a} <= theta |r^-1 d_phi v|_{l,a+b-1}",
                 witness=WedgeField(g, v))


# ---------------------------------------------------------------- interpolation

def _interp_weights(rng, p):
    ell = int(p.get("ell", rng.integers(0, 3)))
    beta = p.get("beta", float(rng.uniform(-1.5, 1.5)))
    b1 = p.get("beta1", beta - float(rng.uniform(0.1, 2.0)))
    b2 = p.get("beta2", beta + float(rng.uniform(0.1, 2.0)))
    _need(b1 < beta < b2, "beta1 < beta < beta2")
    return ell, beta, b1, b2


def _interp_eta(rng, p):
    ell = int(p.get("ell", rng.integers(0, 3)))
    beta = p.get("beta", float(rng.uniform(-1.5, 1.5)))
    eta = p.get("eta", beta + float(rng.uniform(0.02, 0.98)))
    _need(beta < eta < beta + 1, "beta < eta < beta + 1")
    return ell, beta, eta


def _interp_const(scale, ell, beta, eta):
    top = scale(ell + beta + 1)
    if top != 0.0:
        _nonzero(top, "sigma(l+beta+1)")
        return abs(top) ** (beta - eta)
    return abs(scale(ell + eta)) ** (2 * (beta - eta))


def interp_bd_sides(v, s, ell, beta, b1, b2):
    a, b = (b2 - beta) / (b2 - b1), (beta - b1) / (b2 - b1)
    n = lambda w: math.sqrt(_ray_sq(v, s, ell, sigma_bd(ell + w)))
    return n(beta), n(b1) ** a * n(b2) ** b


def interp_wedge_sides(v, g, ell, beta, b1, b2):
    a, b = (b2 - beta) / (b2 - b1), (beta - b1) / (b2 - b1)
    n = lambda w: math.sqrt(_bulk_sq(v, g, ell, w))
    return n(beta), n(b1) ** a * n(b2) ** b


def _interp_1(rng, p):
    ell, beta, b1, b2 = _interp_weights(rng, p)
    g = _grid(1.0)
    v = _random_ray(rng, g.s)
    lhs, rhs = interp_bd_sides(v, g.s, ell, beta, b1, b2)
    return _case("interp-1", {"ell": ell, "beta": beta, "beta1": b1, "beta2": b2}, lhs, rhs, 1.0,
                 "|v|_{l,b} <= |v|_{l,b1}^((b2-b)/(b2-b1)) |v|_{l,b2}^((b-b1)/(b2-b1))",
                 witness=BoundaryTrace(g, None, v))


def _interp_2(rng, p):
    ell, beta, eta = _interp_eta(rng, p)
    c = _interp_const(sigma_bd, ell, beta, eta)
    g = _grid(1.0)
    v = _random_ray(rng, g.s)
    lhs = math.sqrt(_ray_sq(v, g.s, ell, sigma_bd(ell + eta)))
    rhs = c * (math.sqrt(_ray_sq(v, g.s, ell, sigma_bd(ell + beta))) ** (1 + beta - eta)
               * math.sqrt(_ray_sq(v, g.s, ell + 1, sigma_bd(ell + 1 + beta))) ** (eta - beta))
    return _case("interp-2", {"ell": ell, "beta": beta, "eta": eta}, lhs, rhs, c,
                 "|v|_{l,e} <= c |v|_{l,b}^(1+b-e) |v|_{l+1,b}^(e-b), c = |sd(l+b+1)|^(b-e) "
                 "or |sd(l+e)|^(2(b-e)) if sd(l+b+1) = 0", witness=BoundaryTrace(g, None, v))


def _interp_3(rng, p):
    ell, beta, b1, b2 = _interp_weights(rng, p)
    theta = p.get("theta", _theta(rng))
    g = _grid(theta)
    v = _random_wedge(rng, g)
    lhs, rhs = interp_wedge_sides(v, g, ell, beta, b1, b2)
    return _case("interp-3", {"theta": theta, "ell": ell, "beta": beta, "beta1": b1, "beta2": b2},
                 lhs, rhs, 1.0,
                 "|v|_{l,b} <= |v|_{l,b1}^((b2-b)/(b2-b1)) |v|_{l,b2}^((b-b1)/(b2-b1)) (wedge)",
                 witness=WedgeField(g, v))


def _interp_4(rng, p):
    ell, beta, eta = _interp_eta(rng, p)
    theta = p.get("theta", _theta(rng))
    c = _interp_const(sigma_omega, ell, beta, eta)
    g = _grid(theta)
    v = _random_wedge(rng, g)
    lhs = math.sqrt(_bulk_sq(v, g, ell, eta))
    rhs = c * (math.sqrt(_bulk_sq(v, g, ell, beta)) ** (1 + beta - eta)
               * math.sqrt(_bulk_sq(v, g, ell + 1, beta)) ** (eta - beta))
    return _case("interp-4", {"theta": theta, "ell": ell, "beta": beta, "eta": eta}, lhs, rhs, c,
                 "|v|_{l,e} <= c_O |v|_{l,b}^(1+b-e) |v|_{l+1,b}^(e-b), c_O = |sO(l+b+1)|^(b-e) "
                 "or |sO(l+e)|^(2(b-e)) if sO(l+b+1) = 0", witness=WedgeField(g, v))


# ---------------------------------------------------------------- traces

def _trace_0(rng, p):
    theta = p.get("theta", _theta(rng))
    alpha = p.get("alpha", float(rng.uniform(-2.0, 2.0)))
    _nonzero(alpha, "alpha")
    c_om = abs(alpha) ** -0.5
    g = _grid(theta)
    v = _random_wedge(rng, g)
    lhs = float(_ray_cols_sq(v, g.s, 0.0, sigma_bd(alpha)).max())
    const = 2.0 + c_om / theta
    rhs = const * math.sqrt(_bulk_sq(v, g, 0, alpha) * _bulk_sq(v, g, 1, alpha))
    return _case("trace-0", {"theta": theta, "alpha": alpha}, lhs, rhs, const,
                 "sup_phi |v(.,phi)|_{0,a}^2 <= (2 + c_O/theta) |v|_{0,a} |v|_{1,a}, c_O = |a|^-1/2",
                 witness=WedgeField(g, v))


def _trace_1(rng, p):
    theta = p.get("theta", _theta(rng))
    ell = int(p.get("ell", rng.integers(1, 4)))
    alpha = p.get("alpha", float(rng.uniform(-2.0, 2.0)))
    _need(ell >= 1, "l >= 1")
    line = sigma_omega(ell + alpha)
    _nonzero(line, "sO(l+a)")
    g = _grid(theta)
    v = _random_wedge(rng, g)
    lhs = float(_ray_cols_sq(v, g.s, ell - 0.5, line).max())
    const = 2.0 + 1.0 / (theta * abs(line))
    rhs = const * _bulk_sq(v, g, ell, alpha)
    return _case("trace-1", {"theta": theta, "ell": ell, "alpha": alpha}, lhs, rhs, const,
                 "sup_phi |v(.,phi)|_{l-1/2,a}^2 <= (2 + (theta |sO(l+a)|)^-1) |v|_{l,a}^2",
                 witness=WedgeField(g, v))


def _tracenorm_params(rng, p):
    theta = p.get("theta", _theta(rng))
    ell = int(p.get("ell", rng.integers(1, 3)))
    alpha = p.get("alpha", float(rng.uniform(-2.0, 2.0)))
    _need(ell >= 1, "l >= 1")
    sig = sigma_omega(ell + alpha)
    _nonzero(sig, "sO(l+a)")
    alpha0 = p.get("alpha0", theta * abs(sig) * float(rng.uniform(1.0, 1.5)))
    _need(theta * abs(sig) <= alpha0, "theta |sO(l+a)| <= alpha0")
    _need(alpha0 <= 4.0, "alpha0 <= 4 (extension stays resolvable)")
    return theta, ell, alpha, alpha0


def _tracenorm_lower(rng, p):
    theta, ell, alpha, alpha0 = _tracenorm_params(rng, p)
    g = _grid(theta)
    v = _random_wedge(rng, g)
    c = tracenorm_constants(theta, ell, alpha, alpha0)["c"]
    lhs = c * math.sqrt(_ray_sq(v[:, -1], g.s, ell - 0.5, sigma_omega(ell + alpha)))
    rhs = math.sqrt(_bulk_sq(v, g, ell, alpha))
    return _case("tracenorm-lower", {"theta": theta, "ell": ell, "alpha": alpha, "alpha0": alpha0},
                 lhs, rhs, c, "c |psi|_{l-1/2,a} <= |v|_{l,a} for every v with v = psi on the ray, "
                 "c = (2 + (theta |sO(l+a)|)^-1)^-1/2", witness=WedgeField(g, v))


def _tracenorm_upper(rng, p):
    theta, ell, alpha, alpha0 = _tracenorm_params(rng, p)
    g = _grid(theta)
    psi = _random_ray(rng, g.s)
    sig = sigma_omega(ell + alpha)
    _tails(psi, g.s, sig)
    try:
        ext = extend_trace(BoundaryTrace(g, None, psi), ell, alpha, alpha0, tail_tol=None)
    except GuardError as exc:
        raise HypothesisError(str(exc)) from exc
    C = tracenorm_constants(theta, ell, alpha, alpha0)["C"]
    lhs = bulk_seminorm(ext.field, ell, alpha, squared=True)
    rhs = C * _ray_sq(psi, g.s, ell - 0.5, sig)
    return _case("tracenorm-upper", {"theta": theta, "ell": ell, "alpha": alpha, "alpha0": alpha0},
                 lhs, rhs, C, "|E psi|_{l,a}^2 <= C |psi|_{l-1/2,a}^2, "
                 "C = (l+1) max{a0 cosh^2 a0, (a0 + sinh a0 cosh a0)/sinh^2 a0}",
                 witness=BoundaryTrace(g, None, psi))


# ---------------------------------------------------------------- bulk weight, inhomogeneous

def _rweight(rng, p):
    theta = p.get("theta", _theta(rng))
    alpha = p.get("alpha", float(rng.uniform(-1.0, 0.0)))
    _need(-1.0 <= alpha < 0.0, "alpha in [-1, 0)")
    g = _grid(theta)
    u = _random_wedge(rng, g)
    lhs = alpha ** 2 * math.sqrt(_bulk_sq(u, g, 0, alpha + 1))
    # |grad u|_{0,0} equals the order-1 seminorm at weight 0
    rhs = (math.sqrt(_bulk_sq(u, g, 0, 0.0)) ** (-alpha)
           * math.sqrt(_bulk_sq(u, g, 1, 0.0)) ** (1 + alpha))
    return _case("rweight", {"theta": theta, "alpha": alpha}, lhs, rhs, alpha ** 2,
                 "|a|^2 |u|_{0,a+1} <= |u|_{0,0}^-a |grad u|_{0,0}^(1+a)", witness=WedgeField(g, u))


def inhom_constant(beta: float, beta1: float, beta2: float) -> float:
    """C_beta from the dyadic-annulus argument on (R/2, R):
    C^2 = 2 (max{1, 2^(-2 b1)} + max{1, 2^(-2 b2)}) / kappa_b with
    kappa_b = int_(1/2)^1 r^(2b) dr/r."""
    kappa = math.log(2.0) if beta == 0 else (1 - 2.0 ** (-2 * beta)) / (2 * beta)
    m = max(1.0, 2.0 ** (-2 * beta1)) + max(1.0, 2.0 ** (-2 * beta2))
    return math.sqrt(2 * m / kappa)


def _inhom(rng, p):
    theta = p.get("theta", _theta(rng))
    beta = p.get("beta", float(rng.uniform(-1.0, 1.0)))
    b1 = p.get("beta1", beta - float(rng.uniform(0.5, 2.0)))
    b2 = p.get("beta2", beta + float(rng.uniform(0.5, 2.0)))
    _need(b1 < beta < b2, "beta1 < beta < beta2")
    L = 25.0 / min(beta - b1, b2 - beta)
    g = _grid(theta, (-L, L), 2048, 17)
    S, PHI = g.mesh()
    cphi = sum((rng.normal() + 1j * rng.normal()) * np.cos(k * np.pi * g.phi / theta)
               for k in range(rng.integers(1, 4)))
    rb = np.exp(beta * S)
    w = _random_wedge(rng, g)
    v = cphi[None, :] * rb * cutoff(np.exp(S)) + w
    ws, wp = trapezoid_weights(g.n_s, g.ds), trapezoid_weights(g.n_phi, g.dphi)
    norm = lambda f, b: math.sqrt(ws @ (np.exp(-2 * b * S) * np.abs(f) ** 2) @ wp)
    A, B = norm(v, b1), norm(v - cphi[None, :] * rb, b2)
    C = inhom_constant(beta, b1, b2)
    lhs = math.sqrt(wp @ np.abs(cphi) ** 2)
    rhs = C * A ** ((b2 - beta) / (b2 - b1)) * B ** ((beta - b1) / (b2 - b1))
    return _case("inhom", {"theta": theta, "beta": beta, "beta1": b1, "beta2": b2}, lhs, rhs, C,
                 "||c|| <= C_b ||r^-b1 v||^((b2-b)/(b2-b1)) ||r^-b2 (v - c r^b)||^((b-b1)/(b2-b1)), "
                 "C_b^2 = 2 (max{1,2^-2b1} + max{1,2^-2b2}) / int_(1/2)^1 r^(2b) dr/r",
                 witness=WedgeField(g, v))


# ---------------------------------------------------------------- auxiliary trig bounds

def _aux_params(rng, p):
    theta = p.get("theta", float(rng.uniform(0.2, 6.0)))
    a0 = p.get("alpha0", float(rng.uniform(0.1, 3.0)))
    a1 = p.get("alpha1", float(rng.uniform(0.05, np.pi / 2)))
    f = p.get("f", str(rng.choice(["sin", "cos"])))
    gname = p.get("g", str(rng.choice(["sin", "cos"])))
    if "lam" in p:
        lam = complex(p["lam"])
    else:
        im = float(rng.choice([-1, 1]) * np.exp(rng.uniform(-4, np.log(30.0))) / theta)
        lam = complex(rng.uniform(-a0, a0) / theta, im)
    _need(0 < a1 <= np.pi / 2, "alpha1 in (0, pi/2]")
    _need(aux_hypotheses(lam, theta, gname, a0, a1), "theta |Re lam| <= alpha0 and dist >= alpha1")
    return theta, a0, a1, f, gname, lam


def _aux_coscos(rng, p):
    theta, a0, a1, f, gname, lam = _aux_params(rng, p)
    C = aux_constant(a0, a1)
    lhs = aux_bounds(lam, theta, f, gname)["integral"]
    return _case("aux-coscos", {"theta": theta, "alpha0": a0, "alpha1": a1, "f": f, "g": gname,
                                "lam": [lam.real, lam.imag]}, lhs, C, C,
                 "|lam| int_0^theta |f(lam phi)|^2/|g(lam theta)|^2 <= "
                 "max{2 a0 cosh^2 a0 / sin^2 a1, (a0 + sinh a0 cosh a0)/sinh^2 a0}")


def _aux_fcosh(rng, p):
    theta, a0, a1, f, gname, lam = _aux_params(rng, p)
    b = aux_bounds(lam, theta, f, gname)
    return _two_sided("aux-fcosh", {"theta": theta, "alpha0": a0, "alpha1": a1, "g": gname,
                                    "lam": [lam.real, lam.imag]},
                      (math.sin(a1), b["abs_g"], 1.0), (b["abs_g"], b["cosh_bound"], 1.0),
                      "sin a1 <= |g(lam theta)| <= cosh(theta Im lam)")


def _complane(rng, p):
    om = p.get("omega", float(rng.uniform(0.0, np.pi / 2)))
    _need(0.0 <= om <= np.pi / 2, "omega in [0, pi/2]")
    if "z" in p:
        z, w = complex(p["z"]), complex(p["w"])
    else:
        z = np.exp(rng.normal()) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        w = np.exp(rng.normal()) * np.exp(1j * (np.angle(z) + rng.uniform(-2 * om, 2 * om)))
    _need(z != 0 and w != 0, "z, w != 0")
    d = abs(np.angle(z / w))
    _need(d <= 2 * om + 1e-15, "|arg z - arg w| <= 2 omega")
    lhs = math.cos(om) * (abs(z) + abs(w))
    rhs = abs(z + w)
    return _case("complane", {"omega": om, "z": [z.real, z.imag], "w": [w.real, w.imag]},
                 lhs, rhs, math.cos(om), "cos(omega) (|z| + |w|) <= |z + w|")


REGISTRY: dict[str, Callable] = {
    "hardy": _hardy,
    "hardy-mel-3": _hardy_mel_3,
    "hardy-mel-4": _hardy_mel_4,
    "hardy-mel-5": _hardy_mel_5,
    "hardy-mel-6": _hardy_mel_6,
    "wedge-1": _wedge_1,
    "wedge-2": _wedge_2,
    "wedge-3": _wedge_3,
    "wedge-4": _wedge_4,
    "wedge-5": _wedge_5,
    "interp-1": _interp_1,
    "interp-2": _interp_2,
    "interp-3": _interp_3,
    "interp-4": _interp_4,
    "trace-0": _trace_0,
    "trace-1": _trace_1,
    "tracenorm-lower": _tracenorm_lower,
    "tracenorm-upper": _tracenorm_upper,
    "rweight": _rweight,
    "inhom": _inhom,
    "aux-coscos": _aux_coscos,
    "aux-fcosh": _aux_fcosh,
    "complane": _complane,
}


# ---------------------------------------------------------------- drivers

def _stream(seed: int, id_: str, i: int):
    tag = sum((k + 1) * ord(ch) for k, ch in enumerate(id_))
    return np.random.default_rng([int(seed), tag, int(i)])


def run_case(id_: str, n: int = 1000, seed: int = 0, params: Optional[dict] = None,
             slack: float = SLACK, max_draws: int = 200, witness_dir=None) -> list[InequalityCase]:
    """n seeded cases of one registry entry.

    Random draws that violate the hypotheses are redrawn (up to max_draws per
    case).  Fixed ``params`` that violate them raise HypothesisError.
    A weighted integrand that fails to decay raises QuadratureDivergence.
    Failing cases have their test function written to ``witness_dir``.
    """
    if id_ not in REGISTRY:
        raise KeyError(f"unknown inequality {id_!r}; known: {sorted(REGISTRY)}")
    fn = REGISTRY[id_]
    params = dict(params or {})
    out = []
    for i in range(n):
        for draw in range(max_draws):
            rng = _stream(seed, id_, i * max_draws + draw)
            try:
                case = fn(rng, params)
                break
            except HypothesisError:
                if params and draw == 0 and _fixed_only(id_, params):
                    raise
        else:
            raise HypothesisError(f"{id_}: no admissible draw in {max_draws} attempts")
        case.seed = [int(seed), i, draw]
        case.finish(slack)
        if not case.passed and witness_dir is not None and case.witness is not None:
            path = Path(witness_dir) / f"witness_{id_}_{seed}_{i}.txt"
            path.parent.mkdir(parents=True, exist_ok=True)
            save_field(path, case.witness, {"id": id_, "params": case.params})
        out.append(case)
    return out


_RANDOM_KEYS = {"theta", "ell", "alpha", "beta", "beta1", "beta2", "eta", "s", "k", "alpha0",
                "alpha1", "f", "g", "lam", "omega", "z", "w"}


def _fixed_only(id_: str, params: dict) -> bool:
    """True when the caller pinned every parameter that the draw checks, so a
    rejection cannot be cured by redrawing."""
    pinned = {"hardy": {"beta"}, "complane": {"omega", "z", "w"}}
    need = pinned.get(id_)
    return need is not None and need <= set(params)


def summarize(cases: list[InequalityCase]) -> dict:
    fails = [c for c in cases if not c.passed]
    worst = min(cases, key=lambda c: c.margin / max(abs(c.rhs), 1e-300)) if cases else None
    return {
        "n": len(cases),
        "passed": len(cases) - len(fails),
        "failed": len(fails),
        "formula": cases[0].formula if cases else "",
        "worst_relative_margin": (worst.margin / max(abs(worst.rhs), 1e-300)) if worst else None,
        "max_ratio": max(c.ratio for c in cases) if cases else None,
        "worst_case": worst.to_json() if worst else None,
        "failures": [c.to_json() for c in fails[:20]],
    }


# ---------------------------------------------------------------- sharpness

def sharpness_probe(id_: str) -> dict:
    """Deterministic near-equality configurations; returns the best lhs/rhs.

    complane: z = 1, w = exp(2 i omega) gives equality for every omega.
    interp-1/3: Hoelder's inequality is attained in the limit of test
    functions concentrated at one radius, so a narrow log-Gaussian comes
    within O(width^2) of equality.
    """
    if id_ == "complane":
        best = 0.0
        for om in np.linspace(0.0, np.pi / 2, 9):
            c = _complane(np.random.default_rng(0), {"omega": float(om), "z": 1.0, "w": complex(np.exp(2j * om))})
            best = max(best, c.ratio)
        return {"id": id_, "best_ratio": best}
    g = make_grid(1.0, -4.0, 4.0, 1024, 17)
    width = 0.15
    prof = np.exp(-(g.s / width) ** 2)
    if id_ == "interp-1":
        lhs, rhs = interp_bd_sides(prof.astype(complex), g.s, 0, 0.3, -0.2, 0.8)
    elif id_ == "interp-3":
        v = np.outer(prof, np.ones(g.n_phi)).astype(complex)
        lhs, rhs = interp_wedge_sides(v, g, 0, 0.3, -0.2, 0.8)
    else:
        raise KeyError(f"no sharpness probe for {id_!r}")
    return {"id": id_, "best_ratio": lhs / rhs, "width": width}


SHARPNESS_IDS = ("complane", "interp-1", "interp-3")


def run_suite(n: int = 1000, seed: int = 0, ids=None, witness_dir=None) -> dict:
    """All registry entries plus sharpness probes, as a JSON-ready report."""
    ids = list(REGISTRY) if ids is None else list(ids)
    results = {}
    for id_ in ids:
        try:
            results[id_] = summarize(run_case(id_, n, seed, witness_dir=witness_dir))
        except QuadratureDivergence as exc:
            results[id_] = {"n": 0, "passed": 0, "failed": 0, "error": "quadrature_divergence",
                            "message": str(exc)}
    sharp = {i: sharpness_probe(i) for i in SHARPNESS_IDS if i in ids or ids == list(REGISTRY)}
    total_fail = sum(r.get("failed", 0) for r in results.values())
    errors = sum(1 for r in results.values() if "error" in r)
    return {"seed": int(seed), "cases_per_id": int(n), "slack": SLACK, "results": results,
            "sharpness": sharp, "failures": int(total_fail), "errors": int(errors)}


def dumps(report: dict) -> str:
    return json.dumps(report, indent=1, sort_keys=True, default=float)
