"""Angular two-point problem in Mellin variables.

For complex lambda away from (pi/theta) Z we solve

    (lambda^2 + d_phi^2) v = f on (0, theta),   -v'(0) = g1,   v'(theta) = g2

through its Green's function

    G(lambda, phi, phi') = cos(lambda phi_<) cos(lambda (theta - phi_>)) / (lambda sin(lambda theta)),

so that v = -G(., 0) g1 - G(., theta) g2 + int G f.  The kernels are
evaluated in a factored exponential form that stays bounded for large
|Im lambda|.  The phi'-integral uses Gauss-Legendre panels split at phi and
graded geometrically towards it, which restores high-order accuracy across
the kink of the kernel.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import make_interp_spline

__all__ = [
    "PoleError",
    "pole_distance",
    "green_kernel",
    "green_kernel_dphi",
    "AngularProblem",
    "AngularSolution",
    "solve_angular",
    "solve_angular_batch",
    "angular_residual",
    "aux_constant",
    "aux_bounds",
    "apriori_constant",
    "apriori_bound_check",
    "ResidueTerm",
    "residue_at_pole",
    "grid_integral",
]

EPS_POLE = 1e-8


class PoleError(ValueError):
    """lambda * theta is too close to pi * Z."""


def pole_distance(lam, theta: float):
    z = np.asarray(lam, dtype=complex) * theta
    return np.abs(z - np.pi * np.round(z.real / np.pi))


def _guard(lam, theta, eps):
    d = pole_distance(lam, theta)
    if np.any(d < eps):
        bad = np.atleast_1d(np.asarray(lam))[np.atleast_1d(d) < eps][0]
        raise PoleError(f"lambda={bad} is within {eps:g} of a pole k*pi/theta")


def _kernels(lam, x, y, theta):
    """G and d_phi G for target x and source y (broadcast)."""
    lam = np.asarray(lam, dtype=complex)
    lp = np.where(lam.imag < 0, -lam, lam)
    E = lambda d: np.exp(1j * lp * d)  # noqa: E731 - bounded by 1 for d >= 0
    den = E(2 * theta) - 1.0
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    low = x <= y
    xa, ya = np.minimum(x, y), np.maximum(x, y)
    a = E(ya - xa)
    G = 1j * a * (1 + E(2 * xa)) * (1 + E(2 * (theta - ya))) / (2 * lp * den)
    dlow = -a * (E(2 * x) - 1) * (E(2 * (theta - y)) + 1) / (2 * den)
    dup = a * (E(2 * y) + 1) * (E(2 * (theta - x)) - 1) / (2 * den)
    dG = np.where(low, dlow, dup)
    return G, dG


def green_kernel(lam, theta: float, phi, phip, eps_pole: float = EPS_POLE):
    """Closed-form Green's function (symmetric in phi, phi')."""
    _guard(lam, theta, eps_pole)
    G, _ = _kernels(lam, phi, phip, theta)
    return G


def green_kernel_dphi(lam, theta: float, phi, phip, eps_pole: float = EPS_POLE):
    """d/dphi of the Green's function; at phi == phi' the phi < phi' side is used."""
    _guard(lam, theta, eps_pole)
    _, dG = _kernels(lam, phi, phip, theta)
    return dG


# ---------------------------------------------------------------- quadrature plan

@lru_cache(maxsize=32)
def _panel_plan(theta: float, targets: tuple, n_gl: int, levels: int):
    """Quadrature nodes/weights for int_0^theta h(phi') dphi' at each target,
    split at the target and graded towards it.  Shapes (n_targets, n_nodes)."""
    xg, wg = leggauss(n_gl)
    x = np.asarray(targets)[:, None]
    fr = np.concatenate([[0.0], 2.0 ** -np.arange(levels, -1, -1)])  # 0, 2^-K, ..., 1
    lo_f, hi_f = fr[:-1], fr[1:]
    nodes, weights = [], []
    for side in (0, 1):
        L = x if side == 0 else theta - x          # interval length
        for a, b in zip(lo_f, hi_f):
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            d = (mid + half * xg)[None, :] * L      # distance from the target
            pts = x - d if side == 0 else x + d
            nodes.append(pts)
            weights.append(np.broadcast_to(half * wg[None, :] * L, pts.shape))
    nodes = np.concatenate(nodes, axis=1)
    weights = np.concatenate(weights, axis=1)
    return np.clip(nodes, 0.0, theta), weights


@lru_cache(maxsize=32)
def _interp_matrix(theta: float, n_phi: int, points: tuple) -> np.ndarray:
    """Spline (degree 7) interpolation matrix from the uniform grid to points."""
    grid = np.linspace(0.0, theta, n_phi)
    k = min(7, n_phi - 1)
    spl = make_interp_spline(grid, np.eye(n_phi), k=k)
    return spl(np.asarray(points))


def grid_integral(values: np.ndarray, theta: float, weight: Optional[Callable] = None,
                  n_gl: int = 64) -> np.ndarray:
    """High-order integral over (0, theta) of weight(phi) * values, values on a
    uniform grid along the last axis."""
    values = np.asarray(values, dtype=complex)
    xg, wg = leggauss(n_gl)
    pts = 0.5 * theta * (xg + 1)
    P = _interp_matrix(float(theta), values.shape[-1], tuple(pts))
    w = 0.5 * theta * wg * (1.0 if weight is None else weight(pts))
    return values @ (P.T @ w)


# ---------------------------------------------------------------- problems

FData = Union[None, np.ndarray, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class AngularProblem:
    lam: complex
    theta: float
    f: FData = None
    g1: complex = 0.0
    g2: complex = 0.0

    def f_at(self, phi: np.ndarray) -> np.ndarray:
        if self.f is None:
            return np.zeros(np.shape(phi), dtype=complex)
        if callable(self.f):
            return np.asarray(self.f(np.asarray(phi)), dtype=complex)
        arr = np.asarray(self.f, dtype=complex)
        P = _interp_matrix(float(self.theta), len(arr), tuple(np.ravel(phi)))
        return (P @ arr).reshape(np.shape(phi))


@dataclass(frozen=True)
class AngularSolution:
    problem: AngularProblem
    phi: np.ndarray
    values: np.ndarray
    dphi_values: np.ndarray

    def evaluate(self, phi) -> tuple[np.ndarray, np.ndarray]:
        return _solve_points(self.problem, np.asarray(phi, dtype=float))


def _solve_points(p: AngularProblem, phi: np.ndarray, n_gl: int = 10, levels: int = 14):
    th = float(p.theta)
    nodes, w = _panel_plan(th, tuple(np.ravel(phi)), n_gl, levels)
    x = np.ravel(phi)[:, None]
    G, dG = _kernels(p.lam, x, nodes, th)
    fn = p.f_at(nodes)
    v = np.sum(G * w * fn, axis=1)
    dv = np.sum(dG * w * fn, axis=1)
    G0, dG0 = _kernels(p.lam, x[:, 0], np.zeros(1), th)
    dG0 = np.where(x[:, 0] > 0, dG0, 1.0)  # outward side at phi' = 0
    Gt, dGt = _kernels(p.lam, x[:, 0], np.full(1, th), th)
    v = v - G0 * p.g1 - Gt * p.g2
    dv = dv - dG0 * p.g1 - dGt * p.g2
    return v.reshape(np.shape(phi)), dv.reshape(np.shape(phi))


def solve_angular(p: AngularProblem, phi: Optional[np.ndarray] = None,
                  eps_pole: float = EPS_POLE) -> AngularSolution:
    """Solve one angular problem; returns values and phi-derivative at ``phi``
    (default: the uniform grid of the data, or 65 uniform points)."""
    _guard(p.lam, p.theta, eps_pole)
    if not np.all(np.isfinite([p.g1, p.g2])):
        raise ValueError("non-finite boundary data")
    if phi is None:
        n = len(p.f) if isinstance(p.f, np.ndarray) else 65
        phi = np.linspace(0.0, p.theta, n)
    if isinstance(p.f, np.ndarray) and not np.all(np.isfinite(p.f)):
        raise ValueError("non-finite source data")
    v, dv = _solve_points(p, np.asarray(phi, dtype=float))
    return AngularSolution(p, np.asarray(phi, dtype=float), v, dv)


def solve_angular_batch(lams: np.ndarray, theta: float, f_grid: Optional[np.ndarray],
                        g1: np.ndarray, g2: np.ndarray, phi_out: np.ndarray,
                        n_gl: int = 10, levels: int = 14, chunk: int = 32,
                        eps_pole: float = EPS_POLE) -> tuple[np.ndarray, np.ndarray]:
    """Solve many angular problems sharing the angular grid.

    f_grid has shape (n_lam, n_phi) on the uniform grid of [0, theta] (or None);
    returns (v, dv) of shape (n_lam, len(phi_out)).
    """
    lams = np.asarray(lams, dtype=complex)
    _guard(lams, theta, eps_pole)
    th = float(theta)
    x = np.asarray(phi_out, dtype=float)
    nodes, w = _panel_plan(th, tuple(x), n_gl, levels)
    nt, nn = nodes.shape
    P = None
    if f_grid is not None:
        f_grid = np.asarray(f_grid, dtype=complex)
        P = _interp_matrix(th, f_grid.shape[1], tuple(nodes.ravel()))
    g1 = np.broadcast_to(np.asarray(g1, dtype=complex), lams.shape)
    g2 = np.broadcast_to(np.asarray(g2, dtype=complex), lams.shape)
    V = np.empty((len(lams), nt), dtype=complex)
    DV = np.empty_like(V)
    for a in range(0, len(lams), chunk):
        L = lams[a:a + chunk][:, None]
        G0, dG0 = _kernels(L, x[None, :], np.zeros((1, 1)), th)
        dG0 = np.where(x[None, :] > 0, dG0, 1.0)
        Gt, dGt = _kernels(L, x[None, :], np.full((1, 1), th), th)
        v = -G0 * g1[a:a + chunk, None] - Gt * g2[a:a + chunk, None]
        dv = -dG0 * g1[a:a + chunk, None] - dGt * g2[a:a + chunk, None]
        if P is not None:
            fn = (f_grid[a:a + chunk] @ P.T).reshape(-1, nt, nn)
            G, dG = _kernels(L[:, :, None], x[None, :, None], nodes[None], th)
            v = v + np.sum(G * (w * fn), axis=2)
            dv = dv + np.sum(dG * (w * fn), axis=2)
        V[a:a + chunk] = v
        DV[a:a + chunk] = dv
    return V, DV


def angular_residual(p: AngularProblem, n_cheb: int = 48) -> dict:
    """ODE and boundary residuals of the Green solution, by Chebyshev
    differentiation on Chebyshev-Lobatto points; scaled by 1 + ||data||."""
    th = p.theta
    xc = np.cos(np.pi * np.arange(n_cheb) / (n_cheb - 1))[::-1]
    phi = 0.5 * th * (xc + 1)
    v, dv = _solve_points(p, phi)
    coef = C.chebfit(xc, v, n_cheb - 1)
    d2 = C.chebval(xc, C.chebder(coef, 2)) * (2.0 / th) ** 2
    d1 = C.chebval(xc, C.chebder(coef, 1)) * (2.0 / th)
    f = p.f_at(phi)
    scale = 1.0 + np.abs(f).max() + abs(p.g1) + abs(p.g2)
    return {
        "ode": float(np.abs(p.lam ** 2 * v + d2 - f).max() / scale),
        "bc_lower": float(abs(-dv[0] - p.g1) / scale),
        "bc_upper": float(abs(dv[-1] - p.g2) / scale),
        "dphi_consistency": float(np.abs(d1 - dv).max() / scale),
    }


# ---------------------------------------------------------------- bounds

def aux_constant(alpha0: float, alpha1: float) -> float:
    """Explicit constant bounding |lambda| int |f(lambda phi)|^2 / |g(lambda theta)|^2."""
    a, b = alpha0, alpha1
    return max(2 * a * np.cosh(a) ** 2 / np.sin(b) ** 2,
               (a + np.sinh(a) * np.cosh(a)) / np.sinh(a) ** 2)


def aux_bounds(lam: complex, theta: float, f: str, g: str, n_quad: int = 400) -> dict:
    """Both quantities of the auxiliary estimate for trig functions f, g."""
    fn = {"sin": np.sin, "cos": np.cos}
    xg, wg = leggauss(n_quad)
    phi = 0.5 * theta * (xg + 1)
    gval = abs(fn[g](lam * theta))
    integral = abs(lam) * float(np.sum(0.5 * theta * wg * np.abs(fn[f](lam * phi)) ** 2)) / gval ** 2
    return {"abs_g": gval, "cosh_bound": float(np.cosh(theta * lam.imag)), "integral": integral}


def aux_hypotheses(lam: complex, theta: float, g: str, alpha0: float, alpha1: float) -> bool:
    x = theta * abs(lam.real)
    zeros_shift = 0.0 if g == "sin" else np.pi / 2
    d = abs(x - zeros_shift - np.pi * np.round((x - zeros_shift) / np.pi))
    return bool(x <= alpha0 and d >= alpha1 and 0 < alpha1 <= np.pi / 2)


def apriori_constant(ell: int, alpha0: float, alpha1: float) -> float:
    """Explicit constant for the a-priori bound, assembled along the proof.

    Boundary part: each of the l+3 terms is bounded through the auxiliary
    estimate, giving 2 (l+3) C_aux.  Source part: an energy estimate for
    theta |Im lambda| >= 2 alpha0 and a kernel bound with
    M = cosh^2(2 alpha0) / sin(alpha1) otherwise give
    |lambda|^2 ||v||^2 + ||v'||^2 <= K |lambda|^-2 ||f||^2 with
    K = max(40/9, 10 M^2 alpha0^2); the equation lifts this to order l+2.
    The two parts combine with a factor 2.
    """
    c_aux = aux_constant(alpha0, alpha1)
    c_g = 2 * (ell + 3) * c_aux
    M = np.cosh(2 * alpha0) ** 2 / np.sin(alpha1)
    K = max(40.0 / 9.0, 10.0 * M ** 2 * alpha0 ** 2)
    c_f = sum(2 ** (m // 2) * K + 2 ** (m // 2 + 1) - 2 for m in range(ell + 3))
    return 2.0 * max(c_g, c_f)


def _poly_derivs(p: AngularProblem, ell: int, n_cheb: int):
    """Samples of d^m v (m <= l+2) and d^m f (m <= l) on Gauss points."""
    th = p.theta
    xg, wg = leggauss(n_cheb)
    phi = 0.5 * th * (xg + 1)
    wq = 0.5 * th * wg
    v, dv = _solve_points(p, phi)
    # derivatives of f via Chebyshev interpolation of the data
    xc = np.cos(np.pi * np.arange(n_cheb) / (n_cheb - 1))
    fc = C.chebfit(xc, p.f_at(0.5 * th * (xc + 1)), n_cheb - 1)
    fder = [C.chebval(xg, C.chebder(fc, m)) * (2.0 / th) ** m if m else p.f_at(phi)
            for m in range(ell + 1)]
    vder = [v, dv]
    for m in range(2, ell + 3):
        vder.append(fder[m - 2] - p.lam ** 2 * vder[m - 2])
    return vder, fder, wq


def apriori_bound_check(p: AngularProblem, ell: int, alpha0: float, alpha1: float,
                        n_quad: int = 96) -> tuple[float, float]:
    """(lhs, rhs) of the a-priori estimate with the explicit constant.

    Requires theta |Re lambda| <= alpha0 and dist(theta |Re lambda|, pi Z) >= alpha1.
    """
    lam = complex(p.lam)
    if not aux_hypotheses(lam, p.theta, "sin", alpha0, alpha1):
        raise ValueError("a-priori bound hypotheses violated for this lambda")
    vder, fder, wq = _poly_derivs(p, ell, n_quad)
    a = abs(lam)
    lhs = sum(a ** (2 * (ell + 2 - m)) * float(wq @ np.abs(vder[m]) ** 2) for m in range(ell + 3))
    rhs_data = sum(a ** (2 * (ell - m)) * float(wq @ np.abs(fder[m]) ** 2) for m in range(ell + 1))
    rhs_data += a ** (2 * ell + 1) * (abs(p.g1) ** 2 + abs(p.g2) ** 2)
    return float(lhs), float(apriori_constant(ell, alpha0, alpha1) * rhs_data)


# ---------------------------------------------------------------- residues

@dataclass(frozen=True)
class ResidueTerm:
    """Residue of r^lambda v(lambda, phi) at lambda = k pi / theta.

    k != 0: coefficient * r^(pi_k) cos(pi_k phi).
    k == 0: constant + log_coefficient * ln r (no phi dependence).
    """

    k: int
    theta: float
    coefficient: complex
    log_coefficient: complex = 0.0

    @property
    def exponent(self) -> float:
        return self.k * np.pi / self.theta

    def evaluate(self, r: np.ndarray, phi: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)[:, None]
        phi = np.asarray(phi, dtype=float)[None, :]
        if self.k == 0:
            return (self.coefficient + self.log_coefficient * np.log(r)) * np.ones_like(phi)
        q = self.exponent
        return self.coefficient * r ** q * np.cos(q * phi)

    def scaled(self, a: complex) -> "ResidueTerm":
        return ResidueTerm(self.k, self.theta, a * self.coefficient, a * self.log_coefficient)


DataFn = Callable[[complex], tuple]


def _pole_bracket(k: int, theta: float, data: Union[DataFn, tuple]):
    lam = k * np.pi / theta
    f, g1, g2 = data(lam) if callable(data) else data
    if k == 0:
        w = None
    else:
        w = lambda ph: np.cos(lam * ph)  # noqa: E731
    fint = 0.0 if f is None else complex(grid_integral(np.asarray(f), theta, w))
    sign = (-1) ** k
    return -g1 - sign * g2 + fint


def residue_at_pole(k: int, theta: float, data: Union[DataFn, tuple], h: float = 1e-3) -> ResidueTerm:
    """Residue term at pi_k = k pi / theta.

    ``data`` is either a tuple (f_grid, g1, g2) evaluated at the pole, or a
    callable lambda -> (f_grid, g1, g2); the callable form is required for
    k = 0, where the lambda-derivative of the bracket is taken with a
    fourth-order central stencil of step h.
    """
    if k != 0:
        bracket = _pole_bracket(k, theta, data)
        lam = k * np.pi / theta
        return ResidueTerm(k, theta, complex(bracket / (lam * theta)))
    if not callable(data):
        raise ValueError("k = 0 needs the data as a function of lambda")
    D = lambda z: _pole_bracket_at(z, theta, data)  # noqa: E731
    d0 = D(0.0)
    dd = (-D(2 * h) + 8 * D(h) - 8 * D(-h) + D(-2 * h)) / (12 * h)
    return ResidueTerm(0, theta, complex(dd / theta), complex(d0 / theta))


def _pole_bracket_at(lam: complex, theta: float, data: DataFn) -> complex:
    f, g1, g2 = data(lam)
    fint = 0.0 if f is None else complex(grid_integral(np.asarray(f), theta))
    return -g1 - g2 + fint
