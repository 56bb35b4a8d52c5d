"""Neumann problem on the wedge by Mellin inversion along a vertical contour.

Solves  Delta v = f  in the wedge,  d_nu v = g  on both rays, with the outer
normal derivative -r^-1 d_phi on phi = 0 and +r^-1 d_phi on phi = theta.
In s = ln r the problem reads (d_s^2 + d_phi^2) v = e^(2s) f, so after the
transform each contour node gives the angular problem

    (lambda^2 + d_phi^2) v^ = f^,   -v^'(0) = g1^,   v^'(theta) = g2^

with f^ = M[e^(2s) f], g1^ = M[e^s g_lower], g2^ = M[e^s g_upper].

Solutions decay only like e^(-gap |s|), gap being the distance from the
contour to the nearest pole, so the s-window is zero-padded before the
inverse FFT and restricted afterwards.  Without padding the periodic
inverse aliases the slow tails back into the window.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .angular_green import (ResidueTerm, aux_constant, apriori_constant, residue_at_pole,
                            solve_angular_batch)
from .discretization import BoundaryTrace, LogPolarGrid, WedgeField, diff_matrix
from .guards import ALPHA1_DEFAULT, GuardError, check_resonance, dist_pi_z
from .norms import (ExpansionTerm, SingularExpansion, _ret, boundary_seminorm, bulk_seminorm,
                    sigma_omega, trapezoid_weights)
from .transforms import SQRT2PI, contour_eval, contour_forward, contour_inverse

__all__ = [
    "NeumannSolution",
    "KernelElement",
    "solve_neumann",
    "kernel_between",
    "laplacian_residual",
    "neumann_residual",
    "extend_trace",
    "TraceExtension",
    "mellin_bulk_seminorm",
    "redsol_constant",
    "redsol_check",
    "tracenorm_constants",
]

SKIP_TOL = 1e-15


# ---------------------------------------------------------------- helpers

def _padded_grid(grid: LogPolarGrid, pad_factor: int) -> tuple[LogPolarGrid, slice]:
    if pad_factor < 1 or pad_factor & (pad_factor - 1):
        raise ValueError("pad_factor must be a power of two")
    n = grid.n_s * pad_factor
    extra = (n - grid.n_s) // 2
    h = grid.ds
    s0 = grid.s_min - extra * h
    pg = LogPolarGrid(grid.theta, s0, s0 + (n - 1) * h, n, grid.n_phi)
    return pg, slice(extra, extra + grid.n_s)


def _pad(values: np.ndarray, n: int, sl: slice) -> np.ndarray:
    out = np.zeros((n,) + values.shape[1:], dtype=complex)
    out[sl] = values
    return out


def _data_arrays(f: Optional[WedgeField], g: Optional[BoundaryTrace], grid: LogPolarGrid):
    """e^(2s) f and e^s (g_lower, g_upper) on the grid of the data."""
    s = grid.s
    F = np.zeros(grid.shape, complex) if f is None else np.exp(2 * s)[:, None] * f.values
    if g is None:
        G1 = G2 = np.zeros(grid.n_s, complex)
    else:
        lo, hi = g.full()
        G1, G2 = np.exp(s) * lo, np.exp(s) * hi
    return F, G1, G2


def _grid_of(f, g) -> LogPolarGrid:
    if f is not None:
        return f.grid
    if g is not None:
        return g.grid
    raise ValueError("need at least one of f, g")


# ---------------------------------------------------------------- types

@dataclass(frozen=True)
class KernelElement:
    """A residue term together with the pair of contours that produced it.

    Summing the elements gives v(sigma_from) - v(sigma_to).
    """

    term: ResidueTerm
    sigma_from: float
    sigma_to: float

    @property
    def k(self) -> int:
        return self.term.k

    @property
    def exponent(self) -> float:
        return self.term.exponent

    def evaluate(self, grid: LogPolarGrid) -> np.ndarray:
        return self.term.evaluate(grid.r, grid.phi)


@dataclass(frozen=True)
class NeumannSolution:
    field: WedgeField
    contour_re: float
    ell: int
    alpha: float
    padded_grid: LogPolarGrid
    window: slice
    lam_im: np.ndarray                      # contour nodes on the padded grid
    v_hat: np.ndarray                       # (n_pad, n_phi)
    dv_hat: np.ndarray                      # phi-derivative of v_hat
    data: tuple = dc_field(repr=False, default=(None, None))

    @property
    def lam(self) -> np.ndarray:
        return self.contour_re + 1j * self.lam_im

    @property
    def anchor_value(self) -> complex:
        """v(r=1, phi=0) exactly as produced by the contour formula."""
        g = self.field.grid
        i = int(np.argmin(np.abs(g.s)))
        return complex(self.field.values[i, 0])

    def expansion_between(self, sigma_other: float, alpha1: float = ALPHA1_DEFAULT) -> SingularExpansion:
        """Kernel elements separating this solution from the one on Re lambda = sigma_other,
        as a singular expansion of v(this) - v(other)."""
        f, g = self.data
        elems = _kernel_elements(f, g, self.contour_re, sigma_other, alpha1)
        phi = self.field.grid.phi
        terms = []
        for e in elems:
            t = e.term
            if t.k == 0:
                terms.append(ExpansionTerm(0.0, np.full(phi.shape, t.coefficient), (0, 0),
                                           np.full(phi.shape, t.log_coefficient)))
            else:
                terms.append(ExpansionTerm(t.exponent, t.coefficient * np.cos(t.exponent * phi), (0, t.k)))
        return SingularExpansion(self.field.grid.theta, tuple(terms))


# ---------------------------------------------------------------- solver

def solve_neumann(f: Optional[WedgeField], g: Optional[BoundaryTrace], ell: int, alpha: float,
                  *, alpha1: float = ALPHA1_DEFAULT, pad_factor: int = 8,
                  n_gl: int = 10, levels: int = 14) -> NeumannSolution:
    """Solve on the contour Re lambda = l + alpha + 1 (no constants adjusted)."""
    grid = _grid_of(f, g)
    theta = grid.theta
    sigma = float(sigma_omega(ell + alpha + 2))
    check_resonance(theta, sigma, alpha1, "sigma_Omega(l+alpha+2)")
    F, G1, G2 = _data_arrays(f, g, grid)
    pg, sl = _padded_grid(grid, pad_factor)
    s = pg.s
    omega, Fh = contour_forward(_pad(F, pg.n_s, sl), s, sigma)
    _, G1h = contour_forward(_pad(G1, pg.n_s, sl), s, sigma)
    _, G2h = contour_forward(_pad(G2, pg.n_s, sl), s, sigma)
    mag = np.maximum(np.abs(Fh).max(axis=1), np.maximum(np.abs(G1h), np.abs(G2h)))
    keep = mag > SKIP_TOL * max(mag.max(), 1e-300)
    V = np.zeros((pg.n_s, pg.n_phi), complex)
    DV = np.zeros_like(V)
    if keep.any():
        lam = sigma + 1j * omega[keep]
        f_grid = Fh[keep] if f is not None else None
        V[keep], DV[keep] = solve_angular_batch(lam, theta, f_grid, G1h[keep], G2h[keep],
                                                pg.phi, n_gl=n_gl, levels=levels)
    v = contour_inverse(V, omega, s, sigma)[sl]
    return NeumannSolution(WedgeField(grid, v), sigma, ell, float(alpha), pg, sl, omega, V, DV, (f, g))


# ---------------------------------------------------------------- residuals

def laplacian_residual(sol: NeumannSolution, f: Optional[WedgeField], phi_order: int = 4) -> float:
    """Relative interior residual of r^2 Delta v = r^2 f over the data window.

    Both sides carry the contour weight r^-sigma, the scale on which the
    representation is accurate; unweighted, round-off is amplified by
    r^sigma at the outer end of the window.  (r d_r)^2 is applied spectrally
    on the contour (lambda^2 v^), d_phi^2 by finite differences of the given
    order.  Returns the absolute weighted residual when f = 0.
    """
    pg = sol.padded_grid
    s = pg.s
    v = contour_inverse(sol.v_hat, sol.lam_im, s, sol.contour_re)
    vss = contour_inverse(sol.lam[:, None] ** 2 * sol.v_hat, sol.lam_im, s, sol.contour_re)
    D2 = diff_matrix(pg.n_phi, pg.dphi, 2, phi_order)
    lap = vss + v @ D2.T
    grid = sol.field.grid
    rhs = np.zeros(grid.shape, complex) if f is None else np.exp(2 * grid.s)[:, None] * f.values
    wt = np.exp(-sol.contour_re * grid.s)[:, None]
    res = np.abs(wt * (lap[sol.window] - rhs)).max()
    scale = np.abs(wt * rhs).max()
    return float(res / scale) if scale > 0 else float(res)


def neumann_residual(sol: NeumannSolution, g: Optional[BoundaryTrace], phi_order: int = 4,
                     use_fd: bool = True) -> float:
    """max over both rays of |d_nu v - g|, measured as r d_nu v against r g and
    scaled by max |r g| (absolute when g = 0), all with the contour weight r^-sigma.

    With ``use_fd`` the angular derivative is a one-sided difference of v;
    otherwise the exact derivative of the Green representation is used.
    """
    grid = sol.field.grid
    sl = sol.window
    if use_fd:
        D1 = diff_matrix(grid.n_phi, grid.dphi, 1, phi_order)
        v = sol.field.values
        d0, d1 = v @ D1[0], v @ D1[-1]
    else:
        pg = sol.padded_grid
        dv = contour_inverse(sol.dv_hat, sol.lam_im, pg.s, sol.contour_re)[sl]
        d0, d1 = dv[:, 0], dv[:, -1]
    G1 = G2 = np.zeros(grid.n_s, complex)
    if g is not None:
        lo, hi = g.full()
        G1, G2 = np.exp(grid.s) * lo, np.exp(grid.s) * hi
    wt = np.exp(-sol.contour_re * grid.s)
    res = max(np.abs(wt * (-d0 - G1)).max(), np.abs(wt * (d1 - G2)).max())
    scale = max(np.abs(wt * G1).max(), np.abs(wt * G2).max())
    return float(res / scale) if scale > 0 else float(res)


# ---------------------------------------------------------------- kernel elements

def _data_fn(f, g):
    grid = _grid_of(f, g)
    F, G1, G2 = _data_arrays(f, g, grid)
    s = grid.s
    has_f = f is not None

    def data(lam):
        lam = np.asarray([lam], dtype=complex)
        fh = contour_eval(F, s, lam)[0] if has_f else None
        return fh, complex(contour_eval(G1, s, lam)[0]), complex(contour_eval(G2, s, lam)[0])
    return data


def _kernel_elements(f, g, sigma1: float, sigma2: float, alpha1: float) -> list[KernelElement]:
    theta = _grid_of(f, g).theta
    for sg in (sigma1, sigma2):
        check_resonance(theta, sg, alpha1, "contour")
    lo, hi = sorted((sigma1, sigma2))
    sign = 1.0 if sigma1 > sigma2 else -1.0
    p = np.pi / theta
    ks = [k for k in range(int(np.floor(lo / p)), int(np.ceil(hi / p)) + 1) if lo < k * p < hi]
    data = _data_fn(f, g)
    out = []
    for k in ks:
        # the inverse transform carries (2 pi)^(-1/2); closing the contour gives 2 pi i
        term = residue_at_pole(abs(k), theta, data).scaled(sign * SQRT2PI)
        out.append(KernelElement(term, float(sigma1), float(sigma2)))
    return out


def kernel_between(f: Optional[WedgeField], g: Optional[BoundaryTrace],
                   level1: tuple, level2: tuple, alpha1: float = ALPHA1_DEFAULT) -> list[KernelElement]:
    """Kernel elements K with solve_neumann(level1) - solve_neumann(level2) = sum K.

    Each level is a pair (l, alpha) fixing the contour Re lambda = l + alpha + 1.
    Poles k pi/theta strictly between the two contours contribute one element
    each; negative k occur when a contour lies left of zero.
    """
    s1 = float(sigma_omega(level1[0] + level1[1] + 2))
    s2 = float(sigma_omega(level2[0] + level2[1] + 2))
    return _kernel_elements(f, g, s1, s2, alpha1)


# ---------------------------------------------------------------- trace extension

def mellin_bulk_seminorm(v_hat: np.ndarray, lam: np.ndarray, d_omega: float, dphi: float,
                         ell: int, squared: bool = False) -> float:
    """Seminorm of order l from contour samples v^(lambda_k, phi_j)."""
    from .norms import angular_diff
    wp = trapezoid_weights(v_hat.shape[1], dphi)
    lam = np.asarray(lam)[:, None]
    total = 0.0
    for j in range(ell + 1):
        F = angular_diff(lam ** j * v_hat, dphi, ell - j)
        total += d_omega * float(np.sum(np.abs(F) ** 2 @ wp))
    return _ret(total, squared)


@dataclass(frozen=True)
class TraceExtension:
    field: WedgeField
    contour_re: float
    lam_im: np.ndarray
    v_hat: np.ndarray
    branch_sin: np.ndarray     # True where the sine branch was used

    @property
    def lam(self) -> np.ndarray:
        return self.contour_re + 1j * self.lam_im

    def seminorm(self, ell: int, squared: bool = False) -> float:
        g = self.field.grid
        return mellin_bulk_seminorm(self.v_hat, self.lam, 2 * np.pi / (g.n_s * g.ds), g.dphi,
                                    ell, squared)

    def laplacian_residual(self, phi_order: int = 8) -> float:
        """max |r^2 Delta v| relative to max |v| on the window."""
        g = self.field.grid
        vss = contour_inverse(self.lam[:, None] ** 2 * self.v_hat, self.lam_im, g.s, self.contour_re)
        D2 = diff_matrix(g.n_phi, g.dphi, 2, phi_order)
        lap = vss + self.field.values @ D2.T
        return float(np.abs(lap).max() / max(np.abs(self.field.values).max(), 1e-300))


def extend_trace(psi: BoundaryTrace, ell: int, alpha: float, alpha0: Optional[float] = None,
                 tail_tol: Optional[float] = 1e-13) -> TraceExtension:
    """Harmonic extension of the upper-ray trace, vanishing on the lower ray.

    On Re lambda = l + alpha - 1 each node uses sin(lambda phi)/sin(lambda theta)
    when |sin(lambda theta)|^2 >= 1/2 and cos(lambda phi)/cos(lambda theta)
    otherwise.  In the cosine branch the lower trace is not zero; the
    seminorm bound only needs harmonicity and the upper trace.
    """
    g = psi.grid
    theta = g.theta
    sigma = float(sigma_omega(ell + alpha))
    if sigma == 0.0:
        raise GuardError("sigma_Omega(l+alpha) = 0")
    if alpha0 is not None and theta * abs(sigma) > alpha0:
        raise GuardError(f"theta*|sigma_Omega(l+alpha)| = {theta * abs(sigma):.3g} > alpha0 = {alpha0:g}")
    if psi.upper is None:
        raise ValueError("extend_trace needs the upper trace")
    omega, P = contour_forward(psi.upper, g.s, sigma, tail_tol)
    lam = sigma + 1j * omega
    sn = np.sin(lam * theta)
    use_sin = np.abs(sn) ** 2 >= 0.5
    phi = g.phi[None, :]
    L = lam[:, None]
    # evaluate ratios in overflow-safe form for large |Im lambda|
    with np.errstate(over="ignore", invalid="ignore"):
        rs = np.sin(L * phi) / np.sin(L * theta)
        rc = np.cos(L * phi) / np.cos(L * theta)
    big = np.abs(omega) * theta > 600
    if big.any():
        Lb = L[big]
        sgn = np.sign(omega[big])[:, None]
        # both ratios tend to exp(i lambda (phi - theta) * sgn) up to exponentially small terms
        e = np.exp(-1j * sgn * Lb * (phi - theta))
        rs[big] = e
        rc[big] = e
    ratio = np.where(use_sin[:, None], rs, rc)
    V = ratio * P[:, None]
    v = contour_inverse(V, omega, g.s, sigma)
    return TraceExtension(WedgeField(g, v), sigma, omega, V, use_sin)


# ---------------------------------------------------------------- a-priori constant

def redsol_constant(theta: float, ell: int, alpha: float, alpha0: Optional[float] = None,
                    alpha1: Optional[float] = None) -> dict:
    """Explicit constant C with  |||v|||_{l+2,alpha} <= C (|||f|||_{l,alpha} + |||g|||_{l+1/2,alpha}).

    Assembled as sqrt(C_ap) max(B, H): C_ap from the angular a-priori bound
    (squared norms, contour Re lambda = l + alpha + 1), B the upper wedge
    weight-shift constant moving r^2 f from weight alpha + 2 to alpha, and H
    the boundary weight-shift constant moving r g from alpha + 1 to alpha.
    By default alpha1 is the actual distance of theta (l + alpha + 1) from
    pi Z (capped at pi/2), the sharpest value the angular bound admits.
    """
    sig = float(sigma_omega(ell + alpha + 2))
    s0 = float(sigma_omega(ell + alpha))
    s1 = float(sigma_omega(ell + alpha + 1))
    if alpha1 is None:
        alpha1 = min(dist_pi_z(theta * abs(sig)), np.pi / 2)
    if alpha0 is None:
        alpha0 = max(theta * abs(sig), 0.5)
    if theta * abs(sig) > alpha0:
        raise GuardError("theta |l + alpha + 1| exceeds alpha0")
    if s0 == 0.0 or s1 == 0.0:
        raise GuardError("weight-shift constants undefined: sigma_Omega vanishes")
    c_ap = apriori_constant(ell, alpha0, alpha1)
    B = 2.0 * sum(max(abs(sig / s0) ** j, 1.0) for j in range(ell + 1))
    H = max(abs(sig / s1) ** (ell + 0.5), 1.0)
    return {"C": float(np.sqrt(c_ap) * max(B, H)), "C_ap": float(c_ap), "B": float(B),
            "H": float(H), "alpha0": float(alpha0), "alpha1": float(alpha1),
            "C_aux": float(aux_constant(alpha0, alpha1))}


def redsol_check(sol: NeumannSolution, f: Optional[WedgeField], g: Optional[BoundaryTrace],
                 alpha0: Optional[float] = None, alpha1: Optional[float] = None) -> dict:
    """LHS |||v|||_{l+2,alpha}, RHS |||f|||_{l,alpha} + |||g|||_{l+1/2,alpha}, their ratio
    and the explicit constant.  The LHS is computed on the contour side."""
    ell, alpha = sol.ell, sol.alpha
    pg = sol.padded_grid
    lhs = mellin_bulk_seminorm(sol.v_hat, sol.lam, 2 * np.pi / (pg.n_s * pg.ds), pg.dphi, ell + 2)
    rhs = 0.0
    if f is not None:
        rhs += bulk_seminorm(f, ell, alpha)
    if g is not None:
        rhs += boundary_seminorm(g, ell + 0.5, alpha)
    const = redsol_constant(pg.theta, ell, alpha, alpha0, alpha1)
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else 0.0, **const}


def tracenorm_constants(theta: float, ell: int, alpha: float, alpha0: Optional[float] = None) -> dict:
    """Constants of the two-sided comparison between the seminorm of order l of
    a harmonic extension and the boundary seminorm of order l - 1/2 of its trace.

    lower:  c |||psi|||_{l-1/2} <= |||v|||_l   with c = (2 + (theta |sigma_Omega(l+alpha)|)^-1)^-1/2
    upper:  |||v|||_l^2 <= C |||psi|||_{l-1/2}^2  for the extension built by extend_trace.
    """
    sig = abs(float(sigma_omega(ell + alpha)))
    if sig == 0.0:
        raise GuardError("sigma_Omega(l+alpha) = 0")
    if alpha0 is None:
        alpha0 = theta * sig
    a = alpha0
    c = (2.0 + 1.0 / (theta * sig)) ** -0.5
    C = (ell + 1) * max(a * np.cosh(a) ** 2, (a + np.sinh(a) * np.cosh(a)) / np.sinh(a) ** 2)
    return {"c": float(c), "C": float(C), "alpha0": float(alpha0)}
