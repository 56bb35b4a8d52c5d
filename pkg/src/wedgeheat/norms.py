"""Weighted seminorms and norms on the wedge, its boundary rays and in time.

Conventions (gamma = 1 throughout):

* bulk seminorm of order l and weight beta measures r^(-sigma) (r d_r)^j d_phi^(l-j) v
  with sigma = l + beta - 1, in L^2(dr/r dphi);
* boundary seminorm of order s and weight beta is the contour integral of
  |lambda|^(2s) |psi^|^2 on Re lambda = s + beta - 1/2, summed over both rays;
* norms are root-sums of squares of the seminorms of order 0..k.

Every public norm returns the norm itself; pass ``squared=True`` for its square.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .discretization import (TAIL_TOL, BoundaryTrace, LogPolarGrid, WedgeField, cutoff,
                             diff_matrix, quad_wedge, trapezoid_weights)
from .transforms import (ContourError, contour_forward, laplace_forward, mellin_forward,
                         weighted_s_derivative)

__all__ = [
    "sigma_omega",
    "sigma_bd",
    "angular_diff",
    "rdr_power",
    "bulk_seminorm",
    "bulk_seminorm_mellin",
    "bulk_norm",
    "boundary_seminorm",
    "boundary_seminorm_real",
    "boundary_norm",
    "radial_derivative_norm",
    "trace_two_sided_constants",
    "ExpansionTerm",
    "SingularExpansion",
    "ExponentError",
    "admissible_exponents",
    "poly_norm",
    "split_singular",
    "monomial_divergence",
    "parabolic_norm",
    "weighted_time_norm",
    "NormReport",
]


def sigma_omega(sigma):
    return sigma - 1.0


def sigma_bd(sigma):
    return sigma - 0.5


# ---------------------------------------------------------------- derivatives

@lru_cache(maxsize=64)
def _dphi_matrix(n_phi: int, dphi: float, m: int) -> np.ndarray:
    if m == 0:
        return np.eye(n_phi)
    D1 = diff_matrix(n_phi, dphi, 1, 4)
    if m == 1:
        return D1
    D2 = diff_matrix(n_phi, dphi, 2, 4)
    out = np.eye(n_phi)
    for _ in range(m // 2):
        out = D2 @ out
    if m % 2:
        out = D1 @ out
    return out


def angular_diff(values: np.ndarray, dphi: float, m: int) -> np.ndarray:
    """m-th phi-derivative along the last axis (4th order, one-sided at the rays)."""
    if m == 0:
        return values
    D = _dphi_matrix(values.shape[-1], float(dphi), int(m))
    return values @ D.T


def rdr_power(values: np.ndarray, s: np.ndarray, sigma: float, j: int) -> np.ndarray:
    """e^(-sigma s) (r d_r)^j v along axis 0.

    Spectral when the weighted samples decay at both window ends; otherwise
    4th-order differences (used for fields that do not vanish near the tip).
    """
    try:
        return weighted_s_derivative(values, s, sigma, j)
    except ContourError:
        out = np.asarray(values, dtype=complex)
        h = s[1] - s[0]
        if j:
            D1 = diff_matrix(len(s), h, 1, 4)
            for _ in range(j):
                out = D1 @ out
        shape = (-1,) + (1,) * (out.ndim - 1)
        return np.exp(-sigma * s).reshape(shape) * out


def _wedge_sq(values: np.ndarray, grid: LogPolarGrid) -> float:
    ws = trapezoid_weights(grid.n_s, grid.ds)
    wp = trapezoid_weights(grid.n_phi, grid.dphi)
    return float(ws @ (np.abs(values) ** 2) @ wp)


def _ret(sq: float, squared: bool) -> float:
    return sq if squared else float(np.sqrt(max(sq, 0.0)))


# ---------------------------------------------------------------- bulk

def bulk_seminorm(field: WedgeField, ell: int, beta: float, squared: bool = False) -> float:
    g = field.grid
    sig = sigma_omega(ell + beta)
    total = 0.0
    for j in range(ell + 1):
        w = rdr_power(field.values, g.s, sig, j)
        w = angular_diff(w, g.dphi, ell - j)
        total += _wedge_sq(w, g)
    return _ret(total, squared)


def bulk_seminorm_mellin(field: WedgeField, ell: int, beta: float, squared: bool = False) -> float:
    """Contour-side evaluation: sum over j+m=l of the integral of |lambda^j d_phi^m v^|^2."""
    g = field.grid
    sig = sigma_omega(ell + beta)
    mf = mellin_forward(field, sig)
    lam = mf.lam[:, None]
    wp = trapezoid_weights(g.n_phi, g.dphi)
    total = 0.0
    for j in range(ell + 1):
        F = angular_diff(lam ** j * mf.values, g.dphi, ell - j)
        total += mf.d_omega * float(np.sum(np.abs(F) ** 2 @ wp))
    return _ret(total, squared)


def bulk_norm(field: WedgeField, k: int, beta: float, squared: bool = False) -> float:
    sq = sum(bulk_seminorm(field, ell, beta, squared=True) for ell in range(k + 1))
    return _ret(sq, squared)


# ---------------------------------------------------------------- boundary

def boundary_seminorm(trace: BoundaryTrace, s: float, beta: float, squared: bool = False,
                      tail_tol: Optional[float] = TAIL_TOL) -> float:
    g = trace.grid
    sig = sigma_bd(s + beta)
    total = 0.0
    for _, arr in trace.sides():
        omega, F = contour_forward(arr, g.s, sig, tail_tol)
        lam = sig + 1j * omega
        dw = omega[1] - omega[0]
        total += dw * float(np.sum(np.abs(lam) ** (2 * s) * np.abs(F) ** 2))
    return _ret(total, squared)


def _spectral_ds(values: np.ndarray, h: float, order: int) -> np.ndarray:
    n = len(values)
    k = np.fft.fftfreq(n, d=h) * 2 * np.pi
    return np.fft.ifft((1j * k) ** order * np.fft.fft(values))


def boundary_seminorm_real(trace: BoundaryTrace, ell: int, beta: float, squared: bool = False) -> float:
    """Real-space form for integer order: sum over rays of the integral of
    |r^(-sigma) (r d_r)^l psi|^2 dr/r with sigma = l + beta - 1/2.

    The weight is applied first and r d_r acts as (d_s + sigma) on the
    weighted samples, which keeps round-off from being amplified by the
    weight.  No transform to the contour is involved, so this pipeline is
    independent of the contour-side one."""
    g = trace.grid
    sig = sigma_bd(ell + beta)
    ws = trapezoid_weights(g.n_s, g.ds)
    ew = np.exp(-sig * g.s)
    total = 0.0
    for _, arr in trace.sides():
        d = ew * np.asarray(arr, dtype=complex)
        for _ in range(ell):
            d = _spectral_ds(d, g.ds, 1) + sig * d
        total += float(ws @ np.abs(d) ** 2)
    return _ret(total, squared)


def boundary_norm(trace: BoundaryTrace, s: float, beta: float, squared: bool = False,
                  tail_tol: Optional[float] = TAIL_TOL) -> float:
    sq = boundary_seminorm(trace, 0.0, beta, True, tail_tol)
    if s != 0:
        sq += boundary_seminorm(trace, s, beta, True, tail_tol)
    return _ret(sq, squared)


def radial_derivative_norm(trace: BoundaryTrace, ell: int, alpha: float, squared: bool = False) -> float:
    """Sum over rays of the integral of r^(-2 alpha) |d_r^l psi|^2 dr.

    Uses r^l d_r^l = prod_{i<l} (r d_r - i), applied to the weighted samples
    as in :func:`boundary_seminorm_real`."""
    g = trace.grid
    sig = sigma_bd(ell + alpha)
    ws = trapezoid_weights(g.n_s, g.ds)
    ew = np.exp(-sig * g.s)
    total = 0.0
    for _, arr in trace.sides():
        d = ew * np.asarray(arr, dtype=complex)
        for i in range(ell):
            d = _spectral_ds(d, g.ds, 1) + (sig - i) * d
        total += float(ws @ np.abs(d) ** 2)
    return _ret(total, squared)


def trace_two_sided_constants(ell: int, alpha: float) -> tuple[float, float]:
    """(c, C) with c |||psi|||_l <= ||r^-alpha d_r^l psi|| <= C |||psi|||_l."""
    ref = sigma_bd(ell + alpha)
    ratios = [abs(sigma_bd(j + alpha) / ref) for j in range(1, ell + 1)]
    c = float(np.prod([min(x, 1.0) for x in ratios])) if ratios else 1.0
    C = float(np.prod([max(x, 1.0) for x in ratios])) if ratios else 1.0
    return c, C


# ---------------------------------------------------------------- singular expansions

class ExponentError(ValueError):
    """Exponent outside the polynomial space or nearly coincident exponents."""


@dataclass(frozen=True)
class ExpansionTerm:
    q: float
    coeff: np.ndarray            # angular samples (bulk) or (lower, upper) values (boundary)
    label: tuple[int, int] = (-1, -1)
    log_coeff: Optional[np.ndarray] = None


@dataclass(frozen=True)
class SingularExpansion:
    theta: float
    terms: tuple = ()
    kind: str = "bulk"

    def __post_init__(self):
        terms = tuple(sorted(self.terms, key=lambda t: t.q))
        qs = [t.q for t in terms]
        if len(set(np.round(qs, 12))) != len(qs):
            raise ExponentError(f"repeated exponents in {qs}")
        for t in terms:
            if t.log_coeff is not None and abs(t.q) > 1e-12:
                raise ExponentError("only the q = 0 term may carry a ln r part")
        object.__setattr__(self, "terms", terms)

    @property
    def exponents(self) -> list[float]:
        return [t.q for t in self.terms]

    def __len__(self):
        return len(self.terms)

    def term(self, q: float, tol: float = 1e-9) -> Optional[ExpansionTerm]:
        for t in self.terms:
            if abs(t.q - q) < tol:
                return t
        return None

    def evaluate(self, grid: LogPolarGrid, with_cutoff: bool = True) -> WedgeField:
        """zeta(r) * sum_q a_q(phi) r^q on the grid (bulk expansions only)."""
        r = grid.r
        out = np.zeros(grid.shape, dtype=complex)
        for t in self.terms:
            coeff = np.broadcast_to(np.asarray(t.coeff, dtype=complex), (grid.n_phi,))
            out += np.outer(r ** t.q, coeff)
            if t.log_coeff is not None:
                out += np.outer(np.log(r), np.broadcast_to(t.log_coeff, (grid.n_phi,)))
        if with_cutoff:
            out *= cutoff(r)[:, None]
        return WedgeField(grid, out)

    def to_json(self) -> dict:
        def enc(a):
            a = np.atleast_1d(np.asarray(a, dtype=complex))
            return {"re": a.real.tolist(), "im": a.imag.tolist()}
        return {"theta": self.theta, "kind": self.kind, "terms": [
            {"q": t.q, "label": list(t.label), "coeff": enc(t.coeff),
             **({"log_coeff": enc(t.log_coeff)} if t.log_coeff is not None else {})}
            for t in self.terms]}


def admissible_exponents(theta: float, upper: float, lower: float = 0.0,
                         alpha1: float = 0.05, strict: bool = True,
                         max_count: Optional[int] = None) -> list[tuple[float, tuple[int, int]]]:
    """Exponents q = j + (pi/theta) l (j, l >= 0) with lower <= q < upper.

    Pairs closer than alpha1/theta cannot be told apart by a fit and raise
    ExponentError naming them.
    """
    p = np.pi / theta
    out = []
    jmax = int(np.ceil(upper)) + 1
    lmax = int(np.ceil(upper / p)) + 1
    for j in range(jmax + 1):
        for l in range(lmax + 1):
            q = j + p * l
            if lower - 1e-12 <= q and (q < upper if strict else q <= upper):
                out.append((q, (j, l)))
    out.sort()
    for (q1, a), (q2, b) in zip(out, out[1:]):
        if theta * abs(q2 - q1) < alpha1:
            raise ExponentError(f"exponents {q1:.6g} {a} and {q2:.6g} {b} nearly coincide")
    if max_count is not None:
        out = out[:max_count]
    return out


def _wkk_sq(a: np.ndarray, dphi: float, k: int) -> float:
    wp = trapezoid_weights(len(a), dphi)
    return float(sum(wp @ np.abs(angular_diff(a[None, :], dphi, m)[0]) ** 2 for m in range(k + 1)))


def poly_norm(expansion: SingularExpansion, order: float, beta: float, squared: bool = False) -> float:
    """Coefficient norm of a singular expansion (gamma = 1).

    Bulk: sum_q ||a_q||^2_{W^{k,2}(0,theta)} with q < sigma_Omega(k + beta).
    Boundary: sum_q (|a_q(0)|^2 + |a_q(theta)|^2) with q < sigma_bd(s + beta).
    """
    if expansion.kind == "bulk":
        thr = sigma_omega(order + beta)
    else:
        thr = sigma_bd(order + beta)
    total = 0.0
    for t in expansion.terms:
        if t.q >= thr:
            raise ExponentError(f"exponent {t.q:.6g} outside polynomial space (threshold {thr:.6g})")
        if expansion.kind == "bulk":
            a = np.asarray(t.coeff, dtype=complex)
            total += _wkk_sq(a, expansion.theta / (len(a) - 1), int(order))
            if t.log_coeff is not None:
                total += _wkk_sq(np.asarray(t.log_coeff, dtype=complex),
                                 expansion.theta / (len(a) - 1), int(order))
        else:
            total += float(np.sum(np.abs(np.asarray(t.coeff)) ** 2))
    return _ret(total, squared)


@dataclass
class SplitResult:
    regular: WedgeField
    expansion: SingularExpansion
    residual_seminorm: float
    log_coefficient: float
    window: tuple[float, float]


def split_singular(field: WedgeField, k: int, beta: float, alpha1: float = 0.05,
                   with_log: bool = False, n_extra: int = 3, drop_tol: float = 1e-10,
                   s_hi: Optional[float] = None) -> SplitResult:
    """Fit zeta * sum_q a_q(phi) r^q near the tip and split it off.

    The fit uses r in [e^(s_min + 1), e^(s_hi)] where zeta = 1; by default
    s_hi = min(ln 1/2, s_min / 3), which keeps the window in the tip region
    where the singular terms dominate the regular remainder.  Weighted by
    r^(-threshold) so that the near-tip behaviour dominates.  A few exponents
    above the threshold are included as nuisance columns that absorb the
    regular remainder.  With ``with_log`` a ln r column joins the q = 0 term
    and its largest |coefficient| is reported.
    """
    g = field.grid
    theta = g.theta
    thr = sigma_omega(k + beta)
    qs = admissible_exponents(theta, thr, alpha1=alpha1)
    if not qs:
        return SplitResult(field, SingularExpansion(theta), bulk_seminorm(field, k, beta), 0.0, (0.0, 0.0))
    extra = [q for q in admissible_exponents(theta, thr + 4.0, lower=thr, strict=False, alpha1=alpha1 / 4)
             if q[0] >= thr][:n_extra]
    s = g.s
    if s_hi is None:
        s_hi = min(np.log(0.5), g.s_min / 3.0)
    win = (s >= g.s_min + 1.0) & (s <= s_hi)
    nodes_per_decade = np.log(10.0) / g.ds
    if nodes_per_decade < 8 or win.sum() < len(qs) + len(extra) + 2:
        raise ExponentError("fitting window too coarse: need at least 8 nodes per decade")
    sw = s[win]
    cols = [np.exp(q * sw) for q, _ in qs]
    has_log = with_log and abs(qs[0][0]) < 1e-12
    if has_log:
        cols.append(sw.copy())
    cols += [np.exp(q * sw) for q, _ in extra]
    A = np.stack(cols, axis=1)
    wrow = np.exp(-thr * sw)
    A = A * wrow[:, None]
    scale = np.linalg.norm(A, axis=0)
    A = A / scale
    if np.linalg.cond(A) > 1e13:
        raise ExponentError("ill-conditioned singular fit")
    rhs = field.values[win] * wrow[:, None]
    coef, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    coef = coef / scale[:, None]
    fscale = max(np.abs(field.values).max(), 1e-300)
    terms = []
    log_c = 0.0
    for i, (q, lab) in enumerate(qs):
        a = coef[i]
        lc = None
        if has_log and i == 0:
            lc = coef[len(qs)]
            log_c = float(np.abs(lc).max())
            if log_c <= drop_tol * fscale:
                lc = None
        if np.abs(a).max() <= drop_tol * fscale and lc is None:
            continue
        terms.append(ExpansionTerm(q, a, lab, lc))
    exp_ = SingularExpansion(theta, tuple(terms))
    regular = field - exp_.evaluate(g)
    try:
        res = bulk_seminorm(regular, k, beta)
    except (ContourError, OverflowError):
        res = float("inf")
    return SplitResult(regular, exp_, res, log_c, (float(np.exp(sw[0])), float(np.exp(sw[-1]))))


def monomial_divergence(delta: float, k: int, beta: float, theta: float = 1.0,
                        s_mins: Sequence[float] = (-8.0, -12.0, -16.0),
                        ds: float = 1.0 / 32) -> tuple[bool, list[float]]:
    """Is zeta r^delta outside the weighted space of order k and weight beta?

    The squared norm is evaluated on windows reaching down to each s_min; a
    growth ratio above 2 between consecutive windows signals divergence.
    """
    vals = []
    for smin in s_mins:
        n = int(2 ** np.ceil(np.log2((2.0 - smin) / ds)))
        g = LogPolarGrid(theta, smin, 2.0, n, 16)
        r = g.r
        f = WedgeField(g, np.outer(cutoff(r) * r ** delta, np.ones(g.n_phi)))
        vals.append(bulk_norm(f, k, beta, squared=True))
    ratios = [b / a for a, b in zip(vals, vals[1:])]
    return bool(max(ratios) > 2.0), vals


# ---------------------------------------------------------------- parabolic

def _default_sq(x: np.ndarray) -> float:
    return float(np.sum(np.abs(x) ** 2))


def parabolic_norm(values: np.ndarray, t: np.ndarray, s: float, beta: float, gamma: float = 1.0,
                   sq_norm: Optional[Callable[[np.ndarray], float]] = None,
                   squared: bool = False, tail_tol: Optional[float] = 1e-10) -> float:
    """Contour-side parabolic norm of an H-valued time series.

    values[n] is the state at t[n] (zero for t <= 0).  The squared norm is
    the integral over Re mu = beta of (|mu| + gamma)^(2s) ||L F(mu)||_H^2,
    which equals the time-side norm with weight e^(-2 beta t).  ``sq_norm``
    must be a Hermitian quadratic form on one time slice; the default is the
    plain sum of squares.
    """
    sq_norm = sq_norm or _default_sq
    lf = laplace_forward(values, t, beta, tail_tol=tail_tol)
    mult = (np.abs(lf.mu) + gamma) ** (2 * s)
    h2 = np.array([sq_norm(lf.values[i]) for i in range(len(lf.mu))])
    return _ret(lf.d_omega * float(np.sum(mult * h2)), squared)


def weighted_time_norm(values: np.ndarray, t: np.ndarray, beta: float,
                       sq_norm: Optional[Callable[[np.ndarray], float]] = None,
                       squared: bool = False) -> float:
    """Time-side integral of e^(-2 beta t) ||F(t)||_H^2 dt (trapezoid)."""
    sq_norm = sq_norm or _default_sq
    h2 = np.array([sq_norm(values[i]) for i in range(len(t))])
    w = trapezoid_weights(len(t), t[1] - t[0]) * np.exp(-2 * beta * t)
    return _ret(float(w @ h2), squared)


# ---------------------------------------------------------------- reports

@dataclass
class NormReport:
    entries: dict = dc_field(default_factory=dict)
    gamma: float = 1.0
    extras: dict = dc_field(default_factory=dict)

    def add(self, kind: str, order, weight, value: float) -> float:
        value = float(value)
        if not value >= 0.0:
            raise ValueError(f"negative or undefined norm value for {kind}")
        self.entries[(kind, order, weight)] = value
        return value

    def get(self, kind: str, order, weight) -> float:
        return self.entries[(kind, order, weight)]

    def to_json(self) -> dict:
        ent = {f"({k}, {o}, {w})": float(f"{v:.17g}") for (k, o, w), v in self.entries.items()}
        return {"gamma": self.gamma, "entries": ent, "extras": self.extras}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)
