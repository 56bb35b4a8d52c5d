"""Mellin and Laplace transforms along vertical contours.

With s = ln r and lambda = beta + i*omega the Mellin transform

    f^(lambda) = (2 pi)^(-1/2) int_0^inf r^(-lambda) f(r) dr/r

is the Fourier transform of e^(-beta s) f in s.  On a uniform s-grid the
trapezoid rule for that integral is a DFT, so the forward and inverse maps
are FFTs and the discrete Plancherel identity holds to round-off.  The
Laplace transform is the same construction in the time variable.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .discretization import (TAIL_TOL, BoundaryTrace, LogPolarGrid, WedgeField,
                             trapezoid_weights)

SQRT2PI = np.sqrt(2.0 * np.pi)

__all__ = [
    "ContourError",
    "MellinField",
    "LaplaceField",
    "contour_forward",
    "contour_inverse",
    "contour_eval",
    "mellin_forward",
    "mellin_inverse",
    "mellin_at",
    "weighted_s_derivative",
    "derivative_law_check",
    "plancherel_check",
    "shift_law_check",
    "analyticity_check",
    "laplace_forward",
    "laplace_inverse",
    "laplace_at",
]


class ContourError(ValueError):
    """Weighted samples do not decay at the window ends: the contour lies
    outside the strip of convergence for this window."""


# ---------------------------------------------------------------- generic core

def _omega(n: int, h: float) -> np.ndarray:
    return np.fft.fftshift(np.fft.fftfreq(n, d=h)) * 2.0 * np.pi


def _check_tail(w: np.ndarray, tol: float):
    a = np.abs(w)
    scale = a.max()
    if scale == 0.0 or not np.isfinite(scale):
        if not np.isfinite(scale):
            raise ContourError("weighted samples are not finite")
        return
    ends = max(a[0].max(), a[-1].max())
    if ends > tol * scale:
        raise ContourError(
            f"weighted tail {ends / scale:.3e} exceeds tolerance {tol:.1e}; "
            "contour outside the strip of convergence for this window")


def contour_forward(values: np.ndarray, x: np.ndarray, beta: float,
                    tail_tol: Optional[float] = TAIL_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Transform along axis 0 on Re = beta.

    Returns ``(omega, F)`` with omega ascending and
    F[k] = (2 pi)^(-1/2) * h * sum_j e^(-(beta + i omega_k) x_j) values[j].
    """
    values = np.asarray(values, dtype=complex)
    n = values.shape[0]
    h = x[1] - x[0]
    shape = (n,) + (1,) * (values.ndim - 1)
    w = np.exp(-beta * x).reshape(shape) * values
    if tail_tol is not None:
        _check_tail(w, tail_tol)
    omega = _omega(n, h)
    phase = np.exp(-1j * omega * x[0]).reshape(shape)
    F = np.fft.fftshift(np.fft.fft(w, axis=0), axes=0) * phase * (h / SQRT2PI)
    return omega, F


def contour_inverse(F: np.ndarray, omega: np.ndarray, x: np.ndarray, beta: float) -> np.ndarray:
    """Exact inverse of :func:`contour_forward` on the same nodes."""
    F = np.asarray(F, dtype=complex)
    n = F.shape[0]
    h = x[1] - x[0]
    shape = (n,) + (1,) * (F.ndim - 1)
    phase = np.exp(1j * omega * x[0]).reshape(shape)
    w = np.fft.ifft(np.fft.ifftshift(F * phase, axes=0), axis=0) * (SQRT2PI / h)
    return np.exp(beta * x).reshape(shape) * w


def contour_eval(values: np.ndarray, x: np.ndarray, lam) -> np.ndarray:
    """Trapezoid evaluation of the transform at arbitrary complex points.

    Returns shape ``lam.shape + values.shape[1:]``.
    """
    lam = np.asarray(lam, dtype=complex)
    values = np.asarray(values, dtype=complex)
    wq = trapezoid_weights(len(x), x[1] - x[0])
    K = np.exp(-np.multiply.outer(lam.ravel(), x)) * wq
    out = K @ values.reshape(len(x), -1) / SQRT2PI
    return out.reshape(lam.shape + values.shape[1:])


# ---------------------------------------------------------------- Mellin

@dataclass(frozen=True)
class MellinField:
    """Samples of a Mellin transform on the contour Re lambda = contour_re.

    ``values`` has shape (n_omega, n_phi) for wedge fields and (n_omega, 2)
    for traces (columns lower, upper).
    """

    grid: LogPolarGrid
    contour_re: float
    im_nodes: np.ndarray
    values: np.ndarray
    kind: str = "wedge"

    @property
    def lam(self) -> np.ndarray:
        return self.contour_re + 1j * self.im_nodes

    @property
    def d_omega(self) -> float:
        return 2.0 * np.pi / (self.grid.n_s * self.grid.ds)

    def with_values(self, values: np.ndarray) -> "MellinField":
        return MellinField(self.grid, self.contour_re, self.im_nodes, values, self.kind)


def _as_array(obj) -> tuple[np.ndarray, str]:
    if isinstance(obj, WedgeField):
        return obj.values, "wedge"
    if isinstance(obj, BoundaryTrace):
        lo, hi = obj.full()
        return np.stack([lo, hi], axis=1), "trace"
    raise TypeError(f"expected WedgeField or BoundaryTrace, got {type(obj).__name__}")


def mellin_forward(field, beta: float, tail_tol: Optional[float] = TAIL_TOL) -> MellinField:
    vals, kind = _as_array(field)
    omega, F = contour_forward(vals, field.grid.s, beta, tail_tol)
    return MellinField(field.grid, float(beta), omega, F, kind)


def mellin_inverse(mf: MellinField):
    vals = contour_inverse(mf.values, mf.im_nodes, mf.grid.s, mf.contour_re)
    if mf.kind == "wedge":
        return WedgeField(mf.grid, vals)
    return BoundaryTrace(mf.grid, vals[:, 0], vals[:, 1])


def mellin_at(field, lam) -> np.ndarray:
    """Mellin transform at arbitrary complex lambda (direct quadrature)."""
    vals, _ = _as_array(field)
    return contour_eval(vals, field.grid.s, lam)


def weighted_s_derivative(values: np.ndarray, s: np.ndarray, sigma: float, order: int,
                          tail_tol: Optional[float] = TAIL_TOL) -> np.ndarray:
    """Return e^(-sigma s) (r d/dr)^order v, spectrally, along axis 0.

    Computed as the inverse transform of lambda^order v^ on Re lambda = sigma
    with the weight dropped, so that weighted norms of the result coincide with
    their contour-side values.
    """
    omega, F = contour_forward(values, s, sigma, tail_tol)
    lam = (sigma + 1j * omega).reshape((-1,) + (1,) * (np.ndim(values) - 1))
    return contour_inverse(F * lam ** order, omega, s, 0.0)


def _centered_rdr(values: np.ndarray, h: float, order: int) -> np.ndarray:
    """(r d/dr) by centered differences of the given even accuracy order."""
    from .discretization import fd_weights
    half = order // 2
    c = fd_weights(0.0, np.arange(-half, half + 1, dtype=float), 1)[1] / h
    out = np.zeros_like(values, dtype=complex)
    n = values.shape[0]
    for k, ck in zip(range(-half, half + 1), c):
        if ck == 0.0:
            continue
        lo, hi = max(0, -k), min(n, n - k)
        out[lo:hi] += ck * values[lo + k:hi + k]
    return out


def derivative_law_check(field, beta: float, fd_order: int = 2) -> float:
    """Max over the contour of |M(r d_r f) - lambda M(f)|, with r d_r f by
    centered differences in s."""
    vals, _ = _as_array(field)
    g = field.grid
    d = _centered_rdr(vals, g.ds, fd_order)
    omega, Fd = contour_forward(d, g.s, beta, None)
    _, F = contour_forward(vals, g.s, beta, None)
    lam = (beta + 1j * omega).reshape((-1,) + (1,) * (vals.ndim - 1))
    return float(np.abs(Fd - lam * F).max())


def shift_law_check(field, beta: float, beta0: float) -> float:
    """Max deviation between M(r^beta0 f) on Re = beta and M(f) on Re = beta - beta0.

    Both contours share the same Im lambda nodes, so the shift law is a pure
    relabelling of the contour abscissa."""
    vals, _ = _as_array(field)
    g = field.grid
    shape = (-1,) + (1,) * (vals.ndim - 1)
    shifted = np.exp(beta0 * g.s).reshape(shape) * vals
    _, A = contour_forward(shifted, g.s, beta, None)
    _, B = contour_forward(vals, g.s, beta - beta0, None)
    scale = max(np.abs(B).max(), 1e-300)
    return float(np.abs(A - B).max() / scale)


def plancherel_check(psi1, psi2, beta: float, gamma_shift: float = 0.0) -> tuple[complex, complex]:
    """Both sides of the generalized Plancherel identity.

    lhs = int r^(-2 beta) conj(psi1) psi2 dr/r
    rhs = int_{Re lambda = beta} conj(psi1^(lambda + gamma)) psi2^(lambda - gamma) dIm lambda
    Arrays are summed over trailing axes with trapezoid weights in phi when
    the inputs are wedge fields.
    """
    v1, kind = _as_array(psi1)
    v2, _ = _as_array(psi2)
    g = psi1.grid
    ws = trapezoid_weights(g.n_s, g.ds)
    if kind == "wedge":
        wt = trapezoid_weights(g.n_phi, g.dphi)
    else:
        wt = np.ones(v1.shape[1])
    lhs = np.einsum("j,jm,m->", ws * np.exp(-2.0 * beta * g.s), np.conj(v1) * v2, wt)
    omega, F1 = contour_forward(v1, g.s, beta + gamma_shift)
    _, F2 = contour_forward(v2, g.s, beta - gamma_shift)
    dw = 2.0 * np.pi / (g.n_s * g.ds)
    rhs = dw * np.einsum("km,m->", np.conj(F1) * F2, wt)
    return complex(lhs), complex(rhs)


def analyticity_check(field, beta: float, omegas, h: float = 1e-4) -> float:
    """Cauchy-Riemann residual of the transform near Re lambda = beta.

    The transform is sampled on the three contours beta - h, beta, beta + h.
    A quadratic fit across those contours gives d/d beta; the same fit along
    Im lambda gives d/d omega.  For an analytic function d/d omega = i d/d beta.
    Returns max |F_omega - i F_beta| / max |F_beta|.
    """
    omegas = np.asarray(omegas, dtype=float)
    lam = beta + 1j * omegas
    fp = mellin_at(field, lam + h)
    fm = mellin_at(field, lam - h)
    f_beta = (fp - fm) / (2 * h)
    gp = mellin_at(field, lam + 1j * h)
    gm = mellin_at(field, lam - 1j * h)
    f_omega = (gp - gm) / (2 * h)
    scale = max(np.abs(f_beta).max(), 1e-300)
    return float(np.abs(f_omega - 1j * f_beta).max() / scale)


# ---------------------------------------------------------------- Laplace

@dataclass(frozen=True)
class LaplaceField:
    """Laplace transform samples on Re mu = contour_re; axis 0 is Im mu."""

    contour_re: float
    im_nodes: np.ndarray
    values: np.ndarray
    t: np.ndarray

    @property
    def mu(self) -> np.ndarray:
        return self.contour_re + 1j * self.im_nodes

    @property
    def d_omega(self) -> float:
        return 2.0 * np.pi / (len(self.t) * (self.t[1] - self.t[0]))


def laplace_forward(values: np.ndarray, t: np.ndarray, beta: float,
                    tail_tol: Optional[float] = TAIL_TOL, causal_tol: float = 1e-12) -> LaplaceField:
    """Two-sided Laplace transform along axis 0 on Re mu = beta.

    Inputs must vanish for t <= 0 (checked against ``causal_tol``)."""
    values = np.asarray(values, dtype=complex)
    t = np.asarray(t, dtype=float)
    neg = t < 0
    if neg.any():
        scale = max(np.abs(values).max(), 1e-300)
        if np.abs(values[neg]).max() > causal_tol * scale:
            raise ValueError("time series must vanish for t < 0")
    omega, F = contour_forward(values, t, beta, tail_tol)
    return LaplaceField(float(beta), omega, F, t)


def laplace_inverse(lf: LaplaceField) -> np.ndarray:
    return contour_inverse(lf.values, lf.im_nodes, lf.t, lf.contour_re)


def laplace_at(values: np.ndarray, t: np.ndarray, mu) -> np.ndarray:
    return contour_eval(values, t, mu)
