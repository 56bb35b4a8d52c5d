"""Quantitative non-resonance conditions.

Irrationality of pi/theta cannot be tested in floating point, so every
exponent or weight that must avoid the resonance set (pi/theta) Z is checked
through dist(theta * sigma, pi Z) >= alpha1 instead.
"""
from __future__ import annotations

import numpy as np

ALPHA1_DEFAULT = 0.05


class GuardError(ValueError):
    """A non-resonance or sector condition failed."""


def dist_pi_z(x: float) -> float:
    return float(abs(x - np.pi * np.round(x / np.pi)))


def check_resonance(theta: float, sigma: float, alpha1: float = ALPHA1_DEFAULT, what: str = "sigma"):
    d = dist_pi_z(theta * sigma)
    if d < alpha1:
        raise GuardError(f"dist(theta*{what}, pi Z) = {d:.3g} < alpha1 = {alpha1:g} ({what}={sigma:.6g})")


def check_base_weight(theta: float, alpha: float, alpha1: float = ALPHA1_DEFAULT):
    """dist(theta (alpha + 1), pi Z) >= alpha1 and theta |alpha| >= alpha1."""
    check_resonance(theta, alpha + 1.0, alpha1, "(alpha+1)")
    if theta * abs(alpha) < alpha1:
        raise GuardError(f"theta*|alpha| = {theta * abs(alpha):.3g} < alpha1 = {alpha1:g}")


def check_higher_weight(theta: float, alpha: float, ell: int, alpha0: float,
                        alpha1: float = ALPHA1_DEFAULT):
    """For j <= l: dist(theta (j+alpha+1), pi Z), theta |j+alpha|, theta |j+alpha-1| >= alpha1,
    and |l + alpha + 1| <= alpha0."""
    for j in range(ell + 1):
        check_resonance(theta, j + alpha + 1.0, alpha1, f"sigma_Omega({j}+alpha+2)")
        for shift, name in ((0.0, "+1"), (-1.0, "")):
            val = theta * abs(j + alpha + shift)
            if val < alpha1:
                raise GuardError(f"theta*|sigma_Omega({j}+alpha{name})| = {val:.3g} < alpha1")
    if abs(ell + alpha + 1.0) > alpha0:
        raise GuardError(f"|sigma_Omega(l+alpha+2)| = {abs(ell + alpha + 1):.3g} > alpha0 = {alpha0:g}")


def check_sector(mu: complex, eps: float):
    if abs(mu) < 1.0:
        raise GuardError(f"|mu| = {abs(mu):.3g} < 1")
    if abs(np.angle(mu)) >= np.pi - eps:
        raise GuardError(f"|arg mu| = {abs(np.angle(mu)):.3g} >= pi - eps")
