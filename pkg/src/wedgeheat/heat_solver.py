"""Heat equation on the wedge with Robin data, solved through the Laplace transform.

    d_t U - Delta U = F,   U + d_nu U = G on the rays,   U = 0 for t <= 0.

The data are transformed along Re mu = beta with the FFT of the transforms
module, every contour node mu = beta + i omega gets one direct resolvent
solve, and the inverse FFT brings the solution back to time.  Real data make
the transform conjugate-symmetric, so only half of the nodes are solved.

Parabolic norms are assembled on the contour side, where the time order s
becomes the multiplier (|mu| + gamma)^(2s) with gamma = 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .discretization import BoundaryTrace, LogPolarGrid, TAIL_TOL, WedgeField
from .norms import (NormReport, boundary_seminorm, bulk_seminorm, poly_norm, split_singular, sigma_omega)
from .robin_resolvent import ResolventParams, SWEEP_TAIL_TOL, _assemble, _rhs, solve_resolvent_direct
from .transforms import contour_forward, contour_inverse

__all__ = [
    "ParabolicProblem",
    "HeatSolution",
    "solve_heat",
    "manufactured_heat",
    "verify_wellposedness",
    "norm_recipe",
    "heat_residual",
]

GAMMA = 1.0


@dataclass(frozen=True)
class ParabolicProblem:
    """Space-time data on a uniform time grid.

    F has shape (n_t, n_s, n_phi) and G shape (n_t, 2, n_s) (lower, upper ray);
    either may be None.  The time grid may start below zero so that the
    computed solution can be checked for causality there.
    """

    grid: LogPolarGrid
    t: np.ndarray
    beta: float
    params: ResolventParams
    F: Optional[np.ndarray] = None
    G: Optional[np.ndarray] = None

    def validate(self) -> "ParabolicProblem":
        t = np.asarray(self.t, float)
        n = len(t)
        if n & (n - 1):
            raise ValueError(f"n_t = {n} must be a power of two")
        if not np.allclose(np.diff(t), t[1] - t[0]):
            raise ValueError("time grid must be uniform")
        if self.beta < GAMMA ** 2:
            raise ValueError(f"beta = {self.beta} must be at least gamma^2 = {GAMMA ** 2}")
        ns, nph = self.grid.shape
        if self.F is not None and np.shape(self.F) != (n, ns, nph):
            raise ValueError(f"F has shape {np.shape(self.F)}, expected {(n, ns, nph)}")
        if self.G is not None and np.shape(self.G) != (n, 2, ns):
            raise ValueError(f"G has shape {np.shape(self.G)}, expected {(n, 2, ns)}")
        if self.F is None and self.G is None:
            return self
        for arr in (self.F, self.G):
            if arr is None:
                continue
            scale = max(np.abs(arr).max(), 1e-300)
            if np.abs(arr[t <= 0]).max(initial=0.0) > 1e-12 * scale:
                raise ValueError("data must vanish for t <= 0")
        return self


@dataclass
class HeatSolution:
    grid: LogPolarGrid
    t: np.ndarray
    beta: float
    U: np.ndarray              # (n_t, n_s, n_phi)
    mu: np.ndarray             # contour nodes
    d_omega: float
    u_hat: np.ndarray          # (n_t, n_s, n_phi), transforms of U on the nodes
    f_hat: Optional[np.ndarray]
    g_hat: Optional[np.ndarray]
    params: ResolventParams
    info: dict = dc_field(default_factory=dict)

    def at(self, n: int) -> WedgeField:
        return WedgeField(self.grid, self.U[n])

    def causality_defect(self) -> float:
        """max |U(t <= 0)| / max |U|."""
        scale = np.abs(self.U).max()
        if scale == 0:
            return 0.0
        neg = self.t <= 0
        return float(np.abs(self.U[neg]).max(initial=0.0) / scale)


def _node_data(fh, gh, k, grid):
    f = None if fh is None else WedgeField(grid, fh[k])
    g = None if gh is None else BoundaryTrace(grid, gh[k, 0], gh[k, 1])
    return f, g


def _node_size(fh, gh, k) -> float:
    a = 0.0 if fh is None else float(np.linalg.norm(fh[k]))
    b = 0.0 if gh is None else float(np.linalg.norm(gh[k]))
    return a + b


def solve_heat(p: ParabolicProblem, truncation_tol: float = 1e-8,
               tail_tol: Optional[float] = TAIL_TOL) -> HeatSolution:
    """Laplace transform, one resolvent solve per contour node, inverse transform.

    Nodes are dropped from the top of |Im mu| downwards while the resolvent
    bound ||u^|| <= C ||data^|| / |mu| keeps the dropped part below
    ``truncation_tol`` of the total.
    """
    p.validate()
    grid = p.grid
    t = np.asarray(p.t, float)
    n = len(t)
    fh = gh = None
    omega = None
    if p.F is not None:
        omega, fh = contour_forward(p.F, t, p.beta, tail_tol)
    if p.G is not None:
        omega, gh = contour_forward(p.G, t, p.beta, tail_tol)
    if omega is None:
        omega, _ = contour_forward(np.zeros(n), t, p.beta, None)
    mu = p.beta + 1j * omega
    d_omega = float(omega[1] - omega[0])
    real_data = all(a is None or np.isrealobj(a) or np.abs(np.imag(a)).max() == 0 for a in (p.F, p.G))

    bound = np.array([_node_size(fh, gh, k) / abs(mu[k]) for k in range(n)])
    order = np.argsort(-np.abs(omega), kind="stable")
    total = bound.sum()
    active = np.ones(n, bool)
    dropped = 0.0
    for k in order:
        if total == 0 or dropped + bound[k] > truncation_tol * total:
            break
        dropped += bound[k]
        active[k] = False

    u_hat = np.zeros((n,) + grid.shape, complex)
    solved = 0
    max_lin = 0.0
    for k in range(n):
        if not active[k]:
            continue
        if real_data and omega[k] < 0:
            continue                      # filled from the mirror node below
        if _node_size(fh, gh, k) == 0.0:
            continue
        f, g = _node_data(fh, gh, k, grid)
        sol = solve_resolvent_direct(f, g, p.params.with_mu(mu[k]), grid=grid, extract=False)
        u_hat[k] = sol.field.values
        max_lin = max(max_lin, sol.info["linear_residual"])
        solved += 1
    if real_data:
        # omega grid from fftshift is symmetric except for the most negative node
        for k in range(n):
            if omega[k] < 0 and active[k]:
                j = int(np.argmin(np.abs(omega + omega[k])))
                if np.isclose(omega[j], -omega[k]):
                    u_hat[k] = np.conj(u_hat[j])
                elif _node_size(fh, gh, k) > 0:
                    f, g = _node_data(fh, gh, k, grid)
                    u_hat[k] = solve_resolvent_direct(f, g, p.params.with_mu(mu[k]), grid=grid,
                                                      extract=False).field.values
                    solved += 1
    U = contour_inverse(u_hat, omega, t, p.beta)
    if real_data:
        U = U.real.astype(complex)
    info = {"nodes": n, "solved": solved, "dropped": int((~active).sum()),
            "dropped_bound": float(dropped / total) if total else 0.0,
            "max_linear_residual": max_lin, "active": active}
    return HeatSolution(grid, t, p.beta, U, mu, d_omega, u_hat, fh, gh, p.params, info)


def manufactured_heat(grid: LogPolarGrid, t: np.ndarray, smooth_onset: bool = False):
    """Exact U = a(t) w(r) with w = e^{-(ln r)^2} and its data.

    a(t) = 1 - e^{-t} for t > 0 (0 before).  With ``smooth_onset`` the profile is
    a(t) = e^{-1/t} e^{-t/4} t, which is C-infinity at t = 0, so the time
    discretization converges spectrally.  Returns (U, F, G) arrays.
    """
    t = np.asarray(t, float)
    s = grid.s
    w = np.exp(-s ** 2)
    lap_w = np.exp(-2 * s) * (4 * s ** 2 - 2) * w
    pos = t > 0
    tp = np.where(pos, t, 1.0)
    if smooth_onset:
        a = np.where(pos, tp * np.exp(-1 / tp - tp / 4), 0.0)
        da = np.where(pos, np.exp(-1 / tp - tp / 4) * (1 + 1 / tp - tp / 4), 0.0)
    else:
        a = np.where(pos, 1 - np.exp(-tp), 0.0)
        da = np.where(pos, np.exp(-tp), 0.0)
    ones = np.ones(grid.n_phi)
    U = a[:, None, None] * np.einsum("s,p->sp", w, ones)[None]
    F = (da[:, None] * w[None, :] - a[:, None] * lap_w[None, :])[:, :, None] * ones[None, None, :]
    G = np.stack([a[:, None] * w[None, :], a[:, None] * w[None, :]], axis=1)
    return U, F, G


def heat_residual(sol: HeatSolution) -> float:
    """Relative residual of the discrete system at every solved node.

    Each node satisfies (mu - Delta_h) u^ = f^ with Robin rows; the time
    derivative is exact on the contour (multiplication by mu), so this is the
    residual of d_t U - Delta_h U - F measured on the transform side.
    Nodes removed by truncation are skipped.
    """
    worst = 0.0
    active = sol.info.get("active", np.ones(len(sol.mu), bool))
    for k in range(len(sol.mu)):
        if not active[k]:
            continue                      # dropped by truncation, never solved
        f, g = _node_data(sol.f_hat, sol.g_hat, k, sol.grid)
        if f is None and g is None:
            continue
        b = _rhs(sol.grid, f, g)
        bn = np.linalg.norm(b)
        if bn == 0:
            continue
        A = _assemble(sol.grid, complex(sol.mu[k]))
        worst = max(worst, float(np.linalg.norm(A @ sol.u_hat[k].ravel() - b) / bn))
    return worst


# ---------------------------------------------------------------- parabolic norms

def norm_recipe(ell: int) -> dict:
    """Constituents of the solution and data norms as (time order, space, order, weight).

    space is "bulk" (regular part plus singular part, full norm up to order),
    "hbulk" (homogeneous seminorm of that order), "bd" (boundary seminorms
    down to order 0) or "hbd" (one boundary seminorm).  weight "alpha" is the
    weighted scale, 0.0 the unweighted one.
    """
    if ell == 0:
        return {
            "U": [(1.0, "hbulk", 0, "alpha"), (0.0, "hsplit", 2, "alpha"), (0.5, "hbd", 0, "alpha")],
            "F": [(0.0, "hbulk", 0, "alpha"), ("alpha/2", "hbulk", 0, 0.0)],
            "G": [(0.0, "hbd", 0.5, "alpha"), (0.25, "hbd", 0, "alpha"), ("alpha/2+1/4", "hbd", 0, 0.0)],
        }
    L = ell
    return {
        "U": [(j / 2, "bulk", L + 2 - j, "alpha") for j in range(L + 3)],
        "F": [(j / 2, "bulk", L - j, "alpha") for j in range(L + 1)],
        "G": ([(j / 2, "bd", L - j + 0.5, "alpha") for j in range(L + 1)]
              + [((L + 0.5) / 2, "hbd", 0, "alpha"), ((L - 0.5) / 2, "bd", 1.0, "alpha")]),
    }


def _time_order(s, alpha: float) -> float:
    if s == "alpha/2":
        return alpha / 2
    if s == "alpha/2+1/4":
        return alpha / 2 + 0.25
    return float(s)


def _space_sq(kind: str, order, weight: float, obj, alpha1: float, cache: dict) -> float:
    """Squared spatial norm of one transform slice."""
    key = (kind, order, weight)
    if key in cache:
        return cache[key]
    if kind == "hbulk":
        val = bulk_seminorm(obj, order, weight, squared=True)
    elif kind == "hsplit":
        if sigma_omega(order + weight) <= 0:
            val = bulk_seminorm(obj, order, weight, squared=True)
        else:
            sr = split_singular(obj, order, weight, alpha1, with_log=False)
            val = bulk_seminorm(sr.regular, order, weight, squared=True) + poly_norm(sr.expansion, order, weight,
                                                                                   squared=True)
    elif kind == "bulk":
        if sigma_omega(order + weight) <= 0:
            val = sum(bulk_seminorm(obj, i, weight, squared=True) for i in range(order + 1))
        else:
            sr = split_singular(obj, order, weight, alpha1, with_log=False)
            val = sum(bulk_seminorm(sr.regular, i, weight, squared=True) for i in range(order + 1))
            val += poly_norm(sr.expansion, order, weight, squared=True)
    elif kind == "hbd":
        val = boundary_seminorm(obj, order, weight, squared=True, tail_tol=SWEEP_TAIL_TOL)
    elif kind == "bd":
        orders = {0.0}
        o = float(order)
        while o > 0:
            orders.add(o)
            o -= 1.0
        val = sum(boundary_seminorm(obj, x, weight, squared=True, tail_tol=SWEEP_TAIL_TOL) for x in orders)
    else:
        raise KeyError(kind)
    cache[key] = val
    return val


def _assemble_norm(recipe, slices, mu, d_omega, alpha, alpha1) -> tuple[float, dict]:
    parts = {}
    for s, kind, order, wt in recipe:
        parts[(str(s), kind, order, str(wt))] = 0.0
    for k, obj in slices:
        cache: dict = {}
        m = abs(mu[k]) + GAMMA
        for s, kind, order, wt in recipe:
            weight = alpha if wt == "alpha" else float(wt)
            target = obj.traces() if kind in ("hbd", "bd") and isinstance(obj, WedgeField) else obj
            sq = _space_sq(kind, order, weight, target, alpha1, cache)
            parts[(str(s), kind, order, str(wt))] += d_omega * m ** (2 * _time_order(s, alpha)) * sq
    total = float(np.sqrt(sum(parts.values())))
    return total, parts


def verify_wellposedness(sol: HeatSolution, ell: int = 0, alpha: Optional[float] = None,
                         alpha1: Optional[float] = None, rel_cut: float = 1e-12,
                         eval_s_min: Optional[float] = None) -> NormReport:
    """LHS and RHS of the parabolic estimate and their ratio, on the contour side.

    ell = 0 uses the base well-posedness norms, ell >= 1 the higher-regularity
    ones.  Nodes whose transforms are below ``rel_cut`` of the largest are skipped.
    ``eval_s_min`` restricts the norms to s >= eval_s_min; higher-order tip
    weights otherwise amplify the inner-end closure of the solver.
    """
    alpha = sol.params.alpha if alpha is None else alpha
    alpha1 = sol.params.alpha1 if alpha1 is None else alpha1
    grid = sol.grid
    rec = norm_recipe(ell)
    i0 = 0 if eval_s_min is None else int(np.searchsorted(grid.s, eval_s_min))
    n_s = grid.n_s
    egrid = grid.sub(i0, n_s)
    sizes = np.array([np.linalg.norm(sol.u_hat[k]) for k in range(len(sol.mu))])
    keep = [k for k in range(len(sol.mu)) if sizes[k] > rel_cut * sizes.max()] if sizes.max() > 0 else []
    rep = NormReport()
    if not keep:
        for key in ("lhs", "rhs", "ratio"):
            rep.add(key, ell, alpha, 0.0)
        return rep
    u_sl = [(k, WedgeField(egrid, sol.u_hat[k, i0:])) for k in keep]
    lhs, lp = _assemble_norm(rec["U"], u_sl, sol.mu, sol.d_omega, alpha, alpha1)
    rhs_sq = 0.0
    parts = {"U": lp}
    if sol.f_hat is not None:
        f_sl = [(k, WedgeField(egrid, sol.f_hat[k, i0:])) for k in keep]
        fn, fp = _assemble_norm(rec["F"], f_sl, sol.mu, sol.d_omega, alpha, alpha1)
        rhs_sq += fn ** 2
        parts["F"] = fp
    if sol.g_hat is not None:
        g_sl = [(k, BoundaryTrace(egrid, sol.g_hat[k, 0, i0:], sol.g_hat[k, 1, i0:])) for k in keep]
        gn, gp = _assemble_norm(rec["G"], g_sl, sol.mu, sol.d_omega, alpha, alpha1)
        rhs_sq += gn ** 2
        parts["G"] = gp
    rhs = float(np.sqrt(rhs_sq))
    rep.add("lhs", ell, alpha, lhs)
    rep.add("rhs", ell, alpha, rhs)
    rep.add("ratio", ell, alpha, lhs / rhs if rhs > 0 else 0.0)
    rep.extras["parts"] = {k: {"|".join(map(str, kk)): vv for kk, vv in v.items()} for k, v in parts.items()}
    rep.extras["nodes_used"] = len(keep)
    return rep
