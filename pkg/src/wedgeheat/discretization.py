"""Log-polar grids, sampled fields, quadrature and test-function generators.

The wedge {r(cos phi, sin phi) : r > 0, 0 < phi < theta} is discretized in
the coordinates (s, phi) with s = ln r.  Both node sets are uniform and
include their end points.  Since dr/r = ds, every weighted radial integral
becomes a plain integral in s.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

TAIL_TOL = 1e-13

__all__ = [
    "TAIL_TOL",
    "LogPolarGrid",
    "WedgeField",
    "BoundaryTrace",
    "TestFunctionSpec",
    "GridError",
    "SupportError",
    "make_grid",
    "sample",
    "cutoff",
    "cutoff_derivatives",
    "trapezoid_weights",
    "quad_wedge",
    "quad_ray",
    "fd_weights",
    "diff_matrix",
    "save_field",
    "load_field",
]


class GridError(ValueError):
    """Invalid grid parameters."""


class SupportError(ValueError):
    """A sampled function does not fit inside the grid window."""


@dataclass(frozen=True)
class LogPolarGrid:
    theta: float
    s_min: float
    s_max: float
    n_s: int
    n_phi: int

    @property
    def ds(self) -> float:
        return (self.s_max - self.s_min) / (self.n_s - 1)

    @property
    def dphi(self) -> float:
        return self.theta / (self.n_phi - 1)

    @property
    def s(self) -> np.ndarray:
        return self.s_min + self.ds * np.arange(self.n_s)

    @property
    def r(self) -> np.ndarray:
        return np.exp(self.s)

    @property
    def phi(self) -> np.ndarray:
        return self.dphi * np.arange(self.n_phi)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_s, self.n_phi)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (S, PHI) arrays of shape (n_s, n_phi)."""
        return np.meshgrid(self.s, self.phi, indexing="ij")

    def refine(self) -> "LogPolarGrid":
        """Grid with both spacings halved (same window)."""
        return LogPolarGrid(self.theta, self.s_min, self.s_max,
                            2 * self.n_s, 2 * self.n_phi - 1)

    def to_dict(self) -> dict:
        return dict(theta=self.theta, s_min=self.s_min, s_max=self.s_max,
                    n_s=self.n_s, n_phi=self.n_phi)

    def sub(self, i0: int, i1: int) -> "LogPolarGrid":
        """Grid on the s-nodes i0 .. i1-1 (same spacing)."""
        s = self.s
        return LogPolarGrid(self.theta, float(s[i0]), float(s[i1 - 1]), i1 - i0, self.n_phi)


def make_grid(theta: float, s_min: float, s_max: float, n_s: int, n_phi: int,
              *, require_pow2: bool = True) -> LogPolarGrid:
    """Build a validated log-polar grid.

    ``require_pow2=False`` is used internally by refinement studies whose
    angular node count is 2m-1.
    """
    theta = float(theta)
    if not (0.0 < theta < 2.0 * np.pi):
        raise GridError(f"opening angle theta={theta!r} must lie in (0, 2*pi)")
    if not s_min < s_max:
        raise GridError(f"need s_min < s_max, got {s_min!r}, {s_max!r}")
    n_s, n_phi = int(n_s), int(n_phi)
    if n_s < 8:
        raise GridError(f"n_s={n_s} must be at least 8")
    if require_pow2 and n_s & (n_s - 1):
        raise GridError(f"n_s={n_s} must be a power of two")
    if n_phi < 4:
        raise GridError(f"n_phi={n_phi} must be at least 4")
    return LogPolarGrid(theta, float(s_min), float(s_max), n_s, n_phi)


@dataclass(frozen=True)
class WedgeField:
    grid: LogPolarGrid
    values: np.ndarray
    support_hint: Optional[tuple[float, float]] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.support_hint is not None:
            lo, hi = self.support_hint
            r = self.grid.r
            outside = (r < lo) | (r > hi)
            scale = max(np.abs(v).max(), 1.0)
            if outside.any() and np.abs(v[outside]).max() >= TAIL_TOL * scale:
                raise SupportError("field exceeds tail tolerance outside support_hint")

    def __add__(self, other: "WedgeField") -> "WedgeField":
        return WedgeField(self.grid, self.values + other.values)

    def __sub__(self, other: "WedgeField") -> "WedgeField":
        return WedgeField(self.grid, self.values - other.values)

    def scale(self, a: complex) -> "WedgeField":
        return WedgeField(self.grid, a * self.values)

    def window(self, i0: int, i1: int) -> "WedgeField":
        return WedgeField(self.grid.sub(i0, i1), self.values[i0:i1])

    def traces(self) -> "BoundaryTrace":
        """Restriction to the two boundary rays."""
        return BoundaryTrace(self.grid, self.values[:, 0], self.values[:, -1])


@dataclass(frozen=True)
class BoundaryTrace:
    """Samples on the lower ray (phi = 0) and/or the upper ray (phi = theta)."""

    grid: LogPolarGrid
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.lower is None and self.upper is None:
            raise ValueError("a trace needs at least one side")
        for name in ("lower", "upper"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr, dtype=complex)
            if arr.shape != (self.grid.n_s,):
                raise ValueError(f"{name} trace has shape {arr.shape}, expected ({self.grid.n_s},)")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def sides(self) -> list[tuple[str, np.ndarray]]:
        return [(n, a) for n, a in (("lower", self.lower), ("upper", self.upper)) if a is not None]

    def full(self) -> tuple[np.ndarray, np.ndarray]:
        z = np.zeros(self.grid.n_s, dtype=complex)
        return (z if self.lower is None else self.lower,
                z if self.upper is None else self.upper)

    def __add__(self, other: "BoundaryTrace") -> "BoundaryTrace":
        a, b = self.full(), other.full()
        return BoundaryTrace(self.grid, a[0] + b[0], a[1] + b[1])

    def __sub__(self, other: "BoundaryTrace") -> "BoundaryTrace":
        a, b = self.full(), other.full()
        return BoundaryTrace(self.grid, a[0] - b[0], a[1] - b[1])

    def window(self, i0: int, i1: int) -> "BoundaryTrace":
        cut = lambda a: None if a is None else a[i0:i1]
        return BoundaryTrace(self.grid.sub(i0, i1), cut(self.lower), cut(self.upper))

    def scale(self, a: complex) -> "BoundaryTrace":
        return BoundaryTrace(self.grid,
                             None if self.lower is None else a * self.lower,
                             None if self.upper is None else a * self.upper)


# ---------------------------------------------------------------- cut-off

def _bump_exp(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def cutoff(r) -> np.ndarray:
    """Smooth cut-off: 1 on [0, 1], 0 on [2, inf), C-infinity in between."""
    t = np.asarray(r, dtype=float) - 1.0
    a = _bump_exp(1.0 - t)
    b = _bump_exp(t)
    return a / (a + b)


def cutoff_derivatives(r) -> tuple[np.ndarray, np.ndarray]:
    """Return (zeta', zeta'') in r, in closed form."""
    r = np.asarray(r, dtype=float)
    t = r - 1.0
    d1 = np.zeros_like(r)
    d2 = np.zeros_like(r)
    m = (t > 0) & (t < 1)
    if m.any():
        tt = t[m]
        a = np.exp(-1.0 / (1.0 - tt))
        b = np.exp(-1.0 / tt)
        da = -a / (1.0 - tt) ** 2
        db = b / tt ** 2
        dda = a / (1.0 - tt) ** 4 - 2.0 * a / (1.0 - tt) ** 3
        ddb = b / tt ** 4 - 2.0 * b / tt ** 3
        S = a + b
        dS = da + db
        ddS = dda + ddb
        d1[m] = (da * S - a * dS) / S ** 2
        d2[m] = (dda * S - a * ddS) / S ** 2 - 2.0 * dS * (da * S - a * dS) / S ** 3
    return d1, d2


# ---------------------------------------------------------------- test functions

@dataclass(frozen=True)
class TestFunctionSpec:
    """Analytic test function description.

    kind is one of ``"log_gaussian"``, ``"monomial"`` (zeta * r**exponent)
    or ``"random"`` (sum of a few log-Gaussians with random angular modes).
    ``angular_mode`` multiplies the radial profile by cos(k*pi*phi/theta).
    """

    __test__ = False  # keep pytest from collecting this class

    kind: str
    center: float = 0.0
    width: float = 1.0
    exponent: float = 0.0
    seed: int = 0
    n_terms: int = 3
    angular_mode: int = 0
    complex_valued: bool = True
    extra: dict = dc_field(default_factory=dict)


def _radial(spec: TestFunctionSpec, s: np.ndarray) -> np.ndarray:
    if spec.kind == "log_gaussian":
        return np.exp(-((s - spec.center) / spec.width) ** 2)
    if spec.kind == "monomial":
        r = np.exp(s)
        return cutoff(r) * r ** spec.exponent
    raise ValueError(f"unknown test-function kind {spec.kind!r}")


def _max_width(c: float, lo: float, hi: float) -> float:
    # keeps weighted tails of random bumps far below the transform tolerance
    return min(c - lo, hi - c) / 8.5


def _random_wedge(spec: TestFunctionSpec, grid: LogPolarGrid) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    S, PHI = grid.mesh()
    out = np.zeros(grid.shape, dtype=complex)
    half = 0.5 * (grid.s_max - grid.s_min)
    for _ in range(spec.n_terms):
        c = spec.center + rng.uniform(-0.25, 0.25) * half
        w = min(spec.width * rng.uniform(0.6, 1.4), _max_width(c, grid.s_min, grid.s_max))
        k = rng.uniform(0.0, 3.0)
        ph = rng.uniform(0.0, 2 * np.pi)
        amp = rng.normal() + (1j * rng.normal() if spec.complex_valued else 0.0)
        out += amp * np.exp(-((S - c) / w) ** 2) * np.cos(k * PHI / grid.theta * np.pi + ph)
    return out


def _random_ray(spec: TestFunctionSpec, s: np.ndarray, rng) -> np.ndarray:
    half = 0.5 * (s[-1] - s[0])
    out = np.zeros(s.shape, dtype=complex)
    for _ in range(spec.n_terms):
        c = spec.center + rng.uniform(-0.25, 0.25) * half
        w = min(spec.width * rng.uniform(0.6, 1.4), _max_width(c, s[0], s[-1]))
        amp = rng.normal() + (1j * rng.normal() if spec.complex_valued else 0.0)
        out += amp * np.exp(-((s - c) / w) ** 2)
    return out


def _check_tails(values: np.ndarray, spec: TestFunctionSpec):
    v = np.abs(np.atleast_2d(values.T).T)
    scale = v.max() if v.size else 0.0
    if scale == 0.0:
        return
    ends = [v[-1]] if spec.kind == "monomial" else [v[0], v[-1]]
    if max(e.max() for e in ends) > TAIL_TOL * scale:
        raise SupportError(
            f"{spec.kind} test function is not below the tail tolerance at the grid ends; "
            "widen [s_min, s_max]")


def sample(spec: TestFunctionSpec, grid: LogPolarGrid, target: str = "wedge"):
    """Evaluate ``spec`` on ``grid``.

    target ``"wedge"`` gives a WedgeField; ``"trace"`` gives a BoundaryTrace with
    both sides, ``"lower"``/``"upper"`` a one-sided trace.
    """
    s = grid.s
    if target == "wedge":
        if spec.kind == "random":
            vals = _random_wedge(spec, grid)
        else:
            rad = _radial(spec, s)
            ang = np.cos(spec.angular_mode * np.pi * grid.phi / grid.theta)
            vals = np.outer(rad, ang).astype(complex)
        _check_tails(vals, spec)
        return WedgeField(grid, vals)
    if target not in ("trace", "lower", "upper"):
        raise ValueError(f"unknown target {target!r}")
    if spec.kind == "random":
        rng = np.random.default_rng(spec.seed)
        lo, hi = _random_ray(spec, s, rng), _random_ray(spec, s, rng)
    else:
        lo = hi = _radial(spec, s).astype(complex)
    _check_tails(np.stack([lo, hi], axis=1), spec)
    if target == "lower":
        return BoundaryTrace(grid, lo, None)
    if target == "upper":
        return BoundaryTrace(grid, None, hi)
    return BoundaryTrace(grid, lo, hi)


# ---------------------------------------------------------------- quadrature

def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def quad_wedge(field: WedgeField, weight_exponent: float = 0.0) -> float:
    """Trapezoid value of the double integral of r^(-2 beta) |v|^2 dr/r dphi."""
    g = field.grid
    logw = -2.0 * weight_exponent * g.s
    dens = np.abs(field.values) ** 2
    with np.errstate(over="ignore", invalid="ignore"):
        integrand = np.exp(logw)[:, None] * dens
    if not np.all(np.isfinite(integrand)):
        j = int(np.argmax(logw))
        m = int(np.argmax(dens[j]))
        raise OverflowError(
            f"weighted integrand overflows; dominating node s={g.s[j]:.6g}, phi={g.phi[m]:.6g}")
    ws = trapezoid_weights(g.n_s, g.ds)
    wp = trapezoid_weights(g.n_phi, g.dphi)
    return float(ws @ integrand @ wp)


def quad_ray(values: np.ndarray, s: np.ndarray, weight_exponent: float = 0.0) -> float:
    """Trapezoid value of the integral of e^(-2 beta s) |psi|^2 ds."""
    ds = s[1] - s[0]
    return float(trapezoid_weights(len(s), ds) @ (np.exp(-2.0 * weight_exponent * s) * np.abs(values) ** 2))


# ---------------------------------------------------------------- finite differences

def fd_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Fornberg weights for derivatives 0..m at z on nodes x; returns (m+1, len(x))."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = np.zeros((m + 1, n))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


def diff_matrix(n: int, h: float, deriv: int = 1, order: int = 4) -> np.ndarray:
    """Dense finite-difference matrix on n uniform nodes.

    Interior rows use centered stencils of the given accuracy order; rows near
    the ends switch to one-sided stencils of the same width.
    """
    wc = 2 * ((deriv + 1) // 2) - 1 + order
    wo = min(deriv + order, n)
    half = wc // 2
    D = np.zeros((n, n))
    x = np.arange(n, dtype=float)
    for i in range(n):
        if half <= i < n - half:
            idx = np.arange(i - half, i + half + 1)
        elif i < half:
            idx = np.arange(0, wo)
        else:
            idx = np.arange(n - wo, n)
        D[i, idx] = fd_weights(float(i), x[idx], deriv)[deriv]
    return D / h ** deriv


# ---------------------------------------------------------------- serialization

def _header_line(meta: dict) -> str:
    return json.dumps(meta, sort_keys=True)


def save_field(path, obj, extra: Optional[dict] = None) -> None:
    """Write a WedgeField or BoundaryTrace as columns (s, phi, Re, Im).

    The first line is a JSON header with the grid metadata; values are printed
    with 17 significant digits so the round trip is bit exact.
    """
    g = obj.grid
    if isinstance(obj, WedgeField):
        S, PHI = g.mesh()
        s_col, p_col, vals = S.ravel(), PHI.ravel(), obj.values.ravel()
        meta = {"type": "WedgeField", "grid": g.to_dict()}
        if obj.support_hint is not None:
            meta["support_hint"] = list(obj.support_hint)
    elif isinstance(obj, BoundaryTrace):
        cols = []
        sides = []
        for name, arr in obj.sides():
            ph = 0.0 if name == "lower" else g.theta
            cols.append((g.s, np.full(g.n_s, ph), arr))
            sides.append(name)
        s_col = np.concatenate([c[0] for c in cols])
        p_col = np.concatenate([c[1] for c in cols])
        vals = np.concatenate([c[2] for c in cols])
        meta = {"type": "BoundaryTrace", "grid": g.to_dict(), "sides": sides}
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    if extra:
        meta.update(extra)
    data = np.column_stack([s_col, p_col, vals.real, vals.imag])
    with open(Path(path), "w") as fh:
        fh.write("# " + _header_line(meta) + "\n")
        np.savetxt(fh, data, fmt="%.17g")


def load_field(path):
    with open(Path(path)) as fh:
        meta = json.loads(fh.readline()[2:])
        data = np.loadtxt(fh, ndmin=2)
    gd = meta["grid"]
    g = LogPolarGrid(gd["theta"], gd["s_min"], gd["s_max"], gd["n_s"], gd["n_phi"])
    vals = data[:, 2] + 1j * data[:, 3]
    if meta["type"] == "WedgeField":
        hint = meta.get("support_hint")
        return WedgeField(g, vals.reshape(g.shape), tuple(hint) if hint else None)
    parts = dict(zip(meta["sides"], np.split(vals, len(meta["sides"]))))
    return BoundaryTrace(g, parts.get("lower"), parts.get("upper"))
