"""Bivariate copulas, Darsow products on grids, and mixing coefficients.

All chains here have uniform marginals, so a copula is the whole transition
law: ``P(U_t <= v | U_{t-1} = u) = C_{,1}(u, v)``.  The t-step copula is the
t-fold Darsow product, computed on a grid of cell-averaged densities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DomainError, FitError, InvalidCopulaError

_SLACK = 1e-12


def _check_unit(*xs):
    out = []
    for x in xs:
        x = np.asarray(x, dtype=float)
        if np.any(x < -_SLACK) or np.any(x > 1 + _SLACK) or np.any(np.isnan(x)):
            raise DomainError("copula arguments must lie in the unit square")
        out.append(np.clip(x, 0.0, 1.0))
    return out


@dataclass(frozen=True, eq=False)
class GridCopula:
    """Cell-averaged density on an n-by-n uniform grid of the unit square.

    ``smooth`` marks grids rendered from smooth analytic densities (or products
    of such); it only changes how :func:`phi_coefficient` treats the boundary.
    """

    density: np.ndarray
    smooth: bool = False

    def __post_init__(self):
        d = np.array(self.density, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InvalidCopulaError("grid density must be a square matrix")
        if np.any(d < -1e-12):
            raise InvalidCopulaError("grid density must be nonnegative")
        d.setflags(write=False)
        object.__setattr__(self, "density", d)

    @property
    def n(self) -> int:
        return self.density.shape[0]

    def row_masses(self) -> np.ndarray:
        return self.density.sum(axis=1) / self.n

    def col_masses(self) -> np.ndarray:
        return self.density.sum(axis=0) / self.n

    def validate(self, tol: float = 1e-8) -> "GridCopula":
        if abs(self.density.sum() / self.n**2 - 1.0) > tol:
            raise InvalidCopulaError("grid density does not integrate to one")
        if np.max(np.abs(self.row_masses() - 1.0)) > tol:
            raise InvalidCopulaError("grid rows do not integrate to one")
        if np.max(np.abs(self.col_masses() - 1.0)) > tol:
            raise InvalidCopulaError("grid columns do not integrate to one")
        return self

    @cached_property
    def cumulative(self) -> np.ndarray:
        """Row-wise CDF at the cell edges, shape (n, n+1)."""
        cum = np.zeros((self.n, self.n + 1))
        np.cumsum(self.density / self.n, axis=1, out=cum[:, 1:])
        cum.setflags(write=False)
        return cum


@dataclass(frozen=True, eq=False)
class Copula:
    """independence | fgm(rho) | mixture(eps, base) = eps*Pi + (1-eps)*base | grid."""

    family: str
    rho: float = 0.0
    eps: float = 1.0
    base: "Copula | None" = None
    grid: GridCopula | None = None

    def __post_init__(self):
        if self.family == "fgm" and not -1.0 <= self.rho <= 1.0:
            raise ValueError("fgm parameter must lie in [-1, 1]")
        if self.family == "mixture":
            if not 0.0 < self.eps <= 1.0:
                raise ValueError("mixture weight must lie in (0, 1]")
            if self.base is None:
                raise ValueError("mixture needs a base copula")
        if self.family == "grid" and self.grid is None:
            raise ValueError("grid copula needs a GridCopula")
        if self.family not in ("independence", "fgm", "mixture", "grid"):
            raise ValueError(f"unknown copula family {self.family!r}")

    @classmethod
    def independence(cls) -> "Copula":
        return cls("independence")

    @classmethod
    def fgm(cls, rho: float) -> "Copula":
        return cls("fgm", rho=float(rho))

    @classmethod
    def mixture(cls, eps: float, base: "Copula | GridCopula") -> "Copula":
        return cls("mixture", eps=float(eps), base=as_copula(base))

    @classmethod
    def from_grid(cls, grid: GridCopula | np.ndarray) -> "Copula":
        if not isinstance(grid, GridCopula):
            grid = GridCopula(grid)
        return cls("grid", grid=grid)

    @property
    def is_smooth(self) -> bool:
        if self.family == "grid":
            return self.grid.smooth
        if self.family == "mixture":
            return self.base.is_smooth
        return True

    def lower_bound(self) -> float:
        """Essential infimum of the density."""
        if self.family == "independence":
            return 1.0
        if self.family == "fgm":
            return 1.0 - abs(self.rho)
        if self.family == "grid":
            return float(self.grid.density.min())
        return self.eps + (1.0 - self.eps) * self.base.lower_bound()

    def to_dict(self) -> dict:
        if self.family == "independence":
            return {"family": "independence"}
        if self.family == "fgm":
            return {"family": "fgm", "rho": self.rho}
        if self.family == "mixture":
            return {"family": "mixture", "eps": self.eps, "base": self.base.to_dict()}
        return {"family": "grid", "density": self.grid.density.tolist()}


def as_copula(c: "Copula | GridCopula") -> Copula:
    return Copula.from_grid(c) if isinstance(c, GridCopula) else c


def _grid_lookup(grid: GridCopula, u, v):
    n = grid.n
    i = np.minimum((u * n).astype(int), n - 1)
    j = np.minimum((v * n).astype(int), n - 1)
    return i, j


def copula_density(c: Copula | GridCopula, u, v):
    u, v = _check_unit(u, v)
    c = as_copula(c)
    if c.family == "independence":
        out = np.ones(np.broadcast(u, v).shape)
    elif c.family == "fgm":
        out = 1.0 + c.rho * (1.0 - 2.0 * u) * (1.0 - 2.0 * v)
    elif c.family == "mixture":
        out = c.eps + (1.0 - c.eps) * copula_density(c.base, u, v)
    else:
        u, v = np.broadcast_arrays(u, v)
        i, j = _grid_lookup(c.grid, u, v)
        out = c.grid.density[i, j]
    return float(out) if np.ndim(out) == 0 else out


def conditional_cdf(c: Copula | GridCopula, u, v):
    """C_{,1}(u, v) = integral of the density over [0, v] at fixed u."""
    u, v = _check_unit(u, v)
    c = as_copula(c)
    if c.family == "independence":
        out = v * np.ones_like(u)
    elif c.family == "fgm":
        out = v + c.rho * (1.0 - 2.0 * u) * (v - v * v)
    elif c.family == "mixture":
        out = c.eps * v + (1.0 - c.eps) * conditional_cdf(c.base, u, v)
    else:
        u, v = np.broadcast_arrays(u, v)
        g = c.grid
        i, j = _grid_lookup(g, u, v)
        cum = g.cumulative
        out = cum[i, j] + g.density[i, j] * (v - j / g.n)
    return float(out) if np.ndim(out) == 0 else out


def copula_cdf(c: Copula | GridCopula, u, v):
    """C(u, v); closed form for the analytic families, cell integration for grids."""
    u, v = _check_unit(u, v)
    c = as_copula(c)
    if c.family == "independence":
        out = u * v
    elif c.family == "fgm":
        out = u * v * (1.0 + c.rho * (1.0 - u) * (1.0 - v))
    elif c.family == "mixture":
        out = c.eps * u * v + (1.0 - c.eps) * copula_cdf(c.base, u, v)
    else:
        g = c.grid
        n = g.n
        edges = np.arange(n + 1) / n
        # 2-d cumulative mass at cell corners, then bilinear inside the cell
        mass = np.zeros((n + 1, n + 1))
        mass[1:, 1:] = np.cumsum(np.cumsum(g.density, axis=0), axis=1) / n**2
        u, v = np.broadcast_arrays(u, v)
        i, j = _grid_lookup(g, u, v)
        du, dv = u - edges[i], v - edges[j]
        out = (
            mass[i, j]
            + (mass[i, j + 1] - mass[i, j]) * dv * n
            + (mass[i + 1, j] - mass[i, j]) * du * n
            + g.density[i, j] * du * dv
        )
    return float(out) if np.ndim(out) == 0 else out


def render(c: Copula | GridCopula, n: int) -> GridCopula:
    """Cell averages of the density on an n-by-n grid.

    For fgm the density is bilinear, so the cell average equals the value at
    the cell center.
    """
    c = as_copula(c)
    if c.family == "independence":
        return GridCopula(np.ones((n, n)), smooth=True)
    if c.family == "fgm":
        mid = 1.0 - 2.0 * (np.arange(n) + 0.5) / n
        return GridCopula(1.0 + c.rho * np.outer(mid, mid), smooth=True)
    if c.family == "mixture":
        base = render(c.base, n)
        return GridCopula(c.eps + (1.0 - c.eps) * base.density, smooth=base.smooth)
    g = c.grid
    if g.n == n:
        return g
    if n % g.n == 0:
        f = n // g.n
        return GridCopula(np.repeat(np.repeat(g.density, f, axis=0), f, axis=1), smooth=g.smooth)
    if g.n % n == 0:
        f = g.n // n
        d = g.density.reshape(n, f, n, f).mean(axis=(1, 3))
        return GridCopula(d, smooth=g.smooth)
    raise ValueError(f"cannot resample a {g.n}-grid to resolution {n}")


def darsow_product(a: Copula | GridCopula, b: Copula | GridCopula, n: int = 512) -> GridCopula:
    """Density of A*B at cell centers by n-point midpoint quadrature in the middle variable."""
    if n < 16:
        raise ValueError("grid resolution must be at least 16")
    ga, gb = render(a, n), render(b, n)
    return GridCopula(ga.density @ gb.density / n, smooth=ga.smooth and gb.smooth)


def copula_powers(c: Copula | GridCopula, tmax: int, n: int = 512) -> list[GridCopula]:
    """[C^{*1}, ..., C^{*tmax}] on an n-grid."""
    if tmax < 1:
        raise ValueError("tmax must be at least 1")
    g = render(c, n)
    out = [g]
    for _ in range(tmax - 1):
        out.append(GridCopula(out[-1].density @ g.density / n, smooth=g.smooth))
    return out


def iterate_copula(c: Copula | GridCopula, t: int, n: int = 512) -> GridCopula:
    return copula_powers(c, t, n)[-1]


def _row_deviation(ct: GridCopula, method: str = "half_l1") -> np.ndarray:
    """sup_B |int_B (c_t(x, y) - 1) dy| for every grid row x.

    The supremum over Borel B is attained at {y : c_t(x, y) > 1} or its
    complement and equals max(positive part, negative part).  Since each row
    integrates to one both parts are equal, so the value is half the L1
    distance of the row to the uniform density.  ``method="threshold"``
    evaluates the two threshold sets directly.
    """
    dev = ct.density - 1.0
    if method == "half_l1":
        return 0.5 * np.abs(dev).sum(axis=1) / ct.n
    if method == "threshold":
        pos = np.where(dev > 0, dev, 0.0).sum(axis=1) / ct.n
        neg = -np.where(dev < 0, dev, 0.0).sum(axis=1) / ct.n
        return np.maximum(pos, neg)
    raise ValueError(f"unknown method {method!r}")


def _checked(ct: GridCopula) -> GridCopula:
    if np.max(np.abs(ct.row_masses() - 1.0)) > 1e-6:
        raise InvalidCopulaError("row integrals of the t-step density deviate from one")
    return ct


def phi_coefficient(ct: GridCopula, method: str = "half_l1") -> float:
    """phi_t = ess sup over x of the row deviation.

    On a smooth grid the row functional is sampled at cell centers, which
    misses the boundary points x=0 and x=1 by half a cell.  The two outermost
    rows are linearly extrapolated to the boundary and included in the max.
    """
    h = _row_deviation(_checked(ct), method)
    best = float(h.max())
    if ct.smooth and ct.n >= 2:
        left = 1.5 * h[0] - 0.5 * h[1]
        right = 1.5 * h[-1] - 0.5 * h[-2]
        best = max(best, left, right)
    return float(min(max(best, 0.0), 1.0))


def beta_coefficient(ct: GridCopula, method: str = "half_l1") -> float:
    h = _row_deviation(_checked(ct), method)
    return float(min(max(h.mean(), 0.0), 1.0))


@dataclass(frozen=True)
class MixingProfile:
    """Decay envelope of phi_t (or beta_t).

    exponential: D * r**t;  polynomial: b * t**-k;  exact: stored values.
    ``D = 0`` (with ``r = 0``) encodes an independent sequence.
    """

    kind: str
    D: float = 0.0
    r: float = 0.0
    b: float = 0.0
    k: float = 0.0
    values: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.kind == "exponential":
            if self.D < 0 or not 0.0 <= self.r < 1.0:
                raise ValueError("exponential profile needs D >= 0 and r in [0, 1)")
            if self.r == 0.0 and self.D != 0.0:
                raise ValueError("r = 0 is reserved for the independent profile")
        elif self.kind == "polynomial":
            if not (self.b > 0 and self.k > 0):
                raise ValueError("polynomial profile needs b > 0 and k > 0")
        elif self.kind != "exact":
            raise ValueError(f"unknown profile kind {self.kind!r}")

    @classmethod
    def exponential(cls, D: float, r: float) -> "MixingProfile":
        return cls("exponential", D=float(D), r=float(r))

    @classmethod
    def polynomial(cls, b: float, k: float) -> "MixingProfile":
        return cls("polynomial", b=float(b), k=float(k))

    @classmethod
    def independent(cls) -> "MixingProfile":
        return cls("exponential", D=0.0, r=0.0)

    @classmethod
    def exact(cls, values) -> "MixingProfile":
        return cls("exact", values=tuple((int(t), float(v)) for t, v in values))

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "exponential":
            return self.D * self.r**t
        if self.kind == "polynomial":
            return self.b * t ** (-self.k)
        lookup = dict(self.values)
        return np.array([lookup[int(s)] for s in np.atleast_1d(t)])

    def to_dict(self) -> dict:
        if self.kind == "exponential":
            return {"kind": "exponential", "D": self.D, "r": self.r}
        if self.kind == "polynomial":
            return {"kind": "polynomial", "b": self.b, "k": self.k}
        return {"kind": "exact", "values": [list(v) for v in self.values]}


def fit_mixing_profile(values: Sequence[tuple[float, float]], kind: str = "exponential") -> MixingProfile:
    """Log-linear least squares, then the scale is raised just enough to dominate every point."""
    pts = [(float(t), float(v)) for t, v in values]
    if len(pts) < 2:
        raise FitError("need at least two (t, value) pairs")
    t = np.array([p[0] for p in pts])
    v = np.array([p[1] for p in pts])
    if np.any(v <= 0) or np.any(t <= 0):
        raise FitError("mixing coefficients must be strictly positive; drop zeros first")
    logv = np.log(v)
    if kind == "exponential":
        slope, icept = np.polyfit(t, logv, 1)
        r = math.exp(float(slope))
        if not r < 1.0:
            raise FitError(f"fitted rate r={r:.4g} does not decay")
        D = math.exp(icept)
        D = max(D, float(np.max(v / r**t)))
        return MixingProfile("exponential", D=D, r=r, values=tuple(pts))
    if kind == "polynomial":
        slope, icept = np.polyfit(np.log(t), logv, 1)
        k = -float(slope)
        if not k > 0:
            raise FitError(f"fitted exponent k={k:.4g} does not decay")
        b = math.exp(icept)
        b = max(b, float(np.max(v * t**k)))
        return MixingProfile("polynomial", b=b, k=k, values=tuple(pts))
    raise ValueError(f"unknown profile kind {kind!r}")


@dataclass(frozen=True)
class MixingTable:
    t: np.ndarray
    phi: np.ndarray
    beta: np.ndarray
    phi_profile: MixingProfile
    beta_profile: MixingProfile

    def rows(self):
        for t, p, b in zip(self.t, self.phi, self.beta):
            yield int(t), float(p), float(b)


def _profile_from(t, vals, zero_tol, kind="exponential") -> MixingProfile:
    keep = [(s, v) for s, v in zip(t, vals) if v > zero_tol]
    if len(keep) < 2:
        return MixingProfile.independent()
    return fit_mixing_profile(keep, kind)


def mixing_table(
    c: Copula | GridCopula, tmax: int = 6, n: int = 512, zero_tol: float = 1e-12, kind: str = "exponential"
) -> MixingTable:
    """phi_t and beta_t for t = 1..tmax plus fitted envelopes.

    Coefficients at or below ``zero_tol`` are treated as exact zeros and
    dropped before fitting; fewer than two survivors gives the D = 0 profile.
    """
    powers = copula_powers(c, tmax, n)
    t = np.arange(1, tmax + 1)
    phi = np.array([phi_coefficient(g) for g in powers])
    beta = np.array([beta_coefficient(g) for g in powers])
    return MixingTable(
        t, phi, beta, _profile_from(t, phi, zero_tol, kind), _profile_from(t, beta, zero_tol, kind)
    )


def band_copula(n: int, width: int) -> GridCopula:
    """Reflected band walk on n cells: move uniformly to one of the 2*width+1
    neighbouring cells, reflecting at the edges.  Symmetric, hence doubly stochastic."""
    if not 0 <= width < n:
        raise ValueError("band width must lie in [0, n)")
    P = np.zeros((n, n))
    idx = np.arange(n)
    for d in range(-width, width + 1):
        j = idx + d
        j = np.where(j < 0, -j - 1, j)
        j = np.where(j >= n, 2 * n - j - 1, j)
        np.add.at(P, (idx, j), 1.0 / (2 * width + 1))
    return GridCopula(P * n)
