"""Closed-form error bounds, constants and rate regimes, plus log-log slope fits.

All evaluators are pure functions of :class:`BoundInputs`.  With step sizes
``gamma_t = 1/((lam + C_K^2) t^theta)`` the strong-convexity and smoothness
constants of the regularized loss are ``kappa = lam`` and
``eta = lam + C_K^2``, so ``alpha = kappa / eta``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .copulas import MixingProfile
from .errors import DomainError, FitError, PreconditionError


@dataclass(frozen=True)
class BoundInputs:
    lam: float
    ck2: float
    M: float
    theta: float
    delta: float
    t: int
    init_dist: float = 0.0
    profile: MixingProfile | None = None
    family: str = "phi"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.ck2 < 0:
            raise ValueError("C_K^2 must be nonnegative")
        if not self.M > 0:
            raise ValueError("M must be positive")
        if not 0.5 < self.theta <= 1.0:
            raise ValueError("theta must lie in (1/2, 1]")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.t < 1:
            raise ValueError("t must be at least 1")
        if self.init_dist < 0:
            raise ValueError("init_dist must be nonnegative")
        if self.family not in ("phi", "beta"):
            raise ValueError("family must be 'phi' or 'beta'")

    def at(self, t: int) -> "BoundInputs":
        return replace(self, t=int(t))


@dataclass(frozen=True)
class RateRegime:
    exponent_t: float
    log_factor: bool
    description: str


def alpha(lam: float, ck2: float) -> float:
    return lam / (lam + ck2)


def c_theta(theta: float) -> float:
    """8 + (2/(2 theta - 1)) (theta / (e (2 - 2^theta)))^(theta/(1 - theta)), theta in (1/2, 1)."""
    if not 0.5 < theta < 1.0:
        raise DomainError("C_theta is defined for theta in (1/2, 1) only")
    base = theta / (math.e * (2.0 - 2.0**theta))
    try:
        return 8.0 + (2.0 / (2.0 * theta - 1.0)) * base ** (theta / (1.0 - theta))
    except OverflowError:
        return math.inf


def sigma_sq(M: float, ck2: float, lam: float) -> float:
    return (2.0 * M * ck2 * (lam + ck2) / lam) ** 2


def c_prime(M: float, ck2: float) -> float:
    return 4.0 * (M * ck2) ** 2


def tau(theta: float) -> float:
    """Exponent of 1/lam in the composite rate lam^{-tau} t^{-theta/2}."""
    if not 0.5 < theta < 1.0:
        raise DomainError("tau is defined for theta in (1/2, 1)")
    return (2.0 - theta) / (2.0 * (1.0 - theta))


def _profile_Dr(profile: MixingProfile | None) -> tuple[float, float]:
    if profile is None or profile.kind == "independent":
        return 0.0, 0.0
    if profile.kind != "exponential":
        raise PreconditionError("sampling bounds need an exponential mixing profile")
    return float(profile.D), float(profile.r)


def mixing_factor(inp: BoundInputs) -> float:
    """1 + c D r / (1 - r) with c = 4 for theta < 1 and c = 6 for theta = 1."""
    D, r = _profile_Dr(inp.profile)
    if D == 0.0:
        return 1.0
    c = 6.0 if inp.theta == 1.0 else 4.0
    return 1.0 + c * D * r / (1.0 - r)


def init_decay(a: float, theta: float, t: int) -> float:
    if theta == 1.0:
        return float(t) ** (-a)
    return math.exp((2.0 * a / (1.0 - theta)) * (1.0 - float(t) ** (1.0 - theta)))


def init_bound(inp: BoundInputs) -> float:
    return init_decay(alpha(inp.lam, inp.ck2), inp.theta, inp.t) * inp.init_dist


def hilbert_samp_bound(sig2: float, kappa: float, eta: float, theta: float, delta: float, t: int,
                       profile: MixingProfile | None = None) -> float:
    """Sampling-error bound for SGD on a kappa-convex, eta-smooth quadratic.

    The kernel case is ``sig2 / kappa^2 = c' / lam^2`` with ``kappa = lam``.
    """
    a = kappa / eta
    dummy = BoundInputs(kappa, eta - kappa, 1.0, theta, delta, t, profile=profile)
    fac = mixing_factor(dummy)
    if theta == 1.0:
        if a >= 0.5:
            raise PreconditionError(f"theta = 1 requires alpha < 1/2 (got {a:.6g})")
        return (4.0 * sig2 / (delta * kappa**2)) * (1.0 / (1.0 - 2.0 * a)) * float(t) ** (-a) * fac
    return (sig2 * c_theta(theta) / (delta * kappa**2)) * (1.0 / a) ** (theta / (1.0 - theta)) * float(t) ** (-theta) * fac


def samp_bound(inp: BoundInputs) -> float:
    """Bound on E_samp(t)^2, holding with probability at least 1 - delta.

    phi and beta families share the formula, with (D, r) read from the
    profile either way.
    """
    a = alpha(inp.lam, inp.ck2)
    fac = mixing_factor(inp)
    cp = c_prime(inp.M, inp.ck2)
    if inp.theta == 1.0:
        if a >= 0.5:
            raise PreconditionError(f"theta = 1 requires alpha < 1/2, i.e. lambda < C_K^2 (got alpha={a:.6g})")
        return (4.0 * cp / (inp.delta * inp.lam**2)) * (1.0 / (1.0 - 2.0 * a)) * float(inp.t) ** (-a) * fac
    return (cp * c_theta(inp.theta) / (inp.delta * inp.lam**2)) * (1.0 / a) ** (inp.theta / (1.0 - inp.theta)) * float(inp.t) ** (-inp.theta) * fac


def total_bound(inp: BoundInputs) -> float:
    return init_bound(inp) + math.sqrt(samp_bound(inp))


def poly_rate(theta: float, k: float) -> RateRegime:
    if not k > 0:
        raise DomainError("decay exponent k must be positive")
    if not 0.5 < theta < 1.0:
        raise DomainError("theta must lie in (1/2, 1)")
    if k < 1:
        return RateRegime((1.0 - k - theta) / 2.0, False, "slow mixing: t^((1-k-theta)/2)")
    if k == 1:
        return RateRegime(-theta / 2.0, True, "boundary: t^(-theta/2) (log t)^(1/2)")
    return RateRegime(-theta / 2.0, False, "fast polynomial mixing: t^(-theta/2)")


def slope_fit(points: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
    """OLS of log(value) on log(t); returns (slope, intercept, r^2)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise FitError("slope fit needs at least 3 points")
    t, v = pts[:, 0], pts[:, 1]
    if np.any(v <= 0) or np.any(t <= 0):
        raise FitError("slope fit needs positive t and values")
    x, y = np.log(t), np.log(v)
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    if sxx == 0:
        raise FitError("slope fit needs distinct t values")
    slope = float(((x - xm) * (y - ym)).sum()) / sxx
    intercept = ym - slope * xm
    ss_res = float(((y - intercept - slope * x) ** 2).sum())
    ss_tot = float(((y - ym) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return slope, float(intercept), r2


BOUNDS_COLUMNS = ("theta", "lambda", "ck2", "M", "delta", "D", "r", "t", "e_init_bound", "e_samp_sq_bound", "mixing_factor")


def bounds_row(inp: BoundInputs) -> dict:
    D, r = _profile_Dr(inp.profile)
    try:
        samp = samp_bound(inp)
    except PreconditionError:
        samp = float("nan")
    return {
        "theta": inp.theta, "lambda": inp.lam, "ck2": inp.ck2, "M": inp.M, "delta": inp.delta,
        "D": D, "r": r, "t": inp.t, "e_init_bound": init_bound(inp),
        "e_samp_sq_bound": samp, "mixing_factor": mixing_factor(inp),
    }
