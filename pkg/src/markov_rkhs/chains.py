"""Stationary copula-driven Markov chains and labelled sample streams.

Randomness comes from numpy's Philox4x64 counter-based generator keyed by
``(seed, stream)``: stream 0 drives the chain, stream 1 the label noise.  The
chain draws ``u_1`` and then one uniform per transition, in that order.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numba
import numpy as np
from scipy.special import ndtr, ndtri

from .copulas import Copula, GridCopula, as_copula

BISECT_ITERS = 60
BISECT_TOL = 1e-12

CHAIN_STREAM = 0
NOISE_STREAM = 1


def philox(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox4x64-10 keyed with the 64-bit seed (low word) and stream id (high word)."""
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.random.Generator(np.random.Philox(key=np.array([seed, stream], dtype=np.uint64)))


@dataclass(frozen=True)
class ChainConfig:
    copula: Copula
    length: int
    seed: int = 0
    burn_in: int = 0

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("chain length must be at least 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        object.__setattr__(self, "copula", as_copula(self.copula))


def _flatten(c: Copula):
    """Write c as w_pi*Pi + w_fgm*fgm(rho) + w_grid*grid (fgm is linear in rho)."""
    if c.family == "independence":
        return 1.0, 0.0, 0.0, 0.0, None
    if c.family == "fgm":
        return 0.0, 1.0, c.rho, 0.0, None
    if c.family == "grid":
        return 0.0, 0.0, 0.0, 1.0, c.grid
    w_pi, w_f, rho, w_g, grid = _flatten(c.base)
    k = 1.0 - c.eps
    return c.eps + k * w_pi, k * w_f, rho, k * w_g, grid


@numba.njit(cache=True)
def _cond_cdf(u, v, w_pi, w_f, rho, w_g, dens, cum):
    out = w_pi * v
    if w_f != 0.0:
        out += w_f * (v + rho * (1.0 - 2.0 * u) * (v - v * v))
    if w_g != 0.0:
        n = dens.shape[0]
        i = min(int(u * n), n - 1)
        j = min(int(v * n), n - 1)
        out += w_g * (cum[i, j] + dens[i, j] * (v - j / n))
    return out


@numba.njit(cache=True)
def _sample_path(u1, xi, w_pi, w_f, rho, w_g, dens, cum, iters, tol):
    n = xi.shape[0] + 1
    out = np.empty(n)
    out[0] = u1
    for t in range(1, n):
        u = out[t - 1]
        target = xi[t - 1]
        lo = 0.0
        hi = 1.0
        mid = 0.5
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            f = _cond_cdf(u, mid, w_pi, w_f, rho, w_g, dens, cum)
            if abs(f - target) <= tol:
                break
            if f < target:
                lo = mid
            else:
                hi = mid
        out[t] = mid
    return out


def sample_chain(cfg: ChainConfig) -> np.ndarray:
    """u_1 ~ U(0,1); u_{t+1} solves C_{,1}(u_t, v) = xi_t by bisection."""
    w_pi, w_f, rho, w_g, grid = _flatten(cfg.copula)
    if grid is None:
        dens = np.ones((1, 1))
        cum = np.zeros((1, 2))
    else:
        dens = np.ascontiguousarray(grid.density)
        cum = np.ascontiguousarray(grid.cumulative)
    draws = philox(cfg.seed, CHAIN_STREAM).random(cfg.length + cfg.burn_in)
    path = _sample_path(draws[0], draws[1:], w_pi, w_f, rho, w_g, dens, cum, BISECT_ITERS, BISECT_TOL)
    return path[cfg.burn_in :]


def truncated_normal(rng: np.random.Generator, sd: float, size: int, cut: float = 3.0) -> np.ndarray:
    """Centered Gaussian truncated at +-cut*sd, by inverse CDF."""
    if sd == 0.0:
        return np.zeros(size)
    lo = ndtr(-cut)
    p = lo + rng.random(size) * (1.0 - 2.0 * lo)
    return sd * ndtri(p)


def label_stream(us, target, noise_sd: float = 0.0, M: float = 1.0, seed: int = 0):
    """Pair each state with a bounded noisy label ``clamp(target(u) + eps, -M, M)``.

    Returns ``(xs, ys)`` arrays.
    """
    if not M > 0:
        raise ValueError("label bound M must be positive")
    if noise_sd < 0:
        raise ValueError("noise_sd must be nonnegative")
    xs = np.asarray(us, dtype=float)
    f = np.asarray(target(xs), dtype=float)
    if np.max(np.abs(f), initial=0.0) + 3.0 * noise_sd > M:
        warnings.warn("labels will be clipped: |f| + 3*noise_sd exceeds M", stacklevel=2)
    noise = truncated_normal(philox(seed, NOISE_STREAM), noise_sd, len(xs))
    return xs, np.clip(f + noise, -M, M)


def chain_stats(us: np.ndarray) -> dict:
    """Lag-1 autocorrelation, lag-1 Spearman correlation, KS distance to U(0,1)."""
    from scipy import stats

    us = np.asarray(us, dtype=float)
    out = {"length": len(us), "mean": float(us.mean())}
    if len(us) > 2:
        out["lag1_autocorr"] = float(np.corrcoef(us[:-1], us[1:])[0, 1])
        out["lag1_spearman"] = float(stats.spearmanr(us[:-1], us[1:]).statistic)
        ks = stats.kstest(us, "uniform")
        out["ks_stat"] = float(ks.statistic)
        out["ks_crit_1pct"] = 1.628 / math.sqrt(len(us))
    return out
