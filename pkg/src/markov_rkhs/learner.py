"""Online regularized least squares in an RKHS.

    f_{t+1} = (1 - gamma_t*lam) f_t - gamma_t (f_t(x_t) - y_t) K_{x_t},
    gamma_t = 1 / ((lam + C_K^2) t^theta).

Two engines run the same recursion.  ``exact`` applies :func:`update` on an
:class:`RkhsFunction` and measures distances with joint Gram matrices.
``fast`` is a compiled loop that tracks the iterate through its values at
Chebyshev points and keeps ``||f||_K^2`` and ``<f, f_lam>_K`` current with the
identities

    ||s f + w K_x||^2 = s^2 ||f||^2 + 2 s w f(x) + w^2 K(x, x)
    <s f + w K_x, g>  = s <f, g> + w g(x),

so a step costs O(m) instead of O(t).
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import _fastloop
from .errors import NumericalPSDError
from .kernels import Kernel, RkhsFunction, inner, k_distance, k_norm
from .quadrature import Quadrature, gauss_legendre


@dataclass(frozen=True)
class LearnerConfig:
    lam: float
    theta: float
    kernel: Kernel
    M: float = 1.0
    f1: RkhsFunction | None = None
    debug: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not 0.5 < self.theta <= 1.0:
            raise ValueError("theta must lie in (1/2, 1]")
        if not self.M > 0:
            raise ValueError("M must be positive")
        if self.f1 is not None and self.f1.kernel != self.kernel:
            raise ValueError("f1 must live in the configured kernel")

    @property
    def ck2(self) -> float:
        return self.kernel.sup_bound() ** 2

    def initial(self) -> RkhsFunction:
        return RkhsFunction.zero(self.kernel) if self.f1 is None else self.f1.copy()

    def norm_bound(self) -> float:
        """M C_K / lam, the radius kept invariant by the update when f1 = 0."""
        return self.M * self.kernel.sup_bound() / self.lam


@dataclass
class LearnerState:
    t: int
    f: RkhsFunction

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("t must be at least 1")


@dataclass(frozen=True)
class Checkpoint:
    t: int
    k_dist_to_target: float
    rho_dist_to_target: float
    rho_dist_to_frho: float
    atoms: int


@dataclass
class RunResult:
    checkpoints: list[Checkpoint]
    config_hash: str = ""
    seed: int | None = None
    wall_time: float = 0.0
    profile: dict | None = None
    final: object = field(default=None, repr=False, compare=False)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(c, name) for c in self.checkpoints], dtype=float)

    @property
    def ts(self) -> np.ndarray:
        return np.array([c.t for c in self.checkpoints], dtype=np.int64)


def step_size(t: int, cfg: LearnerConfig) -> float:
    if t < 1:
        raise ValueError("t must be at least 1")
    return 1.0 / ((cfg.lam + cfg.ck2) * float(t) ** cfg.theta)


def gradient(z, f: RkhsFunction, lam: float) -> RkhsFunction:
    """(f(x) - y) K_x + lam f."""
    x, y = z
    res = f(x) - y
    return RkhsFunction(
        f.kernel,
        np.append(f.support, x),
        np.append(lam * f.scaled_coeffs(), res),
    )


def loss(z, f: RkhsFunction, lam: float) -> float:
    x, y = z
    r = f(x) - y
    return 0.5 * (r * r + lam * k_norm(f) ** 2)


def update(state: LearnerState, z, cfg: LearnerConfig) -> LearnerState:
    """One step of the recursion.  ``state.f`` is advanced in place."""
    x, y = z
    f = state.f
    gamma = step_size(state.t, cfg)
    w = -gamma * (f(x) - y)
    f.scaled_update(1.0 - gamma * cfg.lam, x, w)
    if cfg.debug:
        bound = cfg.norm_bound()
        nrm = k_norm(f)
        if nrm > bound * (1 + 1e-9) + 1e-12 and cfg.f1 is None:
            raise AssertionError(f"iterate norm {nrm:.6g} exceeds M C_K / lam = {bound:.6g}")
    return LearnerState(state.t + 1, f)


def naive_iterates(xs, ys, cfg: LearnerConfig) -> tuple[np.ndarray, np.ndarray]:
    """Dense recomputation with explicit coefficients and no lazy scale (test oracle)."""
    f1 = cfg.initial().fold_scale()
    sup = list(f1.support)
    c = np.array(f1.coeffs, dtype=float)
    k = cfg.kernel
    for i, (x, y) in enumerate(zip(xs, ys)):
        gamma = step_size(i + 1, cfg)
        fx = float(c @ k._raw(np.asarray(sup), x)) if len(sup) else 0.0
        c = np.append((1.0 - gamma * cfg.lam) * c, -gamma * (fx - y))
        sup.append(float(x))
    return np.asarray(sup), c


def _validate_checkpoints(checkpoints: Sequence[int], n: int) -> np.ndarray:
    ck = np.asarray(sorted(int(t) for t in checkpoints), dtype=np.int64)
    if len(ck) and ck[0] < 1:
        raise ValueError("checkpoints must be >= 1")
    if len(ck) and ck[-1] > n + 1:
        if n == 0:
            raise ValueError("empty stream cannot reach checkpoints beyond t=1")
        raise ValueError(f"checkpoint {ck[-1]} exceeds stream length + 1 = {n + 1}")
    return ck


def _frho_nodes(frho, q: Quadrature) -> np.ndarray:
    if frho is None:
        return np.zeros(q.n)
    if callable(frho):
        return np.asarray(frho(q.nodes), float)
    vals = np.asarray(frho, float)
    if vals.shape != (q.n,):
        raise ValueError("frho node values do not match the quadrature")
    return vals


def _rho(q: Quadrature, vals) -> float:
    return math.sqrt(max(float(q.weights @ (vals * vals)), 0.0))


@lru_cache(maxsize=32)
def chebyshev_resolution(kernel: Kernel, tol: float = 1e-13, mmax: int = 512) -> int | None:
    """Smallest m in 16, 32, ... whose interpolant reproduces K(x0, .) to tol."""
    lo, hi = kernel.domain
    probe = np.linspace(lo, hi, 2001)
    centers = np.linspace(lo, hi, 9)
    ref = kernel._raw(centers[:, None], probe[None, :])
    size = max(1.0, float(np.abs(ref).max()))
    m = 16
    while m <= mmax:
        nodes, w = _fastloop.chebyshev_nodes(m, lo, hi)
        E = _fastloop.interp_matrix(nodes, w, probe)
        approx = kernel._raw(centers[:, None], nodes[None, :]) @ E.T
        if np.abs(approx - ref).max() <= tol * size:
            return m
        m *= 2
    return None


def _sqrt_dist(d2: float, scale: float) -> float:
    if d2 < 0:
        if d2 < -1e-10 * max(1.0, scale):
            raise NumericalPSDError(f"tracked squared distance {d2:.3e} is negative")
        return 0.0
    return math.sqrt(d2)


def _run_exact(xs, ys, cfg, ck, target, frho_vals, q) -> tuple[list[Checkpoint], RkhsFunction]:
    state = LearnerState(1, cfg.initial())
    tvals = target(q.nodes)
    out = []
    k = 0

    def record():
        f = state.f
        fv = f(q.nodes)
        out.append(Checkpoint(state.t, k_distance(f, target), _rho(q, fv - tvals), _rho(q, fv - frho_vals), len(f)))

    for i in range(len(xs)):
        while k < len(ck) and ck[k] == state.t:
            record()
            k += 1
        if k == len(ck):
            break
        state = update(state, (float(xs[i]), float(ys[i])), cfg)
    while k < len(ck):
        record()
        k += 1
    return out, state.f


def _run_fast(xs, ys, cfg, ck, target, frho_vals, q, m) -> tuple[list[Checkpoint], RkhsFunction]:
    k = cfg.kernel
    lo, hi = k.domain
    nodes, bw = _fastloop.chebyshev_nodes(m, lo, hi)
    f1 = cfg.initial().fold_scale()
    n = int(ck[-1]) - 1 if len(ck) else len(xs)
    xs = np.ascontiguousarray(xs[:n], dtype=float)
    ys = np.ascontiguousarray(ys[:n], dtype=float)
    k.check_domain(xs)
    cache = f1(nodes) if len(f1) else np.zeros(m)
    cache = np.ascontiguousarray(cache, dtype=float)
    g_cache = np.ascontiguousarray(target(nodes), dtype=float)
    norm2 = k_norm(f1) ** 2
    inner0 = inner(f1, target)
    g_norm2 = k_norm(target) ** 2
    nck = len(ck)
    out_norm2 = np.empty(nck)
    out_inner = np.empty(nck)
    out_cache = np.empty((nck, m))
    n0 = len(f1)
    atom_c = np.zeros(n0 + n)
    atom_c[:n0] = f1.coeffs
    code, p1, p2 = k.code
    scale, fail = _fastloop.learner_loop(
        xs, ys, float(cfg.lam), float(cfg.ck2), float(cfg.theta), code, p1, p2, nodes, bw, cache,
        float(norm2), float(inner0), g_cache, ck, out_norm2, out_inner, out_cache, atom_c, n0,
        bool(cfg.debug and cfg.f1 is None), cfg.norm_bound() ** 2,
    )
    if fail:
        raise AssertionError(f"iterate norm exceeds M C_K / lam at t={fail}")
    E = _fastloop.interp_matrix(nodes, bw, q.nodes)
    tvals = target(q.nodes)
    out = []
    for j, t in enumerate(ck):
        fv = E @ out_cache[j]
        d2 = out_norm2[j] - 2.0 * out_inner[j] + g_norm2
        out.append(
            Checkpoint(
                int(t),
                _sqrt_dist(d2, out_norm2[j] + g_norm2),
                _rho(q, fv - tvals),
                _rho(q, fv - frho_vals),
                n0 + int(t) - 1,
            )
        )
    final = RkhsFunction(k, np.concatenate([f1.support, xs]), atom_c, scale)
    return out, final


def run(
    stream,
    cfg: LearnerConfig,
    checkpoints: Sequence[int],
    target: RkhsFunction | None = None,
    frho: Callable | np.ndarray | None = None,
    q: Quadrature | None = None,
    engine: str = "auto",
) -> RunResult:
    """Apply the recursion along ``stream = (xs, ys)`` and record distances at checkpoints.

    ``target`` is f_{lam,mu} (zero if omitted); ``frho`` is a callable or its
    node values on ``q``.  The run stops after the last checkpoint.
    """
    start = time.perf_counter()
    xs, ys = (np.asarray(a, dtype=float) for a in stream)
    if xs.shape != ys.shape:
        raise ValueError("xs and ys must have equal length")
    ck = _validate_checkpoints(checkpoints, len(xs))
    q = gauss_legendre() if q is None else q
    target = RkhsFunction.zero(cfg.kernel) if target is None else target
    if target.kernel != cfg.kernel:
        raise ValueError("target lives in a different kernel")
    frho_vals = _frho_nodes(frho, q)
    if engine not in ("auto", "fast", "exact"):
        raise ValueError(f"unknown engine {engine!r}")
    m = None if engine == "exact" else chebyshev_resolution(cfg.kernel)
    if engine == "fast" and m is None:
        warnings.warn("kernel not resolvable by Chebyshev interpolation; using the exact engine", stacklevel=2)
    if len(ck) == 0:
        return RunResult([], wall_time=time.perf_counter() - start, final=cfg.initial())
    if m is None:
        out, final = _run_exact(xs, ys, cfg, ck, target, frho_vals, q)
    else:
        out, final = _run_fast(xs, ys, cfg, ck, target, frho_vals, q, m)
    return RunResult(out, wall_time=time.perf_counter() - start, final=final)
