"""Stochastic gradient descent on finite-dimensional quadratics driven by a chain.

The loss at state z is ``V_z(w) = 1/2 <A(z) w, w> + <B(z), w>`` with
``kappa I <= A(z) <= eta I``; the iteration is ``w_{t+1} = w_t - gamma_t (A(z_t) w_t + B(z_t))``
with ``gamma_t = 1 / (eta t^theta)``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ProblemError
from .learner import Checkpoint, RunResult, _validate_checkpoints
from .quadrature import Quadrature, gauss_legendre

MEAN_ZERO_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class QuadraticProblem:
    """``a_map(z)`` / ``b_map(z)`` accept an array of states and return
    shapes ``(n, dim, dim)`` / ``(n, dim)``."""

    dim: int
    a_map: Callable[[np.ndarray], np.ndarray]
    b_map: Callable[[np.ndarray], np.ndarray]
    kappa: float
    eta: float
    name: str = "custom"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if not 0 < self.kappa <= self.eta:
            raise ValueError("need 0 < kappa <= eta")

    def A(self, z) -> np.ndarray:
        return np.asarray(self.a_map(np.atleast_1d(np.asarray(z, float))), float)

    def B(self, z) -> np.ndarray:
        return np.asarray(self.b_map(np.atleast_1d(np.asarray(z, float))), float)

    @property
    def alpha(self) -> float:
        return self.kappa / self.eta

    @classmethod
    def default(cls, dim: int = 5, kappa: float = 0.5, eta: float = 2.0, b_coeffs=None) -> "QuadraticProblem":
        """A(z) = diag(kappa + (eta - kappa) z^(i+1)); B_i(z) = sum_k b[i, k] z^k.

        Default B_i(z) = (-1)^i / 2 + ((i + 1) / dim)(2 z - 1).  Both are
        polynomials, so Gauss-Legendre expectations are exact.
        """
        if b_coeffs is None:
            b_coeffs = np.array([[(-1.0) ** i * 0.5 - (i + 1) / dim, 2.0 * (i + 1) / dim] for i in range(dim)])
        b_coeffs = np.asarray(b_coeffs, float)
        if b_coeffs.shape[0] != dim:
            raise ValueError("b_coeffs needs one row per dimension")
        powers = np.arange(1, dim + 1)

        def a_map(z):
            d = kappa + (eta - kappa) * z[:, None] ** powers[None, :]
            out = np.zeros((len(z), dim, dim))
            idx = np.arange(dim)
            out[:, idx, idx] = d
            return out

        def b_map(z):
            V = z[:, None] ** np.arange(b_coeffs.shape[1])[None, :]
            return V @ b_coeffs.T

        return cls(dim, a_map, b_map, kappa, eta, name="default")

    @classmethod
    def constant(cls, A, B) -> "QuadraticProblem":
        """Deterministic problem: A and B do not depend on z."""
        A = np.atleast_2d(np.asarray(A, float))
        B = np.atleast_1d(np.asarray(B, float))
        ev = np.linalg.eigvalsh(A)
        return cls(
            len(B),
            lambda z: np.broadcast_to(A, (len(z),) + A.shape),
            lambda z: np.broadcast_to(B, (len(z),) + B.shape),
            float(ev.min()),
            float(ev.max()),
            name="constant",
        )


def expectations(p: QuadraticProblem, q: Quadrature | None = None):
    q = gauss_legendre() if q is None else q
    A_hat = np.einsum("j,jab->ab", q.weights, p.A(q.nodes))
    B_hat = q.weights @ p.B(q.nodes)
    return A_hat, B_hat


def minimizer(p: QuadraticProblem, q: Quadrature | None = None) -> np.ndarray:
    """w* = -E[A]^{-1} E[B] under the uniform stationary law."""
    A_hat, B_hat = expectations(p, q)
    w = -np.linalg.solve(A_hat, B_hat)
    res = float(np.linalg.norm(A_hat @ w + B_hat))
    if res > 1e-10:
        raise ProblemError(f"minimizer residual {res:.3e} above 1e-10")
    return w


def validate_assumptions(p: QuadraticProblem, q: Quadrature | None = None, grid: int = 1001):
    """Return (sigma^2, kappa_hat, eta_hat) over a z-grid; check E[grad V_z(w*)] = 0."""
    q = gauss_legendre() if q is None else q
    w = minimizer(p, q)
    zs = np.linspace(0.0, 1.0, grid)
    A = p.A(zs)
    g = np.einsum("nab,b->na", A, w) + p.B(zs)
    sig2 = float(np.max(np.sum(g * g, axis=1)))
    ev = np.linalg.eigvalsh(A)
    kappa_hat, eta_hat = float(ev.min()), float(ev.max())
    if kappa_hat < p.kappa - 1e-10 or eta_hat > p.eta + 1e-10:
        raise ProblemError(f"spectrum [{kappa_hat:.6g}, {eta_hat:.6g}] outside [kappa, eta]")
    gq = np.einsum("nab,b->na", p.A(q.nodes), w) + p.B(q.nodes)
    mean = float(np.linalg.norm(q.weights @ gq))
    if mean > MEAN_ZERO_TOL:
        raise ProblemError(f"gradient at the minimizer has mean norm {mean:.3e}")
    return sig2, kappa_hat, eta_hat


def step_size(t: int, eta: float, theta: float) -> float:
    return 1.0 / (eta * float(t) ** theta)


def ssmgd_step(w, z: float, gamma: float, p: QuadraticProblem) -> np.ndarray:
    if not 0.0 <= gamma <= 1.0 / p.eta + 1e-15:
        raise ValueError("gamma must lie in [0, 1/eta]")
    w = np.asarray(w, float)
    return w - gamma * (p.A(z)[0] @ w + p.B(z)[0])


def trajectory(p: QuadraticProblem, chain, theta: float, w1=None) -> np.ndarray:
    """All iterates w_1 .. w_{n+1} for a chain of length n."""
    if not 0.5 < theta <= 1.0:
        raise ValueError("theta must lie in (1/2, 1]")
    z = np.asarray(chain, float)
    if np.any(z < 0) or np.any(z > 1):
        raise ValueError("chain values must lie in [0, 1]")
    A = p.A(z) if len(z) else np.zeros((0, p.dim, p.dim))
    B = p.B(z) if len(z) else np.zeros((0, p.dim))
    W = np.empty((len(z) + 1, p.dim))
    W[0] = np.zeros(p.dim) if w1 is None else np.asarray(w1, float)
    for i in range(len(z)):
        gamma = step_size(i + 1, p.eta, theta)
        W[i + 1] = W[i] - gamma * (A[i] @ W[i] + B[i])
    return W


def run_ssmgd(
    p: QuadraticProblem,
    chain,
    theta: float,
    checkpoints: Sequence[int],
    w1=None,
    w_star=None,
    q: Quadrature | None = None,
) -> RunResult:
    """Record ||w_t - w*|| at the checkpoints (all three distance columns coincide)."""
    start = time.perf_counter()
    z = np.asarray(chain, float)
    ck = _validate_checkpoints(checkpoints, len(z))
    w_star = minimizer(p, q) if w_star is None else np.asarray(w_star, float)
    n = int(ck[-1]) - 1 if len(ck) else 0
    W = trajectory(p, z[:n], theta, w1)
    out = []
    for t in ck:
        d = float(np.linalg.norm(W[t - 1] - w_star))
        out.append(Checkpoint(int(t), d, d, d, p.dim))
    return RunResult(out, wall_time=time.perf_counter() - start, final=W[-1].copy())


def naive_iterate(p: QuadraticProblem, chain, theta: float, t: int, w1=None) -> np.ndarray:
    """w_t recomputed from scratch as the unrolled affine product (test oracle).

    w_t = P(1, t) w_1 - sum_s gamma_s P(s+1, t) B(z_s),  P(a, t) = prod_{a <= r < t} (I - gamma_r A(z_r)).
    """
    z = np.asarray(chain, float)[: t - 1]
    w = np.zeros(p.dim) if w1 is None else np.asarray(w1, float).copy()
    I = np.eye(p.dim)
    n = len(z)
    A = p.A(z) if n else np.zeros((0, p.dim, p.dim))
    B = p.B(z) if n else np.zeros((0, p.dim))
    gam = [step_size(r + 1, p.eta, theta) for r in range(n)]
    total = np.zeros(p.dim)
    for s in range(n):
        P = I.copy()
        for r in range(s + 1, n):
            P = (I - gam[r] * A[r]) @ P
        total += gam[s] * (P @ B[s])
    P = I.copy()
    for r in range(n):
        P = (I - gam[r] * A[r]) @ P
    return P @ w - total


def error_recursion(p: QuadraticProblem, chain, theta: float, w_star, w1=None) -> np.ndarray:
    """e_{t+1} = (I - gamma_t A(z_t)) e_t - gamma_t grad V_{z_t}(w*), starting from e_1 = w_1 - w*."""
    z = np.asarray(chain, float)
    A = p.A(z)
    g = np.einsum("nab,b->na", A, w_star) + p.B(z)
    E = np.empty((len(z) + 1, p.dim))
    E[0] = (np.zeros(p.dim) if w1 is None else np.asarray(w1, float)) - w_star
    for i in range(len(z)):
        gamma = step_size(i + 1, p.eta, theta)
        E[i + 1] = E[i] - gamma * (A[i] @ E[i]) - gamma * g[i]
    return E


def deterministic_decay(p: QuadraticProblem, theta: float, t: int, w1=None, w_star=None) -> float:
    """||prod_{s<t} (I - gamma_s A) (w_1 - w*)|| for a constant problem, by spectral product."""
    A, _ = expectations(p)
    w_star = minimizer(p) if w_star is None else w_star
    e = (np.zeros(p.dim) if w1 is None else np.asarray(w1, float)) - w_star
    lam, V = np.linalg.eigh(A)
    c = V.T @ e
    s = np.arange(1, t)
    gam = 1.0 / (p.eta * s.astype(float) ** theta)
    fac = np.array([np.prod(1.0 - gam * l) for l in lam])
    return float(np.linalg.norm(fac * c))


def problem_from_dict(d: dict) -> QuadraticProblem:
    d = dict(d)
    b = d.get("b_coeffs")
    return QuadraticProblem.default(int(d.get("dim", 5)), float(d.get("kappa", 0.5)), float(d.get("eta", 2.0)), b)
