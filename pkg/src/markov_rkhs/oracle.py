"""Nystrom discretization of the integral operator and the ridge target.

With quadrature nodes x_j and weights w_j, the operator
``(T f)(x) = int K(x, s) f(s) ds`` acts on node values as ``A = K W``.  It is
similar to the symmetric ``S = W^{1/2} K W^{1/2}``, whose eigendecomposition
gives spectral functions of T (fractional powers, ridge filters).
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ApproxBoundError, NumericalPSDError
from .kernels import Kernel, RkhsFunction, k_distance, rho_norm  # noqa: F401  (k_distance re-exported)
from .quadrature import Quadrature, gauss_legendre

EIG_CLAMP = 1e-14
PSD_TOL = 1e-8


def _bump(x):
    return np.exp(-((x - 0.5) ** 2) / (2 * 0.1**2))


G_REGISTRY: dict[str, Callable] = {
    "sin": lambda x: np.sin(2 * np.pi * np.asarray(x, float)),
    "poly": lambda x: 1.0 - 6.0 * np.asarray(x, float) + 6.0 * np.asarray(x, float) ** 2,
    "bump": _bump,
}


@dataclass(frozen=True, eq=False)
class DiscretizedOperator:
    kernel: Kernel
    q: Quadrature
    matrix: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray

    @property
    def n(self) -> int:
        return self.q.n

    @property
    def sqrt_w(self) -> np.ndarray:
        return np.sqrt(self.q.weights)

    def apply(self, f_nodes) -> np.ndarray:
        return self.matrix @ np.asarray(f_nodes, float)

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigvals)))

    def spectral(self, f_nodes, fn) -> np.ndarray:
        """Apply ``fn(eigvals)`` as a spectral multiplier to node values."""
        sw = self.sqrt_w
        coef = self.eigvecs.T @ (sw * np.asarray(f_nodes, float))
        return (self.eigvecs @ (fn(self.eigvals) * coef)) / sw

    def eigenfunction(self, i: int) -> np.ndarray:
        """Node values of the i-th eigenfunction (descending order), unit rho-norm."""
        return self.eigvecs[:, i] / self.sqrt_w


def _cache_key(k: Kernel, q: Quadrature) -> str:
    blob = json.dumps({"kernel": k.to_dict(), "n": q.n, "nodes0": float(q.nodes[0])}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def discretize_operator(k: Kernel, q: Quadrature | None = None, cache_dir=None) -> DiscretizedOperator:
    """Build ``A[i, j] = K(x_i, x_j) w_j`` and the eigendecomposition of its symmetrization.

    With ``cache_dir`` the eigenpairs are stored as raw float64 (eigenvalues
    then row-major eigenvectors) in ``<cache_dir>/<hash>.f64``.
    """
    q = gauss_legendre() if q is None else q
    G = k.gram(q.nodes)
    matrix = G * q.weights[None, :]
    sw = np.sqrt(q.weights)
    n = q.n
    path = Path(cache_dir) / f"{_cache_key(k, q)}.f64" if cache_dir is not None else None
    if path is not None and path.exists():
        flat = np.fromfile(path, dtype=np.float64)
        vals, vecs = flat[:n], flat[n:].reshape(n, n)
    else:
        S = sw[:, None] * G * sw[None, :]
        S = 0.5 * (S + S.T)
        vals, vecs = np.linalg.eigh(S)
        vals, vecs = vals[::-1].copy(), vecs[:, ::-1].copy()
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            np.concatenate([vals, vecs.ravel()]).tofile(path)
    if vals.min() < -PSD_TOL:
        raise NumericalPSDError(f"discretized operator has eigenvalue {vals.min():.3e}")
    return DiscretizedOperator(k, q, matrix, vals, vecs)


def ridge_solution(T: DiscretizedOperator, lam: float, frho_nodes) -> RkhsFunction:
    """f_{lam} = (T + lam)^{-1} T f_rho as a kernel expansion on the nodes.

    From ``lam * f_lam = T (f_rho - f_lam)`` the expansion coefficients are
    ``w_j (f_rho(x_j) - f_lam(x_j)) / lam``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    f = np.asarray(frho_nodes, float)
    sw = T.sqrt_w
    S = sw[:, None] * T.kernel.gram(T.q.nodes) * sw[None, :]
    rhs = S @ (sw * f)
    b = np.linalg.solve(S + lam * np.eye(T.n), rhs)
    a = b / sw
    if not np.all(np.isfinite(a)):
        raise ArithmeticError("ridge system is singular")
    coeffs = T.q.weights * (f - a) / lam
    return RkhsFunction(T.kernel, T.q.nodes, coeffs)


def ridge_residual(T: DiscretizedOperator, lam: float, f_lam: RkhsFunction, frho_nodes) -> float:
    """sup over nodes of |(T + lam) f_lam - T f_rho|."""
    vals = f_lam(T.q.nodes)
    return float(np.max(np.abs(T.apply(vals) + lam * vals - T.apply(frho_nodes)), initial=0.0))


@dataclass(frozen=True, eq=False)
class TargetSpec:
    """f_rho = T^nu g on the nodes, plus its Nystrom extension to all of [0, 1]."""

    g_nodes: np.ndarray
    nu: float
    frho_nodes: np.ndarray
    frho: RkhsFunction
    g_name: str = ""

    def __call__(self, x):
        return self.frho(x)


def _power(nu):
    def fn(s):
        out = np.zeros_like(s)
        keep = s > EIG_CLAMP
        out[keep] = s[keep] ** nu
        return out

    return fn


def fractional_power(T: DiscretizedOperator, g_nodes, nu: float) -> np.ndarray:
    return T.spectral(g_nodes, _power(nu))


def source_target(T: DiscretizedOperator, g_nodes, nu: float, g_name: str = "") -> TargetSpec:
    """Node values of T^nu g, eigenvalues below 1e-14 treated as zero.

    The off-node extension is ``sum_j K(x, x_j) w_j h_j`` with
    ``h = T^{nu-1} g`` on the kept spectrum; it reproduces the node values.
    """
    if not 0.0 < nu <= 1.0:
        raise ValueError("source exponent nu must lie in (0, 1]")
    g = np.asarray(g_nodes, float)
    frho_nodes = T.apply(g) if nu == 1.0 else fractional_power(T, g, nu)
    h = g if nu == 1.0 else fractional_power(T, g, nu - 1.0)
    frho = RkhsFunction(T.kernel, T.q.nodes, T.q.weights * h)
    return TargetSpec(g, nu, frho_nodes, frho, g_name)


def named_target(T: DiscretizedOperator, g: str, nu: float) -> TargetSpec:
    try:
        fn = G_REGISTRY[g]
    except KeyError:
        raise ValueError(f"unknown target function {g!r}; choose from {sorted(G_REGISTRY)}") from None
    return source_target(T, fn(T.q.nodes), nu, g_name=g)


def approx_error_check(T: DiscretizedOperator, lam: float, spec: TargetSpec, q: Quadrature | None = None):
    """Return (||f_lam - f_rho||_rho, lam^nu ||g||_rho); raise if the first exceeds the second."""
    q = T.q if q is None else q
    f_lam = ridge_solution(T, lam, spec.frho_nodes)
    diff = f_lam(q.nodes) - spec.frho_nodes
    err = math.sqrt(float(q.weights @ (diff * diff)))
    bound = lam**spec.nu * math.sqrt(float(q.weights @ (spec.g_nodes**2)))
    if err > bound * (1.0 + 1e-6):
        raise ApproxBoundError(f"approximation error {err:.6e} exceeds lam^nu ||g|| = {bound:.6e}")
    return err, bound
