"""Mercer kernels on a compact interval and finite kernel expansions.

An :class:`RkhsFunction` stores ``f = scale * sum_i c_i K(x_i, .)``.  The
global ``scale`` makes the ``(1 - gamma*lambda)`` shrink of the online update
O(1); atoms are appended, never rewritten.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalPSDError
from .quadrature import Quadrature

_FAMILIES = ("gaussian", "polynomial", "linear")
_FAMILY_CODE = {"gaussian": 0, "polynomial": 1, "linear": 2}
_DOMAIN_SLACK = 1e-12
_PSD_CLAMP = 1e-10
_BLOCK = 2048


@dataclass(frozen=True)
class Kernel:
    family: str = "gaussian"
    bandwidth: float = 1.0
    degree: int = 2
    offset: float = 1.0
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "gaussian" and not self.bandwidth > 0:
            raise ValueError("gaussian bandwidth must be positive")
        if self.family == "polynomial":
            if int(self.degree) != self.degree or self.degree < 1:
                raise ValueError("polynomial degree must be a positive integer")
            if self.offset < 0:
                raise ValueError("polynomial offset must be nonnegative")
        lo, hi = self.domain
        if not lo < hi:
            raise ValueError("kernel domain must be a nondegenerate interval")
        object.__setattr__(self, "domain", (float(lo), float(hi)))

    @classmethod
    def gaussian(cls, bandwidth: float, domain=(0.0, 1.0)) -> "Kernel":
        return cls("gaussian", bandwidth=float(bandwidth), domain=domain)

    @classmethod
    def polynomial(cls, degree: int, offset: float = 1.0, domain=(0.0, 1.0)) -> "Kernel":
        return cls("polynomial", degree=int(degree), offset=float(offset), domain=domain)

    @classmethod
    def linear(cls, domain=(0.0, 1.0)) -> "Kernel":
        return cls("linear", domain=domain)

    @classmethod
    def from_dict(cls, d: dict) -> "Kernel":
        d = dict(d)
        family = d.pop("family")
        domain = tuple(d.pop("domain", (0.0, 1.0)))
        if family == "gaussian":
            return cls.gaussian(d.pop("bandwidth"), domain=domain)
        if family == "polynomial":
            return cls.polynomial(d.pop("degree"), d.pop("offset", 1.0), domain=domain)
        if family == "linear":
            return cls.linear(domain=domain)
        raise ValueError(f"unknown kernel family {family!r}")

    def to_dict(self) -> dict:
        out: dict = {"family": self.family}
        if self.family == "gaussian":
            out["bandwidth"] = self.bandwidth
        elif self.family == "polynomial":
            out["degree"] = int(self.degree)
            out["offset"] = self.offset
        if self.domain != (0.0, 1.0):
            out["domain"] = list(self.domain)
        return out

    # numeric parameters handed to the compiled loops
    @property
    def code(self) -> tuple[int, float, float]:
        if self.family == "gaussian":
            return 0, float(self.bandwidth), 0.0
        if self.family == "polynomial":
            return 1, float(self.degree), float(self.offset)
        return 2, 0.0, 0.0

    def check_domain(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lo, hi = self.domain
        if np.any(x < lo - _DOMAIN_SLACK) or np.any(x > hi + _DOMAIN_SLACK) or np.any(np.isnan(x)):
            raise DomainError(f"point outside kernel domain [{lo}, {hi}]")
        return x

    def _raw(self, x, y):
        if self.family == "gaussian":
            d = x - y
            return np.exp(-(d * d) / (2.0 * self.bandwidth**2))
        if self.family == "polynomial":
            return (x * y + self.offset) ** int(self.degree)
        return x * y

    def __call__(self, x, y):
        """K(x, y) with numpy broadcasting; scalars in, float out."""
        x = self.check_domain(x)
        y = self.check_domain(y)
        out = self._raw(x, y)
        return float(out) if np.ndim(out) == 0 else out

    def gram(self, a, b=None) -> np.ndarray:
        a = self.check_domain(np.atleast_1d(a))
        b = a if b is None else self.check_domain(np.atleast_1d(b))
        return self._raw(a[:, None], b[None, :])

    def diag(self, x) -> np.ndarray:
        x = self.check_domain(x)
        return self._raw(x, x)

    def sup_bound(self) -> float:
        """C_K = sup_x sqrt(K(x, x)) over the domain.

        Gaussian: the diagonal is identically one.  Linear and polynomial: the
        diagonal is increasing in |x|, so the sup sits at an endpoint.
        """
        if self.family == "gaussian":
            return 1.0
        edge = max(abs(self.domain[0]), abs(self.domain[1]))
        return math.sqrt(float(self._raw(edge, edge)))

    def lipschitz(self) -> float:
        """Bound on |d/dx K(x, y)| over the domain (used by :func:`compact`)."""
        if self.family == "gaussian":
            return 1.0 / (self.bandwidth * math.sqrt(math.e))
        edge = max(abs(self.domain[0]), abs(self.domain[1]))
        if self.family == "linear":
            return edge
        d = int(self.degree)
        return d * edge * (edge * edge + self.offset) ** (d - 1)


def eval_kernel(k: Kernel, x: float, xp: float) -> float:
    return k(x, xp)


def kernel_sup_bound(k: Kernel) -> float:
    return k.sup_bound()


class RkhsFunction:
    """Finite kernel expansion ``scale * sum_i coeffs[i] * K(support[i], .)``.

    Single-writer: :meth:`scaled_update` mutates in place.  Use :meth:`copy`
    before sharing a snapshot.
    """

    def __init__(self, kernel: Kernel, support=(), coeffs=(), scale: float = 1.0):
        support = kernel.check_domain(np.atleast_1d(np.asarray(support, dtype=float)))
        coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
        if support.shape != coeffs.shape:
            raise ValueError("support and coeffs must have equal length")
        if not scale > 0:
            raise ValueError("scale must be positive")
        self.kernel = kernel
        cap = max(8, len(support))
        self._x = np.empty(cap)
        self._c = np.empty(cap)
        self._n = len(support)
        self._x[: self._n] = support
        self._c[: self._n] = coeffs
        self.scale = float(scale)

    @classmethod
    def zero(cls, kernel: Kernel) -> "RkhsFunction":
        return cls(kernel)

    @property
    def support(self) -> np.ndarray:
        return self._x[: self._n]

    @property
    def coeffs(self) -> np.ndarray:
        return self._c[: self._n]

    def __len__(self) -> int:
        return self._n

    def __repr__(self) -> str:
        return f"RkhsFunction(atoms={self._n}, scale={self.scale:.6g}, kernel={self.kernel.family})"

    def copy(self) -> "RkhsFunction":
        return RkhsFunction(self.kernel, self.support.copy(), self.coeffs.copy(), self.scale)

    def scaled_coeffs(self) -> np.ndarray:
        return self.scale * self.coeffs

    def evaluate(self, x):
        x = self.kernel.check_domain(x)
        flat = np.atleast_1d(x).ravel()
        out = np.zeros(flat.shape)
        for lo in range(0, self._n, _BLOCK):
            sl = slice(lo, min(lo + _BLOCK, self._n))
            for lo2 in range(0, len(flat), _BLOCK):
                sp = slice(lo2, min(lo2 + _BLOCK, len(flat)))
                out[sp] += self.coeffs[sl] @ self.kernel._raw(self.support[sl, None], flat[None, sp])
        out *= self.scale
        return float(out[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))

    __call__ = evaluate

    def fold_scale(self) -> "RkhsFunction":
        """Multiply the scale into the coefficients; the function is unchanged."""
        self._c[: self._n] *= self.scale
        self.scale = 1.0
        return self

    def scaled_update(self, s: float, x: float, w: float) -> "RkhsFunction":
        """In place: ``f <- s*f + w*K_x``."""
        if not s > 0:
            raise ValueError("scaled_update requires s > 0")
        x = float(self.kernel.check_domain(x))
        self.scale *= s
        if self.scale < 1e-150:
            self.fold_scale()
        if self._n == len(self._x):
            self._x = np.concatenate([self._x, np.empty(len(self._x))])
            self._c = np.concatenate([self._c, np.empty(len(self._c))])
        self._x[self._n] = x
        self._c[self._n] = w / self.scale
        self._n += 1
        return self

    def k_norm(self) -> float:
        return k_norm(self)

    def with_atoms(self, support, coeffs) -> "RkhsFunction":
        """New function ``self + sum coeffs[i] K(support[i], .)`` (coeffs unscaled)."""
        out = self.copy().fold_scale()
        return RkhsFunction(
            self.kernel,
            np.concatenate([out.support, np.asarray(support, float)]),
            np.concatenate([out.coeffs, np.asarray(coeffs, float)]),
        )


def evaluate(f: RkhsFunction, x):
    return f.evaluate(x)


def scaled_update(f: RkhsFunction, s: float, x: float, w: float) -> RkhsFunction:
    return f.scaled_update(s, x, w)


def _quad_form(kernel: Kernel, xa, ca, xb, cb) -> float:
    total = 0.0
    for lo in range(0, len(xa), _BLOCK):
        sa = slice(lo, min(lo + _BLOCK, len(xa)))
        for lo2 in range(0, len(xb), _BLOCK):
            sb = slice(lo2, min(lo2 + _BLOCK, len(xb)))
            total += float(ca[sa] @ kernel._raw(xa[sa, None], xb[None, sb]) @ cb[sb])
    return total


def inner(f: RkhsFunction, g: RkhsFunction) -> float:
    """<f, g>_K through the cross Gram matrix."""
    if f.kernel != g.kernel:
        raise ValueError("functions live in different kernels")
    return _quad_form(f.kernel, f.support, f.scaled_coeffs(), g.support, g.scaled_coeffs())


def _clamped_sqrt(q: float) -> float:
    if q < 0:
        if q < -_PSD_CLAMP:
            raise NumericalPSDError(f"Gram quadratic form {q:.3e} is negative")
        return 0.0
    return math.sqrt(q)


def k_norm(f: RkhsFunction) -> float:
    c = f.scaled_coeffs()
    return _clamped_sqrt(_quad_form(f.kernel, f.support, c, f.support, c))


def k_distance(f: RkhsFunction, g: RkhsFunction) -> float:
    """||f - g||_K via the joint Gram matrix of both supports."""
    if f.kernel != g.kernel:
        raise ValueError("functions live in different kernels")
    x = np.concatenate([f.support, g.support])
    c = np.concatenate([f.scaled_coeffs(), -g.scaled_coeffs()])
    return _clamped_sqrt(_quad_form(f.kernel, x, c, x, c))


def rho_norm(f, q: Quadrature) -> float:
    """L2 norm under the uniform measure; ``f`` is any vectorized callable."""
    vals = np.asarray(f(q.nodes), dtype=float)
    return math.sqrt(max(float(np.dot(q.weights, vals * vals)), 0.0))


def compact(f: RkhsFunction, tol: float = 0.0) -> RkhsFunction:
    """Merge atoms whose points lie within ``tol`` of a cluster's first point.

    Each merged atom moves by at most ``tol``, so the pointwise change is at most
    ``(moved coefficient mass) * kernel.lipschitz() * tol``.  ``tol=0`` merges
    exact duplicates only.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    if len(f) == 0:
        return f.copy()
    order = np.argsort(f.support, kind="stable")
    xs = f.support[order]
    cs = f.coeffs[order]
    anchors = [xs[0]]
    sums = [cs[0]]
    for x, c in zip(xs[1:], cs[1:]):
        if x - anchors[-1] <= tol:
            sums[-1] += c
        else:
            anchors.append(x)
            sums.append(c)
    return RkhsFunction(f.kernel, anchors, sums, f.scale)
