"""Compiled inner loops for the online learner.

The iterate is tracked through its values at Chebyshev points (second kind);
f(x) comes from barycentric interpolation.  Since every atom K(x, .) is
interpolated to machine precision at the chosen resolution, so is f.
"""
from __future__ import annotations

import math

import numba
import numpy as np


def chebyshev_nodes(m: int, lo: float = 0.0, hi: float = 1.0):
    j = np.arange(m)
    nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(np.pi * j / (m - 1))
    w = (-1.0) ** j
    w[0] *= 0.5
    w[-1] *= 0.5
    order = np.argsort(nodes)
    return np.ascontiguousarray(nodes[order]), np.ascontiguousarray(w[order])


def interp_matrix(nodes, weights, x) -> np.ndarray:
    """Rows map node values to barycentric interpolants at the points x."""
    x = np.asarray(x, float)
    d = x[:, None] - nodes[None, :]
    hit = d == 0.0
    d[hit] = 1.0
    q = weights[None, :] / d
    E = q / q.sum(axis=1, keepdims=True)
    rows = np.where(hit.any(axis=1))[0]
    for r in rows:
        E[r] = hit[r].astype(float)
    return E


@numba.njit(cache=True)
def kern(code, p1, p2, x, y):
    if code == 0:
        d = x - y
        return math.exp(-(d * d) / (2.0 * p1 * p1))
    if code == 1:
        return (x * y + p2) ** int(p1)
    return x * y


@numba.njit(cache=True)
def bary(nodes, wts, vals, x):
    num = 0.0
    den = 0.0
    for j in range(nodes.shape[0]):
        d = x - nodes[j]
        if d == 0.0:
            return vals[j]
        q = wts[j] / d
        num += q * vals[j]
        den += q
    return num / den


@numba.njit(cache=True)
def learner_loop(
    xs, ys, lam, ck2, theta, code, p1, p2, nodes, wts, cache, norm2, inner,
    g_cache, ckpts, out_norm2, out_inner, out_cache, atom_c, offset, debug, bound2,
):
    """Run len(xs) updates in place.  Returns (scale, failing_t or 0)."""
    n = xs.shape[0]
    m = nodes.shape[0]
    scale = 1.0
    k = 0
    nck = ckpts.shape[0]
    for i in range(n):
        t = i + 1
        while k < nck and ckpts[k] == t:
            out_norm2[k] = norm2
            out_inner[k] = inner
            out_cache[k, :] = cache
            k += 1
        x = xs[i]
        fx = bary(nodes, wts, cache, x)
        gx = bary(nodes, wts, g_cache, x)
        gamma = 1.0 / ((lam + ck2) * t**theta)
        s = 1.0 - gamma * lam
        w = -gamma * (fx - ys[i])
        norm2 = s * s * norm2 + 2.0 * s * w * fx + w * w * kern(code, p1, p2, x, x)
        inner = s * inner + w * gx
        for j in range(m):
            cache[j] = s * cache[j] + w * kern(code, p1, p2, x, nodes[j])
        scale *= s
        if scale < 1e-150:
            for a in range(offset + i):
                atom_c[a] *= scale
            scale = 1.0
        atom_c[offset + i] = w / scale
        if debug and norm2 > bound2 * (1.0 + 1e-9) + 1e-12:
            return scale, t + 1
    while k < nck:
        out_norm2[k] = norm2
        out_inner[k] = inner
        out_cache[k, :] = cache
        k += 1
    return scale, 0
