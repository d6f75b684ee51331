"""A grid copula whose phi_t follows b t^-2 over a finite window.

A stationary Markov chain cannot mix at a true polynomial rate in phi: the
coefficients are submultiplicative, so once phi_s < 1/2 the decay is
geometric.  The fixture therefore emulates t^-2 on t = 1..tmax: a slowly
diffusing band walk (local moves of +-width cells) mixed with independence
at weight eps, with eps chosen so that phi_tmax / phi_1 = tmax^-2.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .copulas import Copula, GridCopula, band_copula, copula_powers, fit_mixing_profile, phi_coefficient, MixingProfile

POLY_K = 2.0
N_CELLS = 256
WIDTH = 16
TMAX = 16


def _phis(eps: float, n: int, width: int, tmax: int) -> np.ndarray:
    c = Copula.mixture(eps, Copula.from_grid(band_copula(n, width)))
    return np.array([phi_coefficient(g) for g in copula_powers(c, tmax, n)])


@dataclass(frozen=True)
class PolyFixture:
    copula: Copula
    eps: float
    t: np.ndarray
    phi: np.ndarray
    profile: MixingProfile


@lru_cache(maxsize=4)
def polynomial_mixing_copula(k: float = POLY_K, n: int = N_CELLS, width: int = WIDTH, tmax: int = TMAX) -> PolyFixture:
    target = float(tmax) ** (-k)

    def gap(eps):
        p = _phis(eps, n, width, tmax)
        return np.log(p[-1] / p[0]) - np.log(target)

    eps = brentq(gap, 1e-3, 0.95, xtol=1e-6)
    phi = _phis(eps, n, width, tmax)
    t = np.arange(1, tmax + 1)
    profile = fit_mixing_profile(list(zip(t, phi)), "polynomial")
    c = Copula.mixture(eps, Copula.from_grid(band_copula(n, width)))
    return PolyFixture(c, float(eps), t, phi, profile)
