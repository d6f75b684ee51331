import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from markov_rkhs.copulas import (
    Copula,
    GridCopula,
    MixingProfile,
    band_copula,
    beta_coefficient,
    conditional_cdf,
    copula_cdf,
    copula_density,
    copula_powers,
    darsow_product,
    fit_mixing_profile,
    iterate_copula,
    mixing_table,
    phi_coefficient,
    render,
)
from markov_rkhs.errors import DomainError, FitError, InvalidCopulaError

unit = st.floats(0.0, 1.0, allow_nan=False)
rhos = st.floats(-1.0, 1.0, allow_nan=False)
FAMILIES = [
    Copula.independence(),
    Copula.fgm(0.9),
    Copula.fgm(-0.6),
    Copula.mixture(0.5, Copula.fgm(0.8)),
    Copula.from_grid(band_copula(64, 4)),
    Copula.mixture(0.3, band_copula(64, 4)),
]


def test_density_examples():
    assert copula_density(Copula.independence(), 0.3, 0.8) == 1.0
    assert copula_density(Copula.fgm(0.9), 0.0, 0.0) == pytest.approx(1.9)
    assert copula_density(Copula.mixture(0.5, Copula.fgm(0.8)), 0.0, 0.0) == pytest.approx(1.4)
    with pytest.raises(DomainError):
        copula_density(Copula.fgm(0.5), 1.2, 0.5)


@given(rhos, unit, unit)
def test_fgm_density_lower_bound(rho, u, v):
    assert copula_density(Copula.fgm(rho), u, v) >= 1 - abs(rho) - 1e-15


@given(rhos, unit, unit)
def test_fgm_conditional_cdf(rho, u, v):
    c = Copula.fgm(rho)
    assert conditional_cdf(c, u, v) == pytest.approx(v + rho * (1 - 2 * u) * (v - v * v), abs=1e-14)
    assert conditional_cdf(Copula.independence(), u, v) == pytest.approx(v, abs=1e-15)


@pytest.mark.parametrize("c", FAMILIES)
def test_conditional_cdf_endpoints_and_monotone(c):
    for u in np.linspace(0, 1, 13):
        assert conditional_cdf(c, u, 0.0) == pytest.approx(0.0, abs=1e-10)
        assert conditional_cdf(c, u, 1.0) == pytest.approx(1.0, abs=1e-10)
        vals = conditional_cdf(c, np.full(101, u), np.linspace(0, 1, 101))
        assert np.all(np.diff(vals) >= -1e-12)


@pytest.mark.parametrize("c", FAMILIES)
def test_conditional_cdf_integrates_density(c):
    for u, v in [(0.13, 0.71), (0.5, 0.25), (0.97, 0.4)]:
        val, _ = quad(lambda s: copula_density(c, u, s), 0, v, limit=200, points=np.linspace(0, 1, 65)[1:-1].tolist())
        assert conditional_cdf(c, u, v) == pytest.approx(val, abs=1e-8)


@pytest.mark.parametrize("c", FAMILIES)
def test_comonotone_identity(c):
    # (M * C)(u, v) = int_0^u C_{,1}(t, v) dt must equal C(u, v)
    for u, v in [(0.3, 0.6), (0.8, 0.2), (0.5, 0.5)]:
        val, _ = quad(lambda t: conditional_cdf(c, t, v), 0, u, limit=200)
        assert val == pytest.approx(copula_cdf(c, u, v), abs=1e-8)


def test_render_invariants():
    for c in FAMILIES:
        g = render(c, 256)
        g.validate(1e-8)
        assert g.density.sum() / g.n**2 == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(InvalidCopulaError):
        GridCopula(np.full((8, 8), 2.0)).validate()


def test_darsow_identity_and_fgm_algebra():
    pi_c = darsow_product(Copula.independence(), Copula.fgm(0.7), 256)
    assert np.abs(pi_c.density - 1).max() <= 1e-8
    n = 512
    for r1, r2 in [(0.9, 0.5), (-0.4, 0.8), (1.0, 1.0)]:
        g = darsow_product(Copula.fgm(r1), Copula.fgm(r2), n)
        ref = render(Copula.fgm(r1 * r2 / 3), n).density
        assert np.abs(g.density - ref).max() <= 1e-4
    a, b, c = Copula.fgm(0.9), Copula.fgm(-0.5), Copula.fgm(0.7)
    left = darsow_product(darsow_product(a, b, n), c, n)
    right = darsow_product(a, darsow_product(b, c, n), n)
    assert np.abs(left.density - right.density).max() <= 1e-4
    with pytest.raises(ValueError):
        darsow_product(a, b, 8)


def test_darsow_outputs_are_copulas():
    for c in FAMILIES:
        for g in copula_powers(c, 4, 256):
            assert np.abs(g.row_masses() - 1).max() <= 1e-6
            assert np.abs(g.col_masses() - 1).max() <= 1e-6
            assert g.density.mean() == pytest.approx(1.0, abs=1e-6)


def test_iterate_copula():
    assert np.all(iterate_copula(Copula.independence(), 1, 64).density == 1.0)
    g = iterate_copula(Copula.fgm(0.9), 3, 512)
    assert np.abs(g.density - render(Copula.fgm(0.081), 512).density).max() <= 1e-4
    sups = [np.abs(p.density - 1).max() for p in copula_powers(Copula.mixture(0.3, band_copula(128, 8)), 8, 128)]
    assert all(b < a for a, b in zip(sups, sups[1:]))


def test_phi_beta_fgm():
    n = 2048
    for t, g in enumerate(copula_powers(Copula.fgm(0.9), 3, n), start=1):
        assert phi_coefficient(g) == pytest.approx(0.75 * 0.3**t, abs=1e-4)
        assert beta_coefficient(g) == pytest.approx(3 * 0.3**t / 8, abs=1e-4)
    assert phi_coefficient(render(Copula.independence(), 64)) == 0.0
    assert beta_coefficient(render(Copula.independence(), 64)) == 0.0
    assert beta_coefficient(render(Copula.fgm(0.6), n)) == pytest.approx(0.6 / 8, abs=1e-4)


@pytest.mark.parametrize("c", FAMILIES)
def test_half_l1_equals_threshold_sets(c):
    for g in copula_powers(c, 3, 256):
        assert phi_coefficient(g) == pytest.approx(phi_coefficient(g, "threshold"), abs=1e-12)
        assert beta_coefficient(g) == pytest.approx(beta_coefficient(g, "threshold"), abs=1e-12)
        assert 0 <= beta_coefficient(g) <= phi_coefficient(g) <= 1


def test_phi_rejects_non_copula():
    bad = GridCopula(np.full((16, 16), 1.1))
    with pytest.raises(InvalidCopulaError):
        phi_coefficient(bad)


def test_semigroup_monotone():
    for rho in (0.9, -0.7, 0.3):
        phis = [phi_coefficient(g) for g in copula_powers(Copula.fgm(rho), 12, 256)]
        for s in range(1, 7):
            for t in range(1, 7):
                assert phis[s + t - 1] <= phis[s - 1] + 1e-15


def test_mixture_lower_bound_and_envelope():
    for eps in (0.05, 0.25, 0.6):
        c = Copula.mixture(eps, band_copula(128, 4))
        assert render(c, 128).density.min() >= eps - 1e-15
        assert c.lower_bound() >= eps
        tab = mixing_table(c, 6, 128)
        assert 0 < tab.phi_profile.r < 1
        assert np.all(tab.phi_profile.envelope(tab.t) >= tab.phi * (1 - 1e-12))


def test_fit_mixing_profile_examples():
    vals = [(t, 0.75 * 0.3**t) for t in range(1, 7)]
    p = fit_mixing_profile(vals)
    assert p.D == pytest.approx(0.75, abs=1e-9) and p.r == pytest.approx(0.3, abs=1e-9)
    tab = mixing_table(Copula.fgm(0.9), 6, 512)
    assert tab.phi_profile.r == pytest.approx(0.3, abs=1e-3)
    with pytest.raises(FitError):
        fit_mixing_profile([(t, 0.0) for t in range(1, 5)])
    poly = fit_mixing_profile([(t, 2.0 * t**-1.5) for t in range(1, 9)], "polynomial")
    assert poly.k == pytest.approx(1.5, abs=1e-9) and poly.b == pytest.approx(2.0, abs=1e-9)


@given(st.lists(st.floats(1e-6, 1.0), min_size=2, max_size=10))
def test_fit_envelope_dominates(vals):
    pts = list(zip(range(1, len(vals) + 1), sorted(vals, reverse=True)))
    try:
        p = fit_mixing_profile(pts)
    except FitError:
        return
    for t, v in pts:
        assert p.envelope(t) >= v * (1 - 1e-12)


def test_independence_profile():
    tab = mixing_table(Copula.independence(), 6, 64)
    assert tab.phi_profile.D == 0.0
    assert MixingProfile.independent().envelope(3) == 0.0
