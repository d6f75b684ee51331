"""Acceptance criteria 1-11, one PASS/FAIL line each (also listed in the terminal summary)."""
import math
import time

import mpmath
import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from markov_rkhs.bounds import BoundInputs, c_theta, init_bound, mixing_factor, samp_bound, total_bound
from markov_rkhs.chains import ChainConfig, label_stream, sample_chain
from markov_rkhs.copulas import (
    Copula,
    MixingProfile,
    beta_coefficient,
    darsow_product,
    fit_mixing_profile,
    iterate_copula,
    render,
)
from markov_rkhs.errors import PreconditionError
from markov_rkhs.fixtures import polynomial_mixing_copula
from markov_rkhs.harness.config import reference_config, ssmgd_from_dict
from markov_rkhs.harness.experiment import compare_iid_vs_markov, run_experiment, run_ssmgd_experiment
from markov_rkhs.kernels import Kernel, RkhsFunction, inner
from markov_rkhs.copulas import phi_coefficient
from markov_rkhs.learner import LearnerConfig, gradient, loss, naive_iterates, run
from markov_rkhs.oracle import approx_error_check, discretize_operator, named_target, ridge_residual, ridge_solution
from markov_rkhs.quadrature import gauss_legendre
from markov_rkhs.ssmgd import QuadraticProblem, naive_iterate, run_ssmgd

LAMS = (1e-3, 1e-2, 1e-1, 1.0)


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_criterion_01_fgm_mixing_closed_form():
    start = time.perf_counter()
    dphi = dbeta = 0.0
    for t in range(1, 6):
        ct = iterate_copula(Copula.fgm(0.9), t, 2048)
        rho_t = 3 * 0.3**t
        dphi = max(dphi, abs(phi_coefficient(ct) - 0.75 * 0.3**t))
        dbeta = max(dbeta, abs(beta_coefficient(ct) - rho_t / 8))
    secs = time.perf_counter() - start
    verdict(1, dphi <= 1e-4 and dbeta <= 1e-4 and secs < 60,
            f"max |phi - 0.75*0.3^t| = {dphi:.2e}, max |beta - rho_t/8| = {dbeta:.2e} (tol 1e-4), {secs:.1f}s (< 60s)")


def test_criterion_02_darsow_algebra():
    n = 512
    pi_dev = max(
        float(np.max(np.abs(darsow_product(Copula.independence(), c, n).density - 1.0)))
        for c in (Copula.fgm(0.9), Copula.mixture(0.3, Copula.fgm(-0.7)), Copula.fgm(-1.0))
    )
    u = (np.arange(n) + 0.5) / n
    mid = 1 - 2 * u
    prod_dev = 0.0
    for r1, r2 in ((0.9, 0.8), (-0.5, 0.7), (1.0, 1.0)):
        got = darsow_product(Copula.fgm(r1), Copula.fgm(r2), n).density
        prod_dev = max(prod_dev, float(np.max(np.abs(got - (1 + (r1 * r2 / 3) * np.outer(mid, mid))))))
    a, b, c = Copula.fgm(0.9), Copula.fgm(-0.6), Copula.fgm(0.4)
    left = darsow_product(darsow_product(a, b, n), c, n).density
    right = darsow_product(a, darsow_product(b, c, n), n).density
    assoc = float(np.max(np.abs(left - right)))
    verdict(2, pi_dev <= 1e-8 and prod_dev <= 1e-4 and assoc <= 1e-4,
            f"Pi*C dev {pi_dev:.1e} (<= 1e-8), fgm product dev {prod_dev:.1e} (<= 1e-4), associativity dev {assoc:.1e} (<= 1e-4)")


def test_criterion_03_oracle_exactness():
    q = gauss_legendre(256)
    worst = 0.0
    for k in (Kernel.gaussian(0.5), Kernel.gaussian(0.1), Kernel.polynomial(2, 1.0), Kernel.polynomial(3, 1.0)):
        T = discretize_operator(k, q)
        spec = named_target(T, "sin", 0.5)
        for lam in LAMS:
            worst = max(worst, ridge_residual(T, lam, ridge_solution(T, lam, spec.frho_nodes), spec.frho_nodes))
    verdict(3, worst <= 1e-8, f"max sup-norm residual of (T + lam I) f_lam - T f_rho = {worst:.2e} (tol 1e-8), 16 cells")


def test_criterion_04_approximation_error_sweep():
    T = discretize_operator(Kernel.gaussian(0.5), gauss_legendre(256))
    cells, ok, worst = 0, True, 0.0
    for g in ("sin", "poly", "bump"):
        for nu in (0.5, 1.0):
            spec = named_target(T, g, nu)
            for lam in LAMS:
                err = math.sqrt(float(T.q.weights @ (ridge_solution(T, lam, spec.frho_nodes)(T.q.nodes) - spec.frho_nodes) ** 2))
                bound = lam**nu * math.sqrt(float(T.q.weights @ spec.g_nodes**2))
                try:
                    approx_error_check(T, lam, spec)
                except Exception:
                    ok = False
                ok = ok and err <= bound * (1 + 1e-6)
                worst = max(worst, err / bound)
                cells += 1
    verdict(4, ok and cells == 24, f"{cells} cells (3 g x 2 nu x 4 lambda), max err/bound = {worst:.4f} (<= 1 + 1e-6)")


def test_criterion_05_gradient_finite_difference():
    rng = np.random.default_rng(2024)
    h, worst = 1e-5, 0.0
    kernels = (Kernel.gaussian(0.5), Kernel.gaussian(0.15), Kernel.polynomial(2, 1.0), Kernel.linear())
    for _ in range(100):
        k = kernels[rng.integers(len(kernels))]
        n = int(rng.integers(1, 11))
        f = RkhsFunction(k, rng.random(n), rng.normal(size=n), scale=float(rng.uniform(0.3, 3)))
        d = RkhsFunction(k, rng.random(4), rng.normal(size=4))
        z = (float(rng.random()), float(rng.uniform(-2, 2)))
        lam = float(10 ** rng.uniform(-3, 0.5))
        fd = (loss(z, f.with_atoms(d.support, h * d.coeffs), lam) - loss(z, f.with_atoms(d.support, -h * d.coeffs), lam)) / (2 * h)
        an = inner(gradient(z, f, lam), d)
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-12))
    verdict(5, worst <= 1e-6, f"100 random (f, z, lambda), max relative error {worst:.2e} (tol 1e-6)")


def test_criterion_06_representation_oracle():
    worst_l = 0.0
    probes = np.linspace(0, 1, 101)
    for seed, k in enumerate((Kernel.gaussian(0.5), Kernel.gaussian(0.05), Kernel.polynomial(3, 1.0))):
        us = sample_chain(ChainConfig(Copula.fgm(0.5), 500, seed))
        xs, ys = label_stream(us, lambda x: np.sin(2 * np.pi * x), 0.1, 2.0, seed)
        cfg = LearnerConfig(0.1, 0.75, k, M=2.0)
        sup, c = naive_iterates(xs, ys, cfg)
        dense = k.gram(sup, probes).T @ c
        for engine in ("exact", "fast"):
            f = run((xs, ys), cfg, [501], engine=engine).final
            worst_l = max(worst_l, float(np.max(np.abs(f(probes) - dense))))
    worst_s = 0.0
    p = QuadraticProblem.default()
    for seed in range(3):
        z = sample_chain(ChainConfig(Copula.fgm(0.3), 500, seed))
        w = run_ssmgd(p, z, 0.75, [501]).final
        worst_s = max(worst_s, float(np.max(np.abs(w - naive_iterate(p, z, 0.75, 501)))))
    verdict(6, worst_l <= 1e-10 and worst_s <= 1e-10,
            f"500-step lazy vs naive: learner {worst_l:.1e}, ssmgd {worst_s:.1e} (tol 1e-10)")


def _decreasing_across_decades(rep) -> bool:
    ts = np.array([r["t"] for r in rep.aggregate])
    m = rep.mean_curve()
    dec = [float(m[ts == t][0]) for t in (100, 1000, 10000, 100000)]
    return all(b < a for a, b in zip(dec, dec[1:])) and bool(np.all(np.diff(m) < 0))


def test_criterion_07_rate_reference_config():
    start = time.perf_counter()
    rep = run_experiment(reference_config(), write=False)
    secs = time.perf_counter() - start
    slope = rep.slope("k_dist_mean")
    dec = _decreasing_across_decades(rep)
    verdict(7, slope <= -0.25 and dec and rep.ok and secs < 600,
            f"reference config, 50 seeds: K-distance slope {slope:.3f} (<= -0.25), strictly decreasing {dec}, {secs:.0f}s (< 600s)")


def test_criterion_08_iid_rate_match():
    rep = compare_iid_vs_markov(reference_config(), write=False)
    verdict(8, rep.asserted and rep.slope_diff <= 0.1,
            f"slopes iid {rep.slope_iid:.3f} vs fgm(0.5) {rep.slope_markov:.3f}, |diff| {rep.slope_diff:.3f} (<= 0.1)")


def test_criterion_09_ssmgd_coverage():
    start = time.perf_counter()
    scfg = ssmgd_from_dict({"dim": 5, "theta": 0.75, "copula": {"family": "fgm", "rho": 0.3},
                            "checkpoints": [100, 1000], "n_seeds": 200, "delta": 0.1})
    rep = run_ssmgd_experiment(scfg, write=False)
    secs = time.perf_counter() - start
    prof = rep.mixing.phi_profile
    fr = {r["t"]: r["fraction"] for r in rep.coverage.rows}
    ok = prof.kind == "exponential" and prof.D > 0 and all(v <= 0.1 for v in fr.values()) and set(fr) == {100, 1000} and secs < 300
    verdict(9, ok, f"fitted (D, r) = ({prof.D:.3f}, {prof.r:.3f}); violation fraction t=100: {fr[100]:.3f}, "
                   f"t=1000: {fr[1000]:.3f} (<= 0.1), {secs:.1f}s (< 300s)")


def test_criterion_10_bound_identities():
    rng = np.random.default_rng(10)
    d0 = all(
        mixing_factor(BoundInputs(0.1, 1, 1, th, 0.1, 100, profile=prof)) == 1.0
        for th in (0.6, 0.75, 1.0)
        for prof in (None, MixingProfile.independent(), MixingProfile.exponential(0.0, 0.5))
    )
    rejects = True
    for lam, ck2 in ((1, 1), (2, 1), (0.5, 0.4)):
        try:
            samp_bound(BoundInputs(lam, ck2, 1, 1.0, 0.1, 100))
            rejects = False
        except PreconditionError:
            pass
    mpmath.mp.dps = 30
    th = mpmath.mpf("0.75")
    ref = 8 + (2 / (2 * th - 1)) * (th / (mpmath.e * (2 - mpmath.power(2, th)))) ** (th / (1 - th))
    cdev = abs(c_theta(0.75) - float(ref))
    mono = True
    for _ in range(500):
        lam, ck2, M = 10 ** rng.uniform(-2, 0.3), rng.uniform(0.5, 3), rng.uniform(0.1, 4)
        th, dl, t = rng.uniform(0.51, 0.99), rng.uniform(0.01, 0.8), int(rng.integers(1, 10**6))
        D, r, init = rng.uniform(0.01, 2), rng.uniform(0.01, 0.9), rng.uniform(0, 5)
        f = rng.uniform(1.05, 3)

        def B(**kw):
            a = dict(lam=lam, ck2=ck2, M=M, theta=th, delta=dl, t=t, init_dist=init, D=D, r=r)
            a.update(kw)
            prof = MixingProfile.exponential(a.pop("D"), a.pop("r"))
            return BoundInputs(**a, profile=prof)

        base = B()
        vals = (samp_bound(base), total_bound(base))
        le = lambda other: all(x <= y for x, y in zip((samp_bound(other), total_bound(other)), vals))
        ge = lambda other: all(x >= y for x, y in zip((samp_bound(other), total_bound(other)), vals))
        mono &= le(B(t=int(t * f) + 1)) and init_bound(B(t=int(t * f) + 1)) <= init_bound(base)
        mono &= le(B(delta=min(0.99, dl * f)))
        mono &= ge(B(D=D * f)) and ge(B(r=min(0.95, r * f))) and ge(B(M=M * f)) and ge(B(init_dist=init * f + 0.1))
    verdict(10, d0 and rejects and cdev <= 1e-3 and mono,
            f"D=0 factor exactly 1 {d0}; theta=1 rejects alpha >= 1/2 {rejects}; |C_theta(0.75) - ref| = {cdev:.1e} "
            f"(C = {c_theta(0.75):.4f}, tol 1e-3); monotonicity on 500 random points {mono}")


def test_criterion_11_polynomial_regime():
    fx = polynomial_mixing_copula(2.0)
    fit = fit_mixing_profile(list(zip(fx.t, fx.phi)), "polynomial")
    rep = run_experiment(reference_config(copula={"family": "poly_fixture", "k": 2.0}), write=False)
    slope = rep.slope("k_dist_mean")
    verdict(11, abs(fit.k - 2.0) <= 0.3 and slope <= -0.25,
            f"fixture eps = {fx.eps:.4f}, fitted k = {fit.k:.3f} (2 +- 0.3); theta=0.75 K-distance slope {slope:.3f} (<= -0.25)")
