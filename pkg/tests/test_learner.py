import numpy as np
import pytest

from markov_rkhs.chains import ChainConfig, label_stream, sample_chain
from markov_rkhs.copulas import Copula
from markov_rkhs.kernels import Kernel, RkhsFunction, inner, k_distance, k_norm
from markov_rkhs.learner import (
    LearnerConfig,
    LearnerState,
    chebyshev_resolution,
    gradient,
    loss,
    naive_iterates,
    run,
    step_size,
    update,
)
from markov_rkhs.oracle import discretize_operator, named_target, ridge_solution

G = Kernel.gaussian(0.5)


@pytest.fixture(scope="module")
def problem():
    T = discretize_operator(G)
    spec = named_target(T, "sin", 0.5)
    return T, spec, ridge_solution(T, 0.1, spec.frho_nodes)


def stream(seed, n, copula=Copula.fgm(0.5), target=None, sd=0.1):
    us = sample_chain(ChainConfig(copula, n, seed))
    f = target if target is not None else (lambda x: np.sin(2 * np.pi * x) / 3)
    return label_stream(us, f, sd, 2.0, seed)


def test_step_size_examples():
    cfg = LearnerConfig(0.3, 0.75, G)
    assert step_size(1, cfg) == pytest.approx(1 / 1.3)
    assert step_size(4, LearnerConfig(1.0, 1.0, G)) == pytest.approx(1 / 8)
    assert step_size(16, LearnerConfig(0.1, 0.75, G)) == pytest.approx(1 / 8.8, rel=1e-14)
    assert 1 / 8.8 == pytest.approx(0.113636, abs=1e-6)
    for t in (1, 2, 10, 10**6):
        for k in (G, Kernel.polynomial(2, 1.0)):
            c = LearnerConfig(0.05, 0.6, k)
            assert 0 < 1 - step_size(t, c) * c.lam < 1


def test_config_validation():
    with pytest.raises(ValueError):
        LearnerConfig(0.1, 0.5, G)
    with pytest.raises(ValueError):
        LearnerConfig(0.0, 0.75, G)
    with pytest.raises(ValueError):
        LearnerConfig(0.1, 0.75, G, f1=RkhsFunction.zero(Kernel.linear()))
    LearnerConfig(0.1, 1.0, G)


def test_gradient_examples():
    g = gradient((0.3, 1.5), RkhsFunction.zero(G), 0.2)
    xs = np.linspace(0, 1, 9)
    np.testing.assert_allclose(g(xs), -1.5 * G(0.3, xs), atol=1e-15)
    f = RkhsFunction(G, [0.2, 0.9], [1.0, -0.5])
    g = gradient((0.4, f(0.4)), f, 0.0)
    assert k_norm(g) == pytest.approx(0.0, abs=1e-12)


def test_gradient_finite_difference(rng):
    h = 1e-5
    worst = 0.0
    for _ in range(100):
        k = [G, Kernel.gaussian(0.2), Kernel.polynomial(2, 1.0)][rng.integers(3)]
        n = int(rng.integers(1, 11))
        f = RkhsFunction(k, rng.random(n), rng.normal(size=n), scale=float(rng.uniform(0.5, 2)))
        d = RkhsFunction(k, rng.random(5), rng.normal(size=5))
        z = (float(rng.random()), float(rng.normal()))
        lam = float(rng.uniform(0.01, 2))
        fp = f.with_atoms(d.support, h * d.coeffs)
        fm = f.with_atoms(d.support, -h * d.coeffs)
        fd = (loss(z, fp, lam) - loss(z, fm, lam)) / (2 * h)
        an = inner(gradient(z, f, lam), d)
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-12))
    assert worst <= 1e-6


def test_loss_examples():
    z = RkhsFunction.zero(G)
    assert loss((0.3, 2.0), z, 0.1) == 2.0
    assert loss((0.3, 1.0), z, 5.0) == 0.5
    x, y = 0.7, 1.3
    f = RkhsFunction(G, [x], [y / G(x, x)])
    assert loss((x, y), f, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_update_examples():
    cfg = LearnerConfig(0.1, 0.75, G)
    st = update(LearnerState(1, RkhsFunction.zero(G)), (0.4, 1.2), cfg)
    assert st.t == 2
    xs = np.linspace(0, 1, 7)
    np.testing.assert_allclose(st.f(xs), step_size(1, cfg) * 1.2 * G(0.4, xs), atol=1e-15)
    f = RkhsFunction(G, [0.2], [0.8])
    cfg0 = LearnerConfig(1e-300, 0.75, G)
    before = f(xs)
    st = update(LearnerState(5, f), (0.6, f(0.6)), cfg0)
    np.testing.assert_allclose(st.f(xs), before, atol=1e-15)


def test_update_matches_naive():
    xs, ys = stream(3, 100)
    cfg = LearnerConfig(0.1, 0.75, G)
    st = LearnerState(1, cfg.initial())
    for z in zip(xs, ys):
        st = update(st, z, cfg)
    sup, c = naive_iterates(xs, ys, cfg)
    probes = np.linspace(0, 1, 50)
    np.testing.assert_allclose(st.f(probes), G.gram(sup, probes).T @ c, atol=1e-10, rtol=0)


@pytest.mark.parametrize("engine", ["exact", "fast"])
@pytest.mark.parametrize("k", [G, Kernel.gaussian(0.1), Kernel.polynomial(3, 1.0)])
def test_lazy_vs_naive_500(engine, k):
    xs, ys = stream(11, 500)
    cfg = LearnerConfig(0.2, 0.75, k, M=2.0)
    res = run((xs, ys), cfg, [501], engine=engine)
    sup, c = naive_iterates(xs, ys, cfg)
    probes = np.linspace(0, 1, 50)
    np.testing.assert_allclose(res.final(probes), k.gram(sup, probes).T @ c, atol=1e-10, rtol=0)
    naive = RkhsFunction(k, sup, c)
    assert k_norm(res.final) == pytest.approx(k_norm(naive), abs=1e-10)
    assert res.checkpoints[0].k_dist_to_target == pytest.approx(k_norm(naive), abs=1e-10)


def test_engines_agree(problem):
    T, spec, tgt = problem
    xs, ys = stream(5, 3000, target=spec.frho)
    cfg = LearnerConfig(0.1, 0.75, G, M=2.0)
    ck = [1, 7, 100, 999, 3001]
    a = run((xs, ys), cfg, ck, tgt, spec.frho_nodes, engine="exact")
    b = run((xs, ys), cfg, ck, tgt, spec.frho_nodes, engine="fast")
    for ca, cb in zip(a.checkpoints, b.checkpoints):
        assert ca.t == cb.t and ca.atoms == cb.atoms
        assert ca.k_dist_to_target == pytest.approx(cb.k_dist_to_target, abs=1e-9)
        assert ca.rho_dist_to_target == pytest.approx(cb.rho_dist_to_target, abs=1e-10)
        assert ca.rho_dist_to_frho == pytest.approx(cb.rho_dist_to_frho, abs=1e-10)


def test_run_checkpoint_one(problem):
    T, spec, tgt = problem
    res = run(([], []), LearnerConfig(0.1, 0.75, G), [1], tgt, spec.frho_nodes)
    cp = res.checkpoints[0]
    assert cp.t == 1 and cp.atoms == 0
    assert cp.k_dist_to_target == pytest.approx(k_norm(tgt), rel=1e-12)
    assert cp.rho_dist_to_frho == pytest.approx(np.sqrt(T.q.weights @ spec.frho_nodes**2), rel=1e-12)
    with pytest.raises(ValueError):
        run(([], []), LearnerConfig(0.1, 0.75, G), [2], tgt)
    with pytest.raises(ValueError):
        run(([0.5], [1.0]), LearnerConfig(0.1, 0.75, G), [3], tgt)


def test_f1_nonzero(problem):
    T, spec, tgt = problem
    f1 = RkhsFunction(G, [0.3, 0.6], [0.2, -0.1])
    cfg = LearnerConfig(0.1, 0.75, G, f1=f1)
    xs, ys = stream(2, 400)
    a = run((xs, ys), cfg, [1, 401], tgt, engine="exact")
    b = run((xs, ys), cfg, [1, 401], tgt, engine="fast")
    assert a.checkpoints[0].k_dist_to_target == pytest.approx(k_distance(f1, tgt), rel=1e-12)
    assert a.checkpoints[1].atoms == 402
    assert a.checkpoints[1].k_dist_to_target == pytest.approx(b.checkpoints[1].k_dist_to_target, abs=1e-10)


def test_fixed_sample_converges_to_one_atom_ridge():
    x0, y0, lam = 0.35, 0.8, 0.1
    cfg = LearnerConfig(lam, 0.75, G)
    ridge = RkhsFunction(G, [x0], [y0 / (G(x0, x0) + lam)])
    n = 10000
    for engine in ("fast", "exact"):
        res = run((np.full(n, x0), np.full(n, y0)), cfg, [n + 1], ridge, engine=engine)
        assert res.checkpoints[0].k_dist_to_target <= 1e-6


def test_norm_bound_debug():
    xs, ys = stream(9, 5000, copula=Copula.fgm(0.9), sd=0.5)
    for k in (G, Kernel.polynomial(2, 1.0)):
        cfg = LearnerConfig(0.05, 0.6, k, M=2.0, debug=True)
        res = run((xs, ys), cfg, [5001], engine="fast")
        assert k_norm(res.final) <= cfg.norm_bound()
    cfg = LearnerConfig(0.5, 0.75, G, M=2.0, debug=True)
    st = LearnerState(1, cfg.initial())
    for z in zip(xs[:300], ys[:300]):
        st = update(st, z, cfg)


def test_determinism(problem):
    T, spec, tgt = problem
    xs, ys = stream(21, 20000)
    cfg = LearnerConfig(0.1, 0.75, G, M=2.0)
    a = run((xs, ys), cfg, [10, 100, 20000], tgt, spec.frho_nodes)
    b = run((xs, ys), cfg, [10, 100, 20000], tgt, spec.frho_nodes)
    assert a.checkpoints == b.checkpoints
    assert np.array_equal(a.final.coeffs, b.final.coeffs)


def test_iid_mean_error_nonincreasing(problem):
    T, spec, tgt = problem
    cfg = LearnerConfig(0.1, 0.75, G, M=2.0)
    ck = [100, 1000, 10000]
    d = [run(stream(s, 10000, Copula.independence(), spec.frho), cfg, ck, tgt).column("k_dist_to_target") for s in range(50)]
    m = np.mean(d, axis=0)
    inversions = [(a, b) for a, b in zip(m, m[1:]) if b > a]
    assert len(inversions) <= 1 and all(b <= 1.05 * a for a, b in inversions)


def test_chebyshev_resolution():
    assert chebyshev_resolution(G) <= 32
    assert chebyshev_resolution(Kernel.polynomial(3, 1.0)) == 16
    assert chebyshev_resolution(Kernel.gaussian(0.05)) <= 128
    assert chebyshev_resolution(Kernel.gaussian(0.001)) is None


def test_narrow_kernel_falls_back_to_exact():
    k = Kernel.gaussian(0.001)
    xs, ys = stream(1, 50)
    with pytest.warns(UserWarning):
        res = run((xs, ys), LearnerConfig(0.1, 0.75, k), [51], engine="fast")
    sup, c = naive_iterates(xs, ys, LearnerConfig(0.1, 0.75, k))
    np.testing.assert_allclose(res.final(sup), k.gram(sup, sup).T @ c, atol=1e-10)
