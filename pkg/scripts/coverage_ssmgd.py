"""High-probability coverage of the quadratic SGD bound for several chains and deltas."""
from markov_rkhs.harness.config import ssmgd_from_dict
from markov_rkhs.harness.experiment import run_ssmgd_experiment

for copula in ({"family": "independence"}, {"family": "fgm", "rho": 0.3}, {"family": "fgm", "rho": 0.9}):
    for delta in (0.1, 0.25):
        scfg = ssmgd_from_dict({"copula": copula, "checkpoints": [100, 1000], "n_seeds": 200, "delta": delta})
        rep = run_ssmgd_experiment(scfg, write=False)
        cells = ", ".join(f"t={r['t']}: {r['violations']}/{r['n_seeds']} (bound {r['bound']:.3g})" for r in rep.coverage.rows)
        print(f"{copula} delta={delta}: {cells} -> {'ok' if rep.coverage.passed else 'FAIL'}")
