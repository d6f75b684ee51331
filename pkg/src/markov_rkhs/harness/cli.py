"""Command line entry point.

Exit codes: 0 success, 1 assertion failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import tomli

from ..bounds import BOUNDS_COLUMNS, BoundInputs, bounds_row
from ..chains import ChainConfig, chain_stats, sample_chain
from ..copulas import MixingProfile, mixing_table
from ..errors import PreconditionError, StatisticsError
from .config import ConfigError, ExperimentConfig, config_from_dict, copula_from_dict, load_config, ssmgd_from_dict

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _inline(s: str) -> dict:
    """Parse a TOML inline table such as ``{ family = "fgm", rho = 0.9 }``."""
    try:
        return tomli.loads(f"v = {s}")["v"]
    except tomli.TOMLDecodeError as e:
        raise ConfigError(f"bad inline table {s!r}: {e}") from None


def _raw_config(args) -> tuple[dict, str]:
    if args.config:
        text = Path(args.config).read_text()
        try:
            return tomli.loads(text), text
        except tomli.TOMLDecodeError as e:
            raise ConfigError(str(e)) from None
    return {}, ""


def _experiment_config(args, **override) -> ExperimentConfig:
    raw, text = _raw_config(args)
    raw.update({k: v for k, v in override.items() if v is not None})
    if getattr(args, "n_seeds", None):
        raw.pop("seeds", None)
        raw["n_seeds"] = args.n_seeds
    if getattr(args, "copula", None):
        raw["copula"] = _inline(args.copula)
    return config_from_dict(raw, text, args.seed_base, args.out)


def _emit(rows, columns, out: Path | None, name: str) -> None:
    from .experiment import write_csv

    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / name, columns, rows)
        print(f"wrote {out / name}")
    else:
        print(",".join(columns))
        for r in rows:
            print(",".join(str(r[c]) for c in columns))


def cmd_chain(args) -> int:
    raw, _ = _raw_config(args)
    spec = _inline(args.copula) if args.copula else raw.get("copula", {"family": "fgm", "rho": 0.5})
    seed = args.seed if args.seed is not None else (args.seed_base or 0)
    us = sample_chain(ChainConfig(copula_from_dict(spec), args.length, seed))
    stats = chain_stats(us)
    stats["copula"] = spec
    print(json.dumps(stats, indent=2, sort_keys=True))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        np.savetxt(out / f"chain_seed{seed}.csv", us, fmt="%.17g", header="u", comments="")
    return EXIT_OK


def cmd_mixing(args) -> int:
    raw, _ = _raw_config(args)
    spec = _inline(args.copula) if args.copula else raw.get("copula", {"family": "fgm", "rho": 0.5})
    tab = mixing_table(copula_from_dict(spec), args.tmax, args.n)
    prof = tab.phi_profile
    rows = [{"t": t, "phi": p, "beta": b, "envelope_D": prof.D, "envelope_r": prof.r} for t, p, b in tab.rows()]
    _emit(rows, ("t", "phi", "beta", "envelope_D", "envelope_r"), Path(args.out) if args.out else None, "mixing.csv")
    bad = any(b > p + 1e-12 for _, p, b in tab.rows())
    return EXIT_FAIL if bad else EXIT_OK


def cmd_oracle(args) -> int:
    from .experiment import ORACLE_RESIDUAL_TOL, build_oracle

    cfg = _experiment_config(args)
    o = build_oracle(cfg)
    report = {
        "kernel": cfg.kernel_spec, "target": {"g": cfg.target_g, "nu": cfg.nu}, "lambda": cfg.lam,
        "top_eigenvalue": float(o.T.eigvals[0]), "ck2": o.ck2, "ridge_residual": o.residual,
        "approx_error": o.approx_error, "approx_bound": o.approx_bound, "approx_ok": o.approx_ok,
        "target_k_norm": o.init_dist,
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK if (o.residual <= ORACLE_RESIDUAL_TOL and o.approx_ok) else EXIT_FAIL


def cmd_train(args) -> int:
    from .experiment import SEED_COLUMNS, build_oracle, run_seed

    cfg = _experiment_config(args)
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    r = run_seed(cfg, build_oracle(cfg), seed)
    rows = [{c: getattr(cp, c) for c in SEED_COLUMNS} for cp in r.checkpoints]
    _emit(rows, SEED_COLUMNS, Path(args.out) if args.out else None, f"train_seed{seed}.csv")
    return EXIT_OK


def cmd_experiment(args) -> int:
    from .experiment import run_experiment

    rep = run_experiment(_experiment_config(args), jobs=args.jobs)
    print(f"output: {rep.out_dir}")
    for s in rep.slopes:
        print(f"{s['metric']}: slope {s['slope']:.4f} (r2 {s['r2']:.3f})")
    for f in rep.failures:
        print(f"FAIL: {f}", file=sys.stderr)
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_coverage(args) -> int:
    from .experiment import coverage_report

    cfg = _experiment_config(args)
    cov = coverage_report(cfg, args.delta, jobs=args.jobs)
    for r in cov.rows:
        print(f"t={r['t']}: violations {r['violations']}/{r['n_seeds']} = {r['fraction']:.3f} (delta {r['delta']}) {'ok' if r['pass'] else 'FAIL'}")
    return EXIT_OK if cov.passed else EXIT_FAIL


def cmd_compare(args) -> int:
    from .experiment import compare_iid_vs_markov

    rep = compare_iid_vs_markov(_experiment_config(args), jobs=args.jobs)
    print(f"slope iid {rep.slope_iid:.4f}, markov {rep.slope_markov:.4f}, diff {rep.slope_diff:.4f}")
    for r in rep.rows:
        print(f"t={r['t']}: ratio {r['ratio']:.4f}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x]


def cmd_bounds(args) -> int:
    rows = []
    for th in _floats(args.theta):
        for lam in _floats(args.lam):
            for t in _floats(args.t):
                prof = MixingProfile.exponential(args.D, args.r) if args.D > 0 else MixingProfile.independent()
                inp = BoundInputs(lam, args.ck2, args.M, th, args.delta, int(t), args.init_dist, prof)
                rows.append(bounds_row(inp))
    _emit(rows, BOUNDS_COLUMNS, Path(args.out) if args.out else None, "bounds.csv")
    return EXIT_OK


def cmd_ssmgd(args) -> int:
    from .experiment import run_ssmgd_experiment

    raw, _ = _raw_config(args)
    ss = dict(raw.get("ssmgd", {}))
    for key in ("dim", "theta", "checkpoints"):
        v = getattr(args, key, None)
        if v is not None:
            ss[key] = v
    if args.copula:
        ss["copula"] = _inline(args.copula)
    if args.n_seeds:
        ss.pop("seeds", None)
        ss["n_seeds"] = args.n_seeds
    scfg = ssmgd_from_dict(ss, args.seed_base, args.out or raw.get("output_dir", "out"))
    rep = run_ssmgd_experiment(scfg, jobs=args.jobs, delta=args.delta)
    print(f"output: {rep.out_dir}  sigma^2 = {rep.sigma_sq:.6g}")
    for r in rep.coverage.rows:
        print(f"t={r['t']}: violations {r['violations']}/{r['n_seeds']} = {r['fraction']:.3f} {'ok' if r['pass'] else 'FAIL'}")
    return EXIT_OK if rep.coverage.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment config")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for seeds")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed-base", type=int, default=None, dest="seed_base", help="first seed when seeds are generated")

    p = argparse.ArgumentParser(prog="markov-rkhs", description=__doc__, parents=[common])
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("chain", parents=[common], help="sample a chain and print statistics")
    s.add_argument("--copula", help='inline table, e.g. \'{ family = "fgm", rho = 0.9 }\'')
    s.add_argument("--length", type=int, default=100000)
    s.add_argument("--seed", type=int)
    s.set_defaults(fn=cmd_chain)

    s = sub.add_parser("mixing", parents=[common], help="phi/beta table with fitted envelope")
    s.add_argument("--copula")
    s.add_argument("--tmax", type=int, default=6)
    s.add_argument("--n", type=int, default=512)
    s.set_defaults(fn=cmd_mixing)

    for name, fn, hlp in (
        ("oracle", cmd_oracle, "build the operator and report residuals"),
        ("train", cmd_train, "single-seed run"),
        ("experiment", cmd_experiment, "multi-seed experiment"),
        ("coverage", cmd_coverage, "high-probability bound coverage"),
        ("compare", cmd_compare, "independent vs Markov samples"),
    ):
        s = sub.add_parser(name, parents=[common], help=hlp)
        s.add_argument("--copula")
        s.add_argument("--n-seeds", type=int, dest="n_seeds")
        s.add_argument("--seed", type=int)
        s.add_argument("--delta", type=float)
        s.set_defaults(fn=fn)

    s = sub.add_parser("bounds", parents=[common], help="bound table over a parameter grid")
    s.add_argument("--theta", default="0.75")
    s.add_argument("--lambda", dest="lam", default="0.1")
    s.add_argument("--ck2", type=float, default=1.0)
    s.add_argument("--M", type=float, default=1.0)
    s.add_argument("--delta", type=float, default=0.1)
    s.add_argument("--D", type=float, default=0.0)
    s.add_argument("--r", type=float, default=0.0)
    s.add_argument("--t", default="100,1000,10000,100000")
    s.add_argument("--init-dist", type=float, default=1.0, dest="init_dist")
    s.set_defaults(fn=cmd_bounds)

    s = sub.add_parser("ssmgd", parents=[common], help="finite-dimensional SGD coverage run")
    s.add_argument("--copula")
    s.add_argument("--dim", type=int)
    s.add_argument("--theta", type=float)
    s.add_argument("--checkpoints", type=lambda v: [int(x) for x in v.split(",")])
    s.add_argument("--n-seeds", type=int, dest="n_seeds")
    s.add_argument("--delta", type=float)
    s.set_defaults(fn=cmd_ssmgd)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError, StatisticsError, PreconditionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except AssertionError as e:
        print(f"assertion failed: {e}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
