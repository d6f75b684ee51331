"""Multi-seed orchestration, aggregation and file output.

Layout of ``<output_dir>/<config_hash>/``::

    seed_<s>.csv     per-seed checkpoints
    aggregate.csv    mean / median / 10th / 90th percentile per checkpoint
    bounds.csv       bound curves at every checkpoint
    slopes.csv       log-log slope of each mean error curve
    manifest.json    canonical config, oracle diagnostics, mixing profile, timings
    report.svg       optional log-log chart

Seeds are dispatched to a process pool of ``jobs`` workers and merged in seed
order, so output bytes do not depend on scheduling.
"""
from __future__ import annotations

import io
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .. import __version__
from ..bounds import BoundInputs, bounds_row, hilbert_samp_bound, init_bound, init_decay, samp_bound, slope_fit, tau, BOUNDS_COLUMNS
from ..chains import ChainConfig, label_stream, sample_chain
from ..copulas import MixingTable, mixing_table
from ..errors import ApproxBoundError, StatisticsError
from ..kernels import RkhsFunction, k_norm
from ..learner import LearnerConfig, RunResult, run
from ..oracle import approx_error_check, discretize_operator, named_target, ridge_residual, ridge_solution
from ..quadrature import gauss_legendre
from ..ssmgd import QuadraticProblem, minimizer, run_ssmgd, validate_assumptions
from .config import ExperimentConfig, SsmgdConfig

SCHEMA = "run-v1"
SEED_COLUMNS = ("t", "k_dist_to_target", "rho_dist_to_target", "rho_dist_to_frho", "atoms")
METRICS = (("k_dist", "k_dist_to_target"), ("rho_dist", "rho_dist_to_target"), ("frho_dist", "rho_dist_to_frho"))
STATS = ("mean", "median", "p10", "p90")
AGGREGATE_COLUMNS = ("t", "n_seeds") + tuple(f"{m}_{s}" for m, _ in METRICS for s in STATS) + ("approx_error", "approx_bound")
SLOPE_COLUMNS = ("metric", "slope", "intercept", "r2", "theory_exponent")
COVERAGE_COLUMNS = ("t", "delta", "bound", "violations", "n_seeds", "fraction", "pass")
COMPARE_COLUMNS = ("t", "iid_mean", "markov_mean", "ratio")
GENERATOR = "numpy Philox4x64-10, key=[seed, stream]; stream 0 chain, stream 1 label noise"
ORACLE_RESIDUAL_TOL = 1e-8


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, columns: Sequence[str], rows: Sequence[dict], comment: str | None = None) -> None:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(r[c]) for c in columns) + "\n")
    path.write_text(buf.getvalue())


def read_csv(path: Path) -> list[dict]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    cols = lines[0].split(",")
    return [dict(zip(cols, ln.split(","))) for ln in lines[1:]]


@dataclass
class Oracle:
    T: object
    spec: object
    target: RkhsFunction
    residual: float
    approx_error: float
    approx_bound: float
    init_dist: float
    ck2: float
    approx_ok: bool


def build_oracle(cfg: ExperimentConfig) -> Oracle:
    k = cfg.kernel
    T = discretize_operator(k, gauss_legendre(cfg.quadrature))
    spec = named_target(T, cfg.target_g, cfg.nu)
    target = ridge_solution(T, cfg.lam, spec.frho_nodes)
    res = ridge_residual(T, cfg.lam, target, spec.frho_nodes)
    try:
        err, bnd = approx_error_check(T, cfg.lam, spec)
        ok = True
    except ApproxBoundError:
        vals = target(T.q.nodes) - spec.frho_nodes
        err = math.sqrt(float(T.q.weights @ vals**2))
        bnd = cfg.lam**cfg.nu * math.sqrt(float(T.q.weights @ spec.g_nodes**2))
        ok = False
    return Oracle(T, spec, target, res, err, bnd, k_norm(target), k.sup_bound() ** 2, ok)


def learner_config(cfg: ExperimentConfig, debug: bool = False) -> LearnerConfig:
    return LearnerConfig(cfg.lam, cfg.theta, cfg.kernel, M=cfg.M, debug=debug)


def run_seed(cfg: ExperimentConfig, oracle: Oracle, seed: int) -> RunResult:
    us = sample_chain(ChainConfig(cfg.copula, cfg.chain_length, seed, cfg.burn_in))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        xs, ys = label_stream(us, oracle.spec.frho, cfg.noise_sd, cfg.M, seed)
    res = run((xs, ys), learner_config(cfg), cfg.checkpoints, oracle.target, oracle.spec.frho_nodes, oracle.T.q, cfg.engine)
    res.config_hash = cfg.hash
    res.seed = int(seed)
    res.final = None
    return res


_WORKER: dict = {}


def _init_worker(fn, payload):
    _WORKER["fn"] = fn
    _WORKER["payload"] = payload


def _call_worker(seed):
    return _WORKER["fn"](*_WORKER["payload"], seed)


def map_seeds(fn: Callable, payload: tuple, seeds: Sequence[int], jobs: int = 1) -> list:
    """``[fn(*payload, s) for s in seeds]``, optionally on a process pool; order preserved."""
    if jobs <= 1 or len(seeds) <= 1:
        return [fn(*payload, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(fn, payload)) as ex:
        return list(ex.map(_call_worker, seeds, chunksize=max(1, len(seeds) // (4 * jobs))))


def aggregate(results: Sequence[RunResult], approx_error: float = float("nan"), approx_bound: float = float("nan")) -> list[dict]:
    """Per-checkpoint statistics; invariant to the order of ``results``."""
    if not results:
        return []
    ts = results[0].ts
    rows = []
    for j, t in enumerate(ts):
        row = {"t": int(t), "n_seeds": len(results), "approx_error": approx_error, "approx_bound": approx_bound}
        for short, col in METRICS:
            v = np.sort(np.array([getattr(r.checkpoints[j], col) for r in results]))
            row[f"{short}_mean"] = float(np.mean(v))
            row[f"{short}_median"] = float(np.median(v))
            row[f"{short}_p10"] = float(np.percentile(v, 10))
            row[f"{short}_p90"] = float(np.percentile(v, 90))
        rows.append(row)
    return rows


def slopes(agg: Sequence[dict], theta: float) -> list[dict]:
    out = []
    for short, _ in METRICS:
        pts = [(r["t"], r[f"{short}_mean"]) for r in agg if r[f"{short}_mean"] > 0]
        if len(pts) < 3:
            continue
        s, b, r2 = slope_fit(pts)
        out.append({"metric": f"{short}_mean", "slope": s, "intercept": b, "r2": r2, "theory_exponent": -theta / 2})
    return out


def bound_inputs(cfg: ExperimentConfig, oracle: Oracle, profile, t: int, delta: float | None = None) -> BoundInputs:
    return BoundInputs(cfg.lam, oracle.ck2, cfg.M, cfg.theta, cfg.delta if delta is None else delta, int(t), oracle.init_dist, profile)


@dataclass
class ExperimentReport:
    cfg: ExperimentConfig
    oracle: Oracle
    mixing: MixingTable
    results: list[RunResult]
    aggregate: list[dict]
    slopes: list[dict]
    bounds: list[dict]
    failures: list[str] = field(default_factory=list)
    out_dir: Path | None = None
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.failures

    def slope(self, metric: str = "k_dist_mean") -> float:
        return next(s["slope"] for s in self.slopes if s["metric"] == metric)

    def mean_curve(self, short: str = "k_dist") -> np.ndarray:
        return np.array([r[f"{short}_mean"] for r in self.aggregate])


def _svg(path: Path, rep: ExperimentReport) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "markov-rkhs"
    ts = np.array([r["t"] for r in rep.aggregate], float)
    fig, ax = plt.subplots(figsize=(6, 4))
    for short, label in (("k_dist", "K-norm to f_lam"), ("rho_dist", "rho-norm to f_lam"), ("frho_dist", "rho-norm to f_rho")):
        ax.loglog(ts, [r[f"{short}_mean"] for r in rep.aggregate], marker="o", label=label)
    ax.fill_between(ts, [r["k_dist_p10"] for r in rep.aggregate], [r["k_dist_p90"] for r in rep.aggregate], alpha=0.2)
    bnd = [b["e_init_bound"] + math.sqrt(b["e_samp_sq_bound"]) for b in rep.bounds if np.isfinite(b["e_samp_sq_bound"])]
    if len(bnd) == len(ts):
        ax.loglog(ts, bnd, "k--", label="bound (init + sqrt samp)")
    ax.set_xlabel("t")
    ax.set_ylabel("error")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_experiment(rep: ExperimentReport, out_root: str | Path | None = None) -> Path:
    cfg = rep.cfg
    out = Path(out_root or cfg.output_dir) / cfg.hash
    out.mkdir(parents=True, exist_ok=True)
    for r in rep.results:
        rows = [{c: getattr(cp, c) for c in SEED_COLUMNS} for cp in r.checkpoints]
        write_csv(out / f"seed_{r.seed}.csv", SEED_COLUMNS, rows, f"markov_rkhs {SCHEMA} config={cfg.hash} seed={r.seed}")
    write_csv(out / "aggregate.csv", AGGREGATE_COLUMNS, rep.aggregate, f"markov_rkhs {SCHEMA} config={cfg.hash}")
    write_csv(out / "bounds.csv", BOUNDS_COLUMNS, rep.bounds, f"markov_rkhs {SCHEMA} config={cfg.hash}")
    write_csv(out / "slopes.csv", SLOPE_COLUMNS, rep.slopes, f"markov_rkhs {SCHEMA} config={cfg.hash}")
    o = rep.oracle
    manifest = {
        "schema": SCHEMA,
        "version": __version__,
        "config_hash": cfg.hash,
        "config": json.loads(cfg.canonical()),
        "generator": GENERATOR,
        "oracle": {
            "quadrature": f"gauss-legendre {cfg.quadrature}",
            "ridge_residual": o.residual,
            "approx_error": o.approx_error,
            "approx_bound": o.approx_bound,
            "approx_ok": o.approx_ok,
            "init_dist": o.init_dist,
            "ck2": o.ck2,
            "target_is_artifact_choice": True,
        },
        "mixing": {
            "t": rep.mixing.t.tolist(),
            "phi": rep.mixing.phi.tolist(),
            "beta": rep.mixing.beta.tolist(),
            "phi_profile": rep.mixing.phi_profile.to_dict(),
            "beta_profile": rep.mixing.beta_profile.to_dict(),
        },
        "tau": tau(cfg.theta) if cfg.theta < 1 else None,
        "failures": rep.failures,
        "wall_time": {"total": rep.wall_time, "per_seed": {str(r.seed): r.wall_time for r in rep.results}},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    if cfg.svg:
        _svg(out / "report.svg", rep)
    rep.out_dir = out
    return out


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, write: bool = True, out_root=None) -> ExperimentReport:
    start = time.perf_counter()
    oracle = build_oracle(cfg)
    failures = []
    if not oracle.residual <= ORACLE_RESIDUAL_TOL:
        failures.append(f"ridge residual {oracle.residual:.3e} exceeds {ORACLE_RESIDUAL_TOL}")
    if not oracle.approx_ok:
        failures.append(f"approximation error {oracle.approx_error:.6e} exceeds bound {oracle.approx_bound:.6e}")
    mix = mixing_table(cfg.copula, cfg.mixing_tmax, cfg.mixing_n)
    results = map_seeds(run_seed, (cfg, oracle), list(cfg.seeds), jobs)
    for r in results:
        for cp in r.checkpoints:
            vals = (cp.k_dist_to_target, cp.rho_dist_to_target, cp.rho_dist_to_frho)
            if not all(np.isfinite(v) and v >= 0 for v in vals):
                failures.append(f"seed {r.seed} t={cp.t}: invalid distance")
    agg = aggregate(results, oracle.approx_error, oracle.approx_bound)
    bnds = [bounds_row(bound_inputs(cfg, oracle, mix.phi_profile, t)) for t in cfg.checkpoints]
    rep = ExperimentReport(cfg, oracle, mix, results, agg, slopes(agg, cfg.theta), bnds, failures)
    rep.wall_time = time.perf_counter() - start
    if write:
        write_experiment(rep, out_root)
    return rep


@dataclass
class CoverageReport:
    delta: float
    rows: list[dict]

    @property
    def passed(self) -> bool:
        return all(r["pass"] for r in self.rows)

    def fraction(self, t: int) -> float:
        return next(r["fraction"] for r in self.rows if r["t"] == t)


MIN_COVERAGE_SEEDS = 100


def _coverage_rows(dists: np.ndarray, ts, bounds, delta) -> list[dict]:
    rows = []
    for j, t in enumerate(ts):
        viol = int(np.sum(dists[:, j] > bounds[j]))
        frac = viol / dists.shape[0]
        rows.append({"t": int(t), "delta": delta, "bound": bounds[j], "violations": viol,
                     "n_seeds": dists.shape[0], "fraction": frac, "pass": frac <= delta})
    return rows


def coverage_report(cfg: ExperimentConfig, delta: float | None = None, jobs: int = 1,
                    report: ExperimentReport | None = None, write: bool = True) -> CoverageReport:
    """Fraction of seeds whose K-distance exceeds init_bound(t) + sqrt(samp_bound(t, delta))."""
    delta = cfg.delta if delta is None else float(delta)
    if len(cfg.seeds) < MIN_COVERAGE_SEEDS:
        raise StatisticsError(f"coverage needs at least {MIN_COVERAGE_SEEDS} seeds (got {len(cfg.seeds)})")
    rep = report or run_experiment(cfg, jobs=jobs, write=write)
    prof = rep.mixing.phi_profile
    bounds = []
    for t in cfg.checkpoints:
        inp = bound_inputs(cfg, rep.oracle, prof, t, delta)
        bounds.append(init_bound(inp) + math.sqrt(samp_bound(inp)))
    d = np.array([r.column("k_dist_to_target") for r in rep.results])
    cov = CoverageReport(delta, _coverage_rows(d, cfg.checkpoints, bounds, delta))
    if write and rep.out_dir is not None:
        write_csv(rep.out_dir / f"coverage_delta{delta:g}.csv", COVERAGE_COLUMNS, cov.rows, f"markov_rkhs {SCHEMA} config={cfg.hash}")
    return cov


@dataclass
class CompareReport:
    iid: ExperimentReport
    markov: ExperimentReport
    rows: list[dict]
    slope_iid: float
    slope_markov: float
    asserted: bool
    tol: float = 0.1

    @property
    def slope_diff(self) -> float:
        return abs(self.slope_markov - self.slope_iid)

    @property
    def passed(self) -> bool:
        return (not self.asserted) or self.slope_diff <= self.tol


def _exponentially_mixing(cfg: ExperimentConfig) -> bool:
    c = cfg.copula
    return c.family in ("independence", "fgm") or c.lower_bound() > 0


def compare_iid_vs_markov(cfg: ExperimentConfig, jobs: int = 1, write: bool = True, out_root=None) -> CompareReport:
    """Same seeds, independence copula vs the configured one."""
    iid_cfg = cfg.with_(copula_spec={"family": "independence"})
    a = run_experiment(iid_cfg, jobs, write, out_root)
    b = run_experiment(cfg, jobs, write, out_root)
    ia, ib = a.mean_curve(), b.mean_curve()
    rows = [{"t": r["t"], "iid_mean": x, "markov_mean": y, "ratio": y / x if x > 0 else float("nan")}
            for r, x, y in zip(a.aggregate, ia, ib)]
    rep = CompareReport(a, b, rows, a.slope(), b.slope(), _exponentially_mixing(cfg))
    if write:
        out = Path(out_root or cfg.output_dir) / f"compare_{iid_cfg.hash}_{cfg.hash}"
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "compare.csv", COMPARE_COLUMNS, rows, f"markov_rkhs {SCHEMA} iid={iid_cfg.hash} markov={cfg.hash}")
        summary = {"slope_iid": rep.slope_iid, "slope_markov": rep.slope_markov, "slope_diff": rep.slope_diff,
                   "asserted": rep.asserted, "tol": rep.tol, "passed": rep.passed}
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return rep


@dataclass
class SsmgdReport:
    cfg: SsmgdConfig
    problem: QuadraticProblem
    w_star: np.ndarray
    sigma_sq: float
    mixing: MixingTable
    results: list[RunResult]
    coverage: CoverageReport
    out_dir: Path | None = None


def _ssmgd_seed(scfg: SsmgdConfig, p: QuadraticProblem, w_star: np.ndarray, seed: int) -> RunResult:
    z = sample_chain(ChainConfig(scfg.copula, max(scfg.checkpoints), seed))
    r = run_ssmgd(p, z, scfg.theta, scfg.checkpoints, w_star=w_star)
    r.config_hash = scfg.hash
    r.seed = int(seed)
    r.final = None
    return r


def ssmgd_bound(p: QuadraticProblem, sig2: float, theta: float, delta: float, t: int, init_dist: float, profile) -> float:
    e_init = init_decay(p.alpha, theta, t) * init_dist
    return e_init + math.sqrt(hilbert_samp_bound(sig2, p.kappa, p.eta, theta, delta, t, profile))


def run_ssmgd_experiment(scfg: SsmgdConfig, jobs: int = 1, write: bool = True, out_root=None,
                         delta: float | None = None) -> SsmgdReport:
    delta = scfg.delta if delta is None else float(delta)
    if len(scfg.seeds) < MIN_COVERAGE_SEEDS:
        raise StatisticsError(f"coverage needs at least {MIN_COVERAGE_SEEDS} seeds (got {len(scfg.seeds)})")
    p = QuadraticProblem.default(scfg.dim, scfg.kappa, scfg.eta)
    sig2, _, _ = validate_assumptions(p)
    w_star = minimizer(p)
    mix = mixing_table(scfg.copula, 6, 512)
    results = map_seeds(_ssmgd_seed, (scfg, p, w_star), list(scfg.seeds), jobs)
    init = float(np.linalg.norm(w_star))
    bounds = [ssmgd_bound(p, sig2, scfg.theta, delta, t, init, mix.phi_profile) for t in scfg.checkpoints]
    d = np.array([r.column("k_dist_to_target") for r in results])
    cov = CoverageReport(delta, _coverage_rows(d, scfg.checkpoints, bounds, delta))
    rep = SsmgdReport(scfg, p, w_star, sig2, mix, results, cov)
    if write:
        out = Path(out_root or scfg.output_dir) / scfg.hash
        out.mkdir(parents=True, exist_ok=True)
        for r in results:
            rows = [{c: getattr(cp, c) for c in SEED_COLUMNS} for cp in r.checkpoints]
            write_csv(out / f"seed_{r.seed}.csv", SEED_COLUMNS, rows, f"markov_rkhs {SCHEMA} config={scfg.hash} seed={r.seed}")
        write_csv(out / "aggregate.csv", AGGREGATE_COLUMNS, aggregate(results), f"markov_rkhs {SCHEMA} config={scfg.hash}")
        write_csv(out / f"coverage_delta{delta:g}.csv", COVERAGE_COLUMNS, cov.rows, f"markov_rkhs {SCHEMA} config={scfg.hash}")
        manifest = {"schema": SCHEMA, "version": __version__, "config_hash": scfg.hash,
                    "config": json.loads(scfg.canonical()), "generator": GENERATOR, "sigma_sq": sig2,
                    "w_star": w_star.tolist(), "phi_profile": mix.phi_profile.to_dict()}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        rep.out_dir = out
    return rep
