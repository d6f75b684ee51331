"""Experiment configuration: TOML in, canonical JSON out (the hash input).

Example::

    kernel = { family = "gaussian", bandwidth = 0.5 }
    copula = { family = "fgm", rho = 0.5 }
    target = { g = "sin", nu = 0.5 }
    lambda = 0.1
    theta = 0.75
    M = 2.0
    noise_sd = 0.1
    chain_length = 100000
    checkpoints = "log:100:100000:10"
    n_seeds = 50            # or seeds = [1, 2, 3]
    delta = 0.1

    [ssmgd]                 # optional, used by the ssmgd subcommand
    dim = 5
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import tomli

from ..copulas import Copula, band_copula
from ..kernels import Kernel

DEFAULTS = {
    "kernel": {"family": "gaussian", "bandwidth": 0.5},
    "copula": {"family": "fgm", "rho": 0.5},
    "target": {"g": "sin", "nu": 0.5},
    "lambda": 0.1,
    "theta": 0.75,
    "M": 2.0,
    "noise_sd": 0.1,
    "chain_length": 100000,
    "checkpoints": "log:100:100000:10",
    "delta": 0.1,
    "burn_in": 0,
    "quadrature": 256,
    "mixing_n": 512,
    "mixing_tmax": 6,
    "engine": "auto",
}
SSMGD_DEFAULTS = {
    "dim": 5,
    "kappa": 0.5,
    "eta": 2.0,
    "theta": 0.75,
    "copula": {"family": "fgm", "rho": 0.3},
    "checkpoints": [100, 1000],
    "n_seeds": 200,
    "delta": 0.1,
}
_TOP_KEYS = set(DEFAULTS) | {"seeds", "n_seeds", "seed_base", "output_dir", "ssmgd", "svg"}


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line else msg)


def parse_checkpoints(spec) -> tuple[int, ...]:
    """``"log:a:b:n"`` gives n log-spaced integers from a to b (rounded, deduplicated)."""
    if isinstance(spec, str):
        m = re.fullmatch(r"log:(\d+(?:\.\d*)?(?:e\d+)?):(\d+(?:\.\d*)?(?:e\d+)?):(\d+)", spec.strip())
        if not m:
            raise ValueError(f"bad checkpoint shorthand {spec!r}; expected 'log:a:b:n'")
        a, b, n = float(m.group(1)), float(m.group(2)), int(m.group(3))
        if not (1 <= a <= b) or n < 1:
            raise ValueError("checkpoint shorthand needs 1 <= a <= b and n >= 1")
        pts = np.unique(np.round(np.logspace(np.log10(a), np.log10(b), n)).astype(np.int64))
        return tuple(int(t) for t in pts)
    pts = sorted({int(t) for t in spec})
    if not pts or pts[0] < 1:
        raise ValueError("checkpoints must be positive integers")
    return tuple(pts)


def copula_from_dict(d: dict) -> Copula:
    fam = d.get("family")
    if fam == "independence":
        return Copula.independence()
    if fam == "fgm":
        return Copula.fgm(float(d["rho"]))
    if fam == "mixture":
        return Copula.mixture(float(d["eps"]), copula_from_dict(d["base"]))
    if fam == "band":
        return Copula.from_grid(band_copula(int(d.get("n", 256)), int(d.get("width", 16))))
    if fam == "poly_fixture":
        from ..fixtures import polynomial_mixing_copula

        return polynomial_mixing_copula(float(d.get("k", 2.0))).copula
    if fam == "grid":
        return Copula.from_grid(np.asarray(d["density"], float))
    raise ValueError(f"unknown copula family {fam!r}")


@dataclass(frozen=True)
class SsmgdConfig:
    dim: int
    kappa: float
    eta: float
    theta: float
    copula_spec: dict
    checkpoints: tuple[int, ...]
    seeds: tuple[int, ...]
    delta: float
    output_dir: str = "out"

    @property
    def copula(self) -> Copula:
        return copula_from_dict(self.copula_spec)

    def canonical(self) -> str:
        d = {
            "kind": "ssmgd", "dim": self.dim, "kappa": self.kappa, "eta": self.eta, "theta": self.theta,
            "copula": self.copula_spec, "checkpoints": list(self.checkpoints), "seeds": list(self.seeds),
            "delta": self.delta,
        }
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]


@dataclass(frozen=True)
class ExperimentConfig:
    kernel_spec: dict
    copula_spec: dict
    target_g: str
    nu: float
    lam: float
    theta: float
    M: float
    noise_sd: float
    chain_length: int
    checkpoints: tuple[int, ...]
    seeds: tuple[int, ...]
    delta: float
    output_dir: str = "out"
    burn_in: int = 0
    quadrature: int = 256
    mixing_n: int = 512
    mixing_tmax: int = 6
    engine: str = "auto"
    svg: bool = True
    ssmgd: SsmgdConfig | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if not self.checkpoints:
            raise ValueError("checkpoints must be nonempty")
        if self.chain_length < max(self.checkpoints):
            raise ValueError("chain_length must be at least max(checkpoints)")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not 0.5 < self.theta <= 1.0:
            raise ValueError("theta must lie in (1/2, 1]")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not self.M > 0:
            raise ValueError("M must be positive")
        if not 0 < self.nu <= 1:
            raise ValueError("target nu must lie in (0, 1]")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")
        Kernel.from_dict(self.kernel_spec)
        copula_from_dict(self.copula_spec)

    @property
    def kernel(self) -> Kernel:
        return Kernel.from_dict(self.kernel_spec)

    @property
    def copula(self) -> Copula:
        return copula_from_dict(self.copula_spec)

    def as_dict(self) -> dict:
        return {
            "kernel": self.kernel_spec, "copula": self.copula_spec,
            "target": {"g": self.target_g, "nu": self.nu},
            "lambda": self.lam, "theta": self.theta, "M": self.M, "noise_sd": self.noise_sd,
            "chain_length": self.chain_length, "checkpoints": list(self.checkpoints),
            "seeds": list(self.seeds), "delta": self.delta, "burn_in": self.burn_in,
            "quadrature": self.quadrature, "mixing_n": self.mixing_n, "mixing_tmax": self.mixing_tmax,
            "engine": self.engine,
        }

    def canonical(self) -> str:
        """Sorted compact JSON of every result-determining field (output_dir and svg excluded)."""
        return json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]

    def with_(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)

    def to_toml(self) -> str:
        """Printed canonical form (TOML)."""
        d = self.as_dict()
        lines = []
        for k in sorted(d):
            lines.append(f"{k} = {_toml_value(d[k])}")
        return "\n".join(lines) + "\n"


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, dict):
        return "{ " + ", ".join(f"{k} = {_toml_value(v[k])}" for k in sorted(v)) + " }"
    return "[" + ", ".join(_toml_value(x) for x in v) + "]"


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(rf"^[ \t]*{re.escape(key)}[ \t]*=", re.M)
    m = pat.search(text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _seeds(raw: dict, seed_base: int | None, default_n: int) -> tuple[int, ...]:
    if "seeds" in raw:
        return tuple(int(s) for s in raw["seeds"])
    base = int(raw.get("seed_base", 0) if seed_base is None else seed_base)
    n = int(raw.get("n_seeds", default_n))
    return tuple(range(base, base + n))


def config_from_dict(raw: dict, text: str = "", seed_base: int | None = None, output_dir: str | None = None) -> ExperimentConfig:
    for k in raw:
        if k not in _TOP_KEYS:
            raise ConfigError(f"unknown key {k!r}", _line_of(text, k))
    d = {**DEFAULTS, **{k: v for k, v in raw.items() if k != "ssmgd"}}

    def get(key, conv):
        try:
            return conv(d[key])
        except (ValueError, KeyError, TypeError, AttributeError) as e:
            raise ConfigError(f"{key}: {e}", _line_of(text, key)) from None

    target = get("target", dict)
    fields = dict(
        kernel_spec=get("kernel", dict),
        copula_spec=get("copula", dict),
        target_g=str(target.get("g", "sin")),
        nu=get("target", lambda t: float(t.get("nu", 0.5))),
        lam=get("lambda", float),
        theta=get("theta", float),
        M=get("M", float),
        noise_sd=get("noise_sd", float),
        chain_length=get("chain_length", int),
        checkpoints=get("checkpoints", parse_checkpoints),
        delta=get("delta", float),
        burn_in=get("burn_in", int),
        quadrature=get("quadrature", int),
        mixing_n=get("mixing_n", int),
        mixing_tmax=get("mixing_tmax", int),
        engine=get("engine", str),
        output_dir=str(output_dir or raw.get("output_dir", "out")),
        svg=bool(raw.get("svg", True)),
    )
    try:
        fields["seeds"] = _seeds(raw, seed_base, 1)
        if raw.get("ssmgd") is not None:
            fields["ssmgd"] = ssmgd_from_dict(raw["ssmgd"], seed_base, fields["output_dir"])
        return ExperimentConfig(**fields)
    except (ValueError, KeyError, TypeError) as e:
        msg = str(e)
        line = next((_line_of(text, k) for k in raw if k in msg and _line_of(text, k)), None)
        raise ConfigError(msg, line) from None


def ssmgd_from_dict(raw: dict | None, seed_base: int | None = None, output_dir: str = "out") -> SsmgdConfig:
    d = {**SSMGD_DEFAULTS, **(raw or {})}
    return SsmgdConfig(
        dim=int(d["dim"]), kappa=float(d["kappa"]), eta=float(d["eta"]), theta=float(d["theta"]),
        copula_spec=dict(d["copula"]), checkpoints=parse_checkpoints(d["checkpoints"]),
        seeds=_seeds(d, seed_base, int(d["n_seeds"])), delta=float(d["delta"]), output_dir=output_dir,
    )


def load_config(path, seed_base: int | None = None, output_dir: str | None = None) -> ExperimentConfig:
    text = Path(path).read_text()
    return parse_config(text, seed_base, output_dir)


def parse_config(text: str, seed_base: int | None = None, output_dir: str | None = None) -> ExperimentConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        m = re.search(r"line (\d+)", str(e))
        raise ConfigError(str(e), int(m.group(1)) if m else None) from None
    return config_from_dict(raw, text, seed_base, output_dir)


def reference_config(**kw) -> ExperimentConfig:
    """Gaussian bw 0.5, fgm 0.5, lambda 0.1, theta 0.75, nu 0.5, M 2, 50 seeds, t = 1e2..1e5."""
    raw = {"n_seeds": 50}
    raw.update(kw)
    return config_from_dict(raw)
