"""Experiment configuration: a single JSON file with nested blocks.

Every run echoes a fully-resolved manifest (config with all defaults filled
in, derived quantities, seeds, output list) so that reruns are exact and no
silent default can drift.  Validation failures raise ConfigError with the
offending path spelled out.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .functionals import LinearFunctionalSpec, NonlinearitySpec
from .segment import SegmentBuffer
from .spectral import CriticalPair

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "EXPERIMENT_KINDS"]

EXPERIMENT_KINDS = ("spectral", "single", "couple", "figures", "convergence", "exit_times")


class ConfigError(Exception):
    pass


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing '{key}' in {where}")
    return d[key]


def _functional(d: dict | None, r: float, where: str) -> LinearFunctionalSpec | None:
    if d is None:
        return None
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object with point_masses/density_steps")
    try:
        return LinearFunctionalSpec(
            max_delay=r,
            point_masses=tuple((float(t), float(w)) for t, w in d.get("point_masses", [])),
            density_steps=tuple((float(t), float(w)) for t, w in d.get("density_steps", [])),
        )
    except (ValueError, TypeError) as e:
        raise ConfigError(f"invalid functional at {where}: {e}") from e


def _functional_dict(s: LinearFunctionalSpec | None) -> dict | None:
    if s is None:
        return None
    return {
        "point_masses": [list(pm) for pm in s.point_masses],
        "density_steps": [list(ds) for ds in s.density_steps],
    }


@dataclass
class XiSpec:
    """Initial-segment recipe; concrete shapes resolve against omega_c."""

    kind: str
    params: dict

    def build(self, pair: CriticalPair):
        w = pair.omega_c
        k, p = self.kind, self.params
        if k == "critical_cos":
            amp = float(p["sqrt_2h"])
            return lambda th: amp * np.cos(w * th)
        if k == "cos_plus_const":
            a, b = float(p.get("cos_amp", 1.0)), float(p.get("const", 0.0))
            return lambda th: a * np.cos(w * th) + b
        if k == "constant":
            c = float(p["value"])
            return lambda th: c
        if k == "samples":
            buf = SegmentBuffer(np.asarray(p["theta"], float), np.asarray(p["values"], float))
            return buf.sample
        raise ConfigError(f"unknown xi kind '{k}'")

    def scales(self, n_paths: int, base_seed: int) -> np.ndarray | None:
        """Per-path amplitude factors for the sampled-initial-condition switch."""
        if self.kind != "critical_cos" or not self.params.get("sample_h"):
            return None
        rng = np.random.Generator(np.random.PCG64(base_seed ^ 0x5EED))
        lo = float(self.params.get("h_lo", 0.0))
        hi = float(self.params.get("h_hi", 1.0))
        h = rng.uniform(lo, hi, n_paths)
        amp = float(self.params["sqrt_2h"])
        return np.sqrt(2.0 * h) / amp

    def as_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


@dataclass
class ExperimentConfig:
    kind: str
    r: float
    L0: LinearFunctionalSpec
    G: NonlinearitySpec
    noise_kind: str                 # "additive" | "multiplicative"
    sigma: float
    L1: LinearFunctionalSpec | None
    xi: XiSpec
    eps_list: list[float]
    T: float
    dt_rule: dict
    checkpoints_per_period: int
    overflow_guard: float
    h0_dt: float
    n_paths: int
    base_seed: int
    h0_paths: int
    C_e: float
    H_star: float
    exponent_a: float
    exponent_delta: float
    out_dir: Path
    threads: int
    paper_scale: bool = False
    dt_check: bool = False

    @classmethod
    def from_dict(cls, d: dict, out_override: str | None = None) -> "ExperimentConfig":
        kind = _need(d, "experiment", "top level")
        if kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"experiment must be one of {EXPERIMENT_KINDS}, got '{kind}'")
        sys_b = _need(d, "system", "top level")
        r = float(_need(sys_b, "max_delay", "system"))
        if r <= 0:
            raise ConfigError("system.max_delay must be positive")
        L0 = _functional(_need(sys_b, "L0", "system"), r, "system.L0")
        g_b = sys_b.get("G") or {}
        G = NonlinearitySpec(
            nu1=_functional(g_b.get("nu1"), r, "system.G.nu1"),
            nu3=_functional(g_b.get("nu3"), r, "system.G.nu3"),
            lipschitz_K=g_b.get("lipschitz_K"),
        )
        noise_b = _need(sys_b, "noise", "system")
        nk = _need(noise_b, "kind", "system.noise")
        sigma, L1 = 0.0, None
        if nk == "additive":
            sigma = float(_need(noise_b, "sigma", "system.noise"))
        elif nk == "multiplicative":
            L1 = _functional(_need(noise_b, "L1", "system.noise"), r, "system.noise.L1")
        else:
            raise ConfigError("system.noise.kind must be 'additive' or 'multiplicative'")
        xi_b = _need(sys_b, "xi", "system")
        xi = XiSpec(kind=_need(xi_b, "kind", "system.xi"),
                    params={k: v for k, v in xi_b.items() if k != "kind"})

        num = d.get("numerics", {})
        eps_list = num.get("eps", [0.05])
        if np.isscalar(eps_list):
            eps_list = [eps_list]
        eps_list = [float(e) for e in eps_list]
        for e in eps_list:
            if not (0 < e < 1):
                raise ConfigError(f"numerics.eps entries must lie in (0,1); got {e}")
        dt_rule = num.get("dt_rule", {"kind": "fast_step", "h": 1e-3})
        if dt_rule.get("kind") not in ("fast_step", "stability"):
            raise ConfigError("numerics.dt_rule.kind must be 'fast_step' or 'stability'")

        ens = d.get("ensemble", {})
        thr = d.get("thresholds", {})
        out_dir = Path(out_override or d.get("out_dir", "out"))
        return cls(
            kind=kind, r=r, L0=L0, G=G, noise_kind=nk, sigma=sigma, L1=L1, xi=xi,
            eps_list=eps_list,
            T=float(num.get("T", 1.0)),
            dt_rule=dt_rule,
            checkpoints_per_period=int(num.get("checkpoints_per_period", 8)),
            overflow_guard=float(num.get("overflow_guard", 1e6)),
            h0_dt=float(num.get("h0_dt", 1e-3)),
            n_paths=int(ens.get("n_paths", 100)),
            base_seed=int(ens.get("base_seed", 20260810)),
            h0_paths=int(ens.get("h0_paths", 100_000)),
            C_e=float(thr.get("C_e", 3.0)),
            H_star=float(thr.get("H_star", 1.5)),
            exponent_a=float(thr.get("a", 0.5)),
            exponent_delta=float(thr.get("delta", 1.0)),
            out_dir=out_dir,
            threads=int(d.get("threads", 0)) or 0,
            dt_check=bool(num.get("dt_check", False)),
        )

    def apply_paper_scale(self) -> None:
        """Paper-scale figure runs: eps = 0.025, N = 4000."""
        self.eps_list = [0.025]
        self.n_paths = 4000
        self.paper_scale = True

    def dt_for(self, eps: float, omega_c: float | None = None) -> float:
        """Resolve the dt rule at one eps and snap it to divide eps^2 r."""
        rule = self.dt_rule
        if rule["kind"] == "fast_step":
            raw = eps * eps * float(rule["h"])
        else:
            factor = float(rule.get("factor", 0.1))
            bound = 1.0 / self.L0.total_variation
            if omega_c is not None:
                bound = min(bound, 2.0 * np.pi / omega_c)
            raw = factor * eps * eps * bound
        window = eps * eps * self.r
        m = max(2, int(np.ceil(window / raw - 1e-12)))
        return window / m

    def resolved(self) -> dict:
        """Manifest echo: every knob explicit."""
        return {
            "experiment": self.kind,
            "system": {
                "max_delay": self.r,
                "L0": _functional_dict(self.L0),
                "G": {
                    "nu1": _functional_dict(self.G.nu1),
                    "nu3": _functional_dict(self.G.nu3),
                    "lipschitz_K": self.G.lipschitz_K,
                },
                "noise": (
                    {"kind": "additive", "sigma": self.sigma}
                    if self.noise_kind == "additive"
                    else {"kind": "multiplicative", "L1": _functional_dict(self.L1)}
                ),
                "xi": self.xi.as_dict(),
            },
            "numerics": {
                "eps": self.eps_list,
                "T": self.T,
                "dt_rule": self.dt_rule,
                "checkpoints_per_period": self.checkpoints_per_period,
                "overflow_guard": self.overflow_guard,
                "h0_dt": self.h0_dt,
                "dt_check": self.dt_check,
            },
            "ensemble": {
                "n_paths": self.n_paths,
                "base_seed": self.base_seed,
                "h0_paths": self.h0_paths,
            },
            "thresholds": {
                "C_e": self.C_e,
                "H_star": self.H_star,
                "a": self.exponent_a,
                "delta": self.exponent_delta,
            },
            "out_dir": str(self.out_dir),
            "paper_scale": self.paper_scale,
        }


def load_config(path: str | Path, out_override: str | None = None) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    return ExperimentConfig.from_dict(data, out_override=out_override)
