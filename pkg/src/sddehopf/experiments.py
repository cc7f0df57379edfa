"""Config-driven experiment kinds behind the CLI.

Every kind writes CSV outputs plus a manifest.json echoing the resolved
configuration, derived spectral quantities, per-eps steps, and the list of
files written.  Output bytes are deterministic for a fixed manifest: floats
are printed with repr-faithful %.17g and nothing timestamps itself.
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .averaging import (
    averaged_additive,
    averaged_multiplicative_from_operators,
    simulate_h0_ensemble,
)
from .config import ConfigError, ExperimentConfig
from .ensemble import run_coupled_ensemble, run_full_ensemble
from .reduced import build_transient, coupled_run, stopping_diagnostics
from .sdde import (
    AdditiveNoise,
    MultiplicativeNoise,
    SddeConfig,
    project_trajectory,
    simulate_sdde,
)
from .spectral import (
    CriticalPair,
    compute_psi_tilde,
    default_region,
    find_roots,
    fit_decay,
    gamma_table,
    verify_criticality,
)
from .stats import EmpiricalCdf, ks_distance, loglog_slope
from .wiener import WienerPath

__all__ = ["NotCritical", "run_experiment"]


class NotCritical(Exception):
    """A reduction experiment was requested on a non-critical system."""


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    n = len(columns[0])
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(n):
            fh.write(",".join(_fmt(c[i]) for c in columns) + "\n")


class _Run:
    """Collects outputs and assembles the manifest."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []
        self.derived: dict = {}

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def write_manifest(self) -> Path:
        manifest = {
            "tool": {"name": "sddehopf", "version": __version__},
            "config": self.cfg.resolved(),
            "derived": self.derived,
            "outputs": sorted(self.files),
        }
        p = self.out / "manifest.json"
        p.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return p


def _spectral_analysis(cfg: ExperimentConfig, run: _Run):
    region = default_region(cfg.r)
    roots = find_roots(cfg.L0, region)
    report = verify_criticality(roots, region=region)
    write_csv(
        run.path("roots.csv"),
        ["re", "im"],
        [np.array([z.real for z in roots]), np.array([z.imag for z in roots])],
    )
    run.derived["criticality"] = {
        "is_critical": report.is_critical,
        "omega_c": report.omega_c,
        "gap": report.gap,
        "n_roots": report.n_roots,
        "rightmost_re": report.rightmost_re,
    }
    return roots, report


def _require_pair(cfg: ExperimentConfig, run: _Run) -> CriticalPair:
    _, report = _spectral_analysis(cfg, run)
    if not report.is_critical:
        raise NotCritical(
            f"system is not critical (omega_c={report.omega_c}, "
            f"rightmost Re={report.rightmost_re:.3e}); reduction experiments need criticality"
        )
    psi = compute_psi_tilde(cfg.L0, report.omega_c)
    pair = CriticalPair(omega_c=report.omega_c, psi_tilde=psi, r=cfg.r, kappa=report.gap)
    run.derived["pair"] = {
        "omega_c": pair.omega_c,
        "psi_tilde": list(psi),
        "gap_kappa": pair.kappa,
    }
    return pair


def _sdde_config(cfg: ExperimentConfig, pair: CriticalPair, eps: float) -> SddeConfig:
    noise = (
        AdditiveNoise(cfg.sigma)
        if cfg.noise_kind == "additive"
        else MultiplicativeNoise(cfg.L1)
    )
    return SddeConfig(
        L0=cfg.L0,
        G=cfg.G,
        noise=noise,
        eps=eps,
        T=cfg.T,
        dt=cfg.dt_for(eps, pair.omega_c),
        xi=cfg.xi.build(pair),
        overflow_guard=cfg.overflow_guard,
    )


def _threads(cfg: ExperimentConfig) -> int | None:
    return cfg.threads if cfg.threads > 0 else None


# --- experiment kinds -------------------------------------------------------

def _kind_spectral(cfg: ExperimentConfig, run: _Run) -> None:
    _, report = _spectral_analysis(cfg, run)
    if not report.is_critical:
        return
    psi = compute_psi_tilde(cfg.L0, report.omega_c)
    pair = CriticalPair(omega_c=report.omega_c, psi_tilde=psi, r=cfg.r, kappa=report.gap)
    t, g = gamma_table(cfg.L0, pair)
    fit = fit_decay(t, np.abs(g), t0=2.0 * cfg.r)
    write_csv(run.path("gamma.csv"), ["t", "gamma"], [t, g])
    run.derived["pair"] = {"omega_c": pair.omega_c, "psi_tilde": list(psi)}
    run.derived["gamma_decay"] = {
        "K": fit.K,
        "kappa": fit.kappa,
        "residual": fit.residual,
        "gamma_at_0": float(g[0]),
    }


def _kind_single(cfg: ExperimentConfig, run: _Run) -> None:
    pair = _require_pair(cfg, run)
    eps = cfg.eps_list[0]
    sc = _sdde_config(cfg, pair, eps)
    res = simulate_sdde(sc, WienerPath(cfg.base_seed, sc.dt))
    t, x = res.trajectory()
    write_csv(run.path("trajectory.csv"), ["t", "x"], [t, x])
    proj = project_trajectory(res, pair)
    write_csv(
        run.path("projection.csv"),
        ["t", "z1", "z2", "y_norm", "H"],
        [proj.t, proj.z[:, 0], proj.z[:, 1], proj.y_norm, proj.H],
    )
    run.derived["single"] = {
        "eps": eps,
        "dt": sc.dt,
        "n_steps": sc.n_steps,
        "blowup": None if res.blowup is None else {"time": res.blowup.time},
    }


def _kind_couple(cfg: ExperimentConfig, run: _Run) -> None:
    pair = _require_pair(cfg, run)
    eps = cfg.eps_list[0]
    sc = _sdde_config(cfg, pair, eps)
    tr = build_transient(sc, pair)
    cr = coupled_run(sc, pair, WienerPath(cfg.base_seed, sc.dt), transient=tr,
                     per_period=cfg.checkpoints_per_period)
    write_csv(
        run.path("diagnostics.csv"),
        ["t", "alpha", "beta", "y_norm", "H"],
        [cr.t_ck, cr.alpha, cr.beta_ck, cr.y_norm, cr.H],
    )
    stop = stopping_diagnostics(cr, cfg.C_e)
    run.derived["couple"] = {
        "eps": eps,
        "dt": sc.dt,
        "sup_alpha": cr.sup_alpha,
        "sup_beta": cr.sup_beta,
        "sup_y": cr.sup_y,
        "sup_err_hat": cr.sup_err_hat,
        "sup_err_tilde": cr.sup_err_tilde,
        "stopping": {
            "C_e": cfg.C_e,
            "e_eps": stop.e_eps,
            "stopped": stop.stopped,
            "sup_y_stopped": stop.sup_y_stopped,
            "sup_alpha_stopped": stop.sup_alpha_stopped,
            "event_E": stop.event_E,
        },
        "blowup": None if cr.blowup is None else {"time": cr.blowup.time, "component": cr.blowup.component},
        "transient": {"K": tr.K, "kappa": tr.kappa, "u_cut": tr.u_cut},
    }


def _amplitude_sde(cfg: ExperimentConfig, pair: CriticalPair):
    if cfg.noise_kind == "additive":
        return averaged_additive(pair, cfg.G, cfg.sigma)
    if not cfg.G.is_zero:
        raise ConfigError(
            "the averaged amplitude equation for multiplicative noise is only "
            "available in closed form for G = 0"
        )
    return averaged_multiplicative_from_operators(pair.psi_tilde, cfg.L1, pair)


def _figures_payload(cfg: ExperimentConfig, pair: CriticalPair, eps: float,
                     n_paths: int, seed: int):
    """Shared machinery of the figures and exit_times kinds."""
    sc = _sdde_config(cfg, pair, eps)
    thr = float(np.sqrt(2.0 * cfg.H_star))
    scales = cfg.xi.scales(n_paths, seed)
    ens = run_full_ensemble(
        sc, n_paths, seed, pair=pair, threshold=thr,
        threads=_threads(cfg), xi_scales=scales,
    )
    sde = _amplitude_sde(cfg, pair)
    hist = sc.history_samples()
    from .spectral import projection_weights

    a_w, _ = projection_weights(sc.theta_grid(), cfg.L0, pair)
    z0 = a_w @ hist
    h0_base = 0.5 * float(z0 @ z0)
    if scales is None:
        h0 = h0_base
    else:
        # matching initial-H distribution for the averaged ensemble
        h0 = h0_base * (cfg.xi.scales(cfg.h0_paths, seed) ** 2)
    h0_T, tau_h = simulate_h0_ensemble(
        sde, h0, cfg.T, cfg.h0_dt, cfg.h0_paths, seed + 10_000_019, h_star=cfg.H_star
    )
    return sc, ens, sde, h0_T, tau_h


def _kind_figures(cfg: ExperimentConfig, run: _Run) -> None:
    pair = _require_pair(cfg, run)
    eps = cfg.eps_list[0]
    sc, ens, sde, h0_T, tau_h = _figures_payload(cfg, pair, eps, cfg.n_paths, cfg.base_seed)
    alive = ens.alive
    if not np.all(alive):
        print(
            f"PartialEnsemble: {np.sum(~alive)}/{alive.size} paths blew up; "
            "results carry the reduced sample",
            file=sys.stderr,
        )
    h_eps = ens.H_T[alive]
    write_csv(run.path("h_eps_samples.csv"), ["h"], [np.sort(h_eps)])
    write_csv(run.path("h0_samples.csv"), ["h"], [np.sort(h0_T)])

    horizon = cfg.T
    tau_eps = ens.tau[alive]
    write_csv(
        run.path("tau_eps_samples.csv"),
        ["tau", "censored"],
        [np.where(np.isnan(tau_eps), horizon, tau_eps), np.isnan(tau_eps).astype(int)],
    )
    write_csv(
        run.path("tau_h_samples.csv"),
        ["tau", "censored"],
        [np.where(np.isnan(tau_h), horizon, tau_h), np.isnan(tau_h).astype(int)],
    )

    cdf_h_eps = EmpiricalCdf.from_samples(h_eps)
    cdf_h0 = EmpiricalCdf.from_samples(h0_T)
    cdf_t_eps = EmpiricalCdf.from_exit_times(tau_eps, horizon)
    cdf_t_h = EmpiricalCdf.from_exit_times(tau_h, horizon)
    for name, cdf in (
        ("cdf_h_eps.csv", cdf_h_eps),
        ("cdf_h0.csv", cdf_h0),
        ("cdf_tau_eps.csv", cdf_t_eps),
        ("cdf_tau_h.csv", cdf_t_h),
    ):
        x, f = cdf.grid()
        write_csv(run.path(name), ["x", "F"], [x, f])

    ks_h = ks_distance(cdf_h_eps, cdf_h0)
    ks_tau = ks_distance(cdf_t_eps, cdf_t_h)
    metrics = [
        ("ks_H", ks_h),
        ("ks_tau", ks_tau),
        ("n_paths", float(cfg.n_paths)),
        ("n_blown", float(np.sum(~alive))),
        ("blown_fraction", ens.blown_fraction),
        ("censored_fraction_eps", float(np.mean(np.isnan(tau_eps)))),
        ("censored_fraction_h", float(np.mean(np.isnan(tau_h)))),
    ]
    if cfg.dt_check:
        sub = min(200, cfg.n_paths)
        cfg_half = _sdde_config(cfg, pair, eps)
        half = SddeConfig(
            L0=cfg_half.L0, G=cfg_half.G, noise=cfg_half.noise, eps=eps, T=cfg.T,
            dt=cfg_half.dt / 2.0, xi=cfg_half.xi, overflow_guard=cfg_half.overflow_guard,
        )
        ens2 = run_full_ensemble(half, sub, cfg.base_seed, pair=pair, threads=_threads(cfg))
        ks2 = ks_distance(EmpiricalCdf.from_samples(ens2.H_T[ens2.alive]), cdf_h0)
        metrics.append(("ks_H_half_dt", ks2))
    write_csv(
        run.path("ks_summary.csv"),
        ["metric", "value"],
        [np.array([m for m, _ in metrics], dtype=object), np.array([v for _, v in metrics])],
    )
    run.derived["figures"] = {
        "eps": eps,
        "dt": sc.dt,
        "n_steps": sc.n_steps,
        "ks_H": ks_h,
        "ks_tau": ks_tau,
        "amplitude_sde": {
            "provenance": sde.provenance,
            "const": sde.const,
            "lin": sde.lin,
            "quad": sde.quad,
            "c1": sde.c1,
            "sqrt_coef": sde.sqrt_coef,
        },
    }
    h_grid = np.linspace(0.0, max(2.0 * cfg.H_star, 1.0), 101)
    write_csv(
        run.path("amplitude_sde.csv"),
        ["H", "drift", "diffusion"],
        [h_grid, sde.drift(h_grid), sde.diffusion(h_grid)],
    )


def _kind_convergence(cfg: ExperimentConfig, run: _Run) -> None:
    pair = _require_pair(cfg, run)
    if len(cfg.eps_list) < 3:
        raise ConfigError("convergence experiments need at least 3 eps values")
    rows = []
    for eps in sorted(cfg.eps_list, reverse=True):
        sc = _sdde_config(cfg, pair, eps)
        tr = build_transient(sc, pair, fit=False)
        ens = run_coupled_ensemble(
            sc, pair, cfg.n_paths, cfg.base_seed, transient=tr,
            per_period=cfg.checkpoints_per_period, threads=_threads(cfg),
        )
        alive = ens.alive
        _, _, _, event = ens.stopping(cfg.C_e)
        rows.append(
            {
                "eps": eps,
                "n_paths": cfg.n_paths,
                "dt": sc.dt,
                "mean_sup_alpha_sq": float(np.mean(ens.sup_alpha[alive] ** 2)),
                "mean_sup_beta_sq": float(np.mean(ens.sup_beta[alive] ** 2)),
                "mean_sup_beta": float(np.mean(ens.sup_beta[alive])),
                "mean_sup_y": float(np.mean(ens.sup_y[alive])),
                "mean_sup_err_tilde4": float(np.mean(ens.sup_err_tilde[alive] ** 4)),
                "mean_sup_err_hat4": float(np.mean(ens.sup_err_hat[alive] ** 4)),
                "p_E_event": float(np.mean(event[alive])),
                "blown_fraction": ens.blown_fraction,
            }
        )
        if ens.blown_fraction > 0:
            print(
                f"PartialEnsemble at eps={eps}: blown fraction {ens.blown_fraction:.3f}",
                file=sys.stderr,
            )
    keys = list(rows[0].keys())
    write_csv(
        run.path("ensemble_summary.csv"),
        keys,
        [np.array([r[k] for r in rows]) for k in keys],
    )
    eps_arr = np.array([r["eps"] for r in rows])
    slopes = []
    for metric in ("mean_sup_err_tilde4", "mean_sup_err_hat4", "mean_sup_alpha_sq",
                   "mean_sup_beta_sq", "mean_sup_beta", "mean_sup_y"):
        vals = np.array([r[metric] for r in rows])
        if np.all(vals > 0):
            fit = loglog_slope(eps_arr, vals)
            slopes.append((metric, fit.slope, fit.intercept, fit.r_squared))
    write_csv(
        run.path("slopes.csv"),
        ["metric", "slope", "intercept", "r_squared"],
        [
            np.array([s[0] for s in slopes], dtype=object),
            np.array([s[1] for s in slopes]),
            np.array([s[2] for s in slopes]),
            np.array([s[3] for s in slopes]),
        ],
    )
    run.derived["convergence"] = {
        "rows": rows,
        "slopes": {s[0]: s[1] for s in slopes},
        "sup_y_strictly_decreasing": bool(
            np.all(np.diff([r["mean_sup_y"] for r in rows]) < 0)
        ),
    }


def _kind_exit_times(cfg: ExperimentConfig, run: _Run) -> None:
    pair = _require_pair(cfg, run)
    eps = cfg.eps_list[0]
    sc, ens, sde, _, tau_h = _figures_payload(cfg, pair, eps, cfg.n_paths, cfg.base_seed)
    alive = ens.alive
    horizon = cfg.T
    tau_eps = ens.tau[alive]
    write_csv(
        run.path("tau_eps_samples.csv"),
        ["tau", "censored"],
        [np.where(np.isnan(tau_eps), horizon, tau_eps), np.isnan(tau_eps).astype(int)],
    )
    write_csv(
        run.path("tau_h_samples.csv"),
        ["tau", "censored"],
        [np.where(np.isnan(tau_h), horizon, tau_h), np.isnan(tau_h).astype(int)],
    )
    cdf_e = EmpiricalCdf.from_exit_times(tau_eps, horizon)
    cdf_h = EmpiricalCdf.from_exit_times(tau_h, horizon)
    for name, cdf in (("cdf_tau_eps.csv", cdf_e), ("cdf_tau_h.csv", cdf_h)):
        x, f = cdf.grid()
        write_csv(run.path(name), ["x", "F"], [x, f])
    ks = ks_distance(cdf_e, cdf_h)
    write_csv(
        run.path("ks_summary.csv"),
        ["metric", "value"],
        [np.array(["ks_tau", "H_star", "blown_fraction"], dtype=object),
         np.array([ks, cfg.H_star, ens.blown_fraction])],
    )
    run.derived["exit_times"] = {"eps": eps, "H_star": cfg.H_star, "ks_tau": ks}


_KINDS = {
    "spectral": _kind_spectral,
    "single": _kind_single,
    "couple": _kind_couple,
    "figures": _kind_figures,
    "convergence": _kind_convergence,
    "exit_times": _kind_exit_times,
}


def run_experiment(cfg: ExperimentConfig) -> Path:
    """Run one experiment kind; returns the manifest path."""
    run = _Run(cfg)
    _KINDS[cfg.kind](cfg, run)
    return run.write_manifest()
