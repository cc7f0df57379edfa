import json
from pathlib import Path

import numpy as np

from sddehopf.cli import main

PI2 = 1.5707963267948966


def base_config(kind, out, **overrides):
    cfg = {
        "experiment": kind,
        "system": {
            "max_delay": 1.0,
            "L0": {"point_masses": [[-1.0, -PI2]]},
            "G": {"nu3": {"point_masses": [[-1.0, 1.0]]}},
            "noise": {"kind": "additive", "sigma": 1.0},
            "xi": {"kind": "critical_cos", "sqrt_2h": 1.2},
        },
        "numerics": {
            "eps": [0.2],
            "T": 0.5,
            "dt_rule": {"kind": "fast_step", "h": 1e-3},
            "h0_dt": 1e-3,
        },
        "ensemble": {"n_paths": 40, "base_seed": 77, "h0_paths": 2000},
        "thresholds": {"C_e": 3.0, "H_star": 1.5},
        "out_dir": str(out),
    }
    for k, v in overrides.items():
        cfg[k] = v
    return cfg


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def manifest_of(out):
    return json.loads((Path(out) / "manifest.json").read_text())


def test_config_error_bad_kind(tmp_path):
    p = write_cfg(tmp_path, base_config("spectral", tmp_path / "o") | {"experiment": "nope"})
    assert main(["spectral", "--config", p]) == 2


def test_config_error_missing_system(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"experiment": "spectral"}))
    assert main(["spectral", "--config", str(p), "--out", str(tmp_path / "o")]) == 2


def test_spectral_runs_on_subcritical_system(tmp_path):
    cfg = base_config("spectral", tmp_path / "o")
    cfg["system"]["L0"] = {"point_masses": [[-1.0, -1.0]]}
    p = write_cfg(tmp_path, cfg)
    assert main(["spectral", "--config", p]) == 0
    man = manifest_of(tmp_path / "o")
    assert man["derived"]["criticality"]["is_critical"] is False
    assert "roots.csv" in man["outputs"]


def test_reduction_kind_gated_by_criticality(tmp_path):
    cfg = base_config("couple", tmp_path / "o")
    cfg["system"]["L0"] = {"point_masses": [[-1.0, -1.0]]}
    p = write_cfg(tmp_path, cfg)
    assert main(["couple", "--config", p]) == 3
    err = json.loads((tmp_path / "o" / "error.json").read_text())
    assert err["error"] == "NotCritical"


def test_figures_outputs_and_determinism(tmp_path):
    cfg = base_config("figures", tmp_path / "a")
    p = write_cfg(tmp_path, cfg)
    assert main(["figures", "--config", p]) == 0
    man = manifest_of(tmp_path / "a")
    for f in (
        "h_eps_samples.csv",
        "h0_samples.csv",
        "tau_eps_samples.csv",
        "tau_h_samples.csv",
        "cdf_h_eps.csv",
        "cdf_h0.csv",
        "cdf_tau_eps.csv",
        "cdf_tau_h.csv",
        "ks_summary.csv",
        "amplitude_sde.csv",
    ):
        assert f in man["outputs"]
        assert (tmp_path / "a" / f).exists()
    # no orphan writes
    on_disk = {q.name for q in (tmp_path / "a").iterdir()}
    assert on_disk == set(man["outputs"]) | {"manifest.json"}

    assert main(["figures", "--config", p, "--out", str(tmp_path / "b")]) == 0
    for f in man["outputs"]:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_single_kind_writes_trajectory(tmp_path):
    cfg = base_config("single", tmp_path / "o")
    p = write_cfg(tmp_path, cfg)
    assert main(["single", "--config", p]) == 0
    rows = (tmp_path / "o" / "trajectory.csv").read_text().splitlines()
    assert rows[0] == "t,x"
    assert len(rows) > 1000
    proj = (tmp_path / "o" / "projection.csv").read_text().splitlines()
    assert proj[0] == "t,z1,z2,y_norm,H"


def test_convergence_kind_slope_files(tmp_path):
    cfg = base_config("convergence", tmp_path / "o")
    cfg["system"]["G"] = {}
    cfg["system"]["noise"] = {"kind": "multiplicative", "L1": {"point_masses": [[-1.0, 0.5]]}}
    cfg["system"]["xi"] = {"kind": "cos_plus_const", "cos_amp": 1.0, "const": 0.5}
    cfg["numerics"]["eps"] = [0.4, 0.3, 0.2]
    cfg["ensemble"]["n_paths"] = 12
    p = write_cfg(tmp_path, cfg)
    assert main(["convergence", "--config", p]) == 0
    rows = (tmp_path / "o" / "ensemble_summary.csv").read_text().splitlines()
    assert rows[0].startswith("eps,n_paths,dt,mean_sup_alpha_sq")
    assert len(rows) == 4
    slopes = (tmp_path / "o" / "slopes.csv").read_text().splitlines()
    assert slopes[0] == "metric,slope,intercept,r_squared"


def test_exit_times_kind(tmp_path):
    cfg = base_config("exit_times", tmp_path / "o")
    p = write_cfg(tmp_path, cfg)
    assert main(["exit_times", "--config", p]) == 0
    man = manifest_of(tmp_path / "o")
    assert "cdf_tau_eps.csv" in man["outputs"]
    assert man["derived"]["exit_times"]["ks_tau"] >= 0.0


def test_seed_override_changes_samples(tmp_path):
    cfg = base_config("figures", tmp_path / "a")
    p = write_cfg(tmp_path, cfg)
    assert main(["figures", "--config", p]) == 0
    assert main(["figures", "--config", p, "--out", str(tmp_path / "b"), "--seed", "123"]) == 0
    a = (tmp_path / "a" / "h_eps_samples.csv").read_text()
    b = (tmp_path / "b" / "h_eps_samples.csv").read_text()
    assert a != b


def test_sampled_initial_amplitude_switch(tmp_path):
    cfg = base_config("figures", tmp_path / "o")
    cfg["system"]["xi"] = {
        "kind": "critical_cos", "sqrt_2h": 1.2,
        "sample_h": True, "h_lo": 0.1, "h_hi": 1.0,
    }
    p = write_cfg(tmp_path, cfg)
    assert main(["figures", "--config", p]) == 0
    h = np.loadtxt(tmp_path / "o" / "h_eps_samples.csv", skiprows=1)
    # sampled initial amplitudes spread the terminal distribution visibly
    assert np.std(h) > 0.05
