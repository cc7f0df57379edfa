import numpy as np
import pytest

from sddehopf.functionals import LinearFunctionalSpec, NonlinearitySpec, point_delay
from sddehopf.sdde import (
    AdditiveNoise,
    MultiplicativeNoise,
    SddeConfig,
    StiffStep,
    project_trajectory,
    simulate_sdde,
)
from sddehopf.spectral import critical_pair
from sddehopf.wiener import WienerPath

PI2 = np.pi / 2
L0 = point_delay(-PI2, -1.0)


@pytest.fixture(scope="module")
def pair():
    return critical_pair(L0)


def make_cfg(eps=0.2, T=0.5, h_fast=1e-3, sigma=1.0, gamma_c=0.0, xi=None, L1=None, guard=1e6):
    dt = eps * eps * h_fast
    m = round(eps * eps * 1.0 / dt)
    dt = eps * eps * 1.0 / m
    noise = MultiplicativeNoise(L1) if L1 is not None else AdditiveNoise(sigma)
    g = NonlinearitySpec(nu3=point_delay(gamma_c, -1.0)) if gamma_c else NonlinearitySpec.zero()
    return SddeConfig(
        L0=L0,
        G=g,
        noise=noise,
        eps=eps,
        T=T,
        dt=dt,
        xi=xi if xi is not None else (lambda th: 1.2 * np.cos(PI2 * th)),
        overflow_guard=guard,
    )


def test_config_rejects_non_dividing_dt():
    with pytest.raises(ValueError):
        SddeConfig(
            L0=L0, G=NonlinearitySpec.zero(), noise=AdditiveNoise(1.0),
            eps=0.2, T=1.0, dt=0.04 * 0.00031, xi=lambda th: 0.0,
        )


def test_config_rejects_stiff_step():
    with pytest.raises(StiffStep):
        SddeConfig(
            L0=L0, G=NonlinearitySpec.zero(), noise=AdditiveNoise(1.0),
            eps=0.2, T=1.0, dt=0.04 / 10,  # h_fast = 0.1 > 0.1 / ||L0||
            xi=lambda th: 0.0,
        )


def test_config_rejects_cubic_with_multiplicative_noise():
    with pytest.raises(ValueError):
        make_cfg(gamma_c=1.0, L1=point_delay(0.5, -1.0))


def test_config_rejects_zero_l0():
    with pytest.raises(ValueError):
        SddeConfig(
            L0=LinearFunctionalSpec.zero(1.0), G=NonlinearitySpec.zero(),
            noise=AdditiveNoise(1.0), eps=0.2, T=1.0, dt=0.0004, xi=lambda th: 0.0,
        )


def test_zero_everything_stays_zero():
    cfg = make_cfg(sigma=0.0, xi=lambda th: 0.0)
    res = simulate_sdde(cfg, WienerPath(1, cfg.dt))
    assert np.all(res.x == 0.0)
    assert res.blowup is None


def test_reproducibility_bitwise():
    cfg = make_cfg()
    a = simulate_sdde(cfg, WienerPath(31, cfg.dt))
    b = simulate_sdde(cfg, WienerPath(31, cfg.dt))
    assert np.array_equal(a.x, b.x)


def test_unperturbed_critical_rotation(pair):
    # sigma = 0, G = 0, xi on the critical plane: X tracks cos(w t / eps^2)
    # with amplitude drift bounded by C * (dt / eps^2) * T
    drifts = []
    for h_fast in (2e-3, 1e-3):
        cfg = make_cfg(eps=0.2, T=0.5, h_fast=h_fast, sigma=0.0)
        res = simulate_sdde(cfg, WienerPath(1, cfg.dt))
        t, x = res.trajectory()
        ref = 1.2 * np.cos(PI2 * t / cfg.eps**2)
        proj = project_trajectory(res, pair)
        drifts.append(abs(proj.H[-1] - proj.H[0]) / proj.H[0])
        # pointwise tracking: phase error grows ~ t * dt; allow a loose band
        assert np.max(np.abs(x - ref)) < 0.15
    # amplitude drift scales linearly with dt
    assert drifts[0] / drifts[1] == pytest.approx(2.0, rel=0.25)


def test_noise_free_H_conservation_scaling(pair):
    # |H_T - H_0| <= C dt / eps^2 with C fitted over a refinement ladder
    errs = []
    hs = [4e-3, 2e-3, 1e-3]
    for h_fast in hs:
        cfg = make_cfg(eps=0.2, T=0.25, h_fast=h_fast, sigma=0.0)
        res = simulate_sdde(cfg, WienerPath(1, cfg.dt))
        proj = project_trajectory(res, pair)
        errs.append(abs(proj.H[-1] - proj.H[0]))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 0.7 < slope < 1.3
    c_fit = max(e / h for e, h in zip(errs, hs))
    assert all(e <= c_fit * h * (1 + 1e-9) for e, h in zip(errs, hs))


def test_self_convergence_order_one_additive():
    # strong order 1 for additive noise: sup |X(dt) - X(dt/2)| halves per level
    diffs = []
    for h_fast in (4e-3, 2e-3, 1e-3):
        cfg_f = make_cfg(eps=0.2, T=0.25, h_fast=h_fast / 2)
        cfg_c = make_cfg(eps=0.2, T=0.25, h_fast=h_fast)
        errs = []
        for seed in range(10):
            fine = WienerPath(100 + seed, cfg_f.dt)
            xf = simulate_sdde(cfg_f, fine).x
            xc = simulate_sdde(cfg_c, fine.coarsen()).x
            mf, mc = cfg_f.m_hist, cfg_c.m_hist
            errs.append(np.max(np.abs(xf[mf::2] - xc[mc:])))
        diffs.append(np.mean(errs))
    slope = np.polyfit(np.log([4e-3, 2e-3, 1e-3]), np.log(diffs), 1)[0]
    assert 0.6 < slope < 1.6


def test_blowup_is_data_not_crash():
    # destabilising cubic, no noise, large amplitude: finite-time escape
    cfg = make_cfg(T=2.0, sigma=0.0, gamma_c=-1.0, xi=lambda th: 3.0 * np.cos(PI2 * th), guard=1e3)
    res = simulate_sdde(cfg, WienerPath(5, cfg.dt))
    assert res.blowup is not None
    assert res.blowup.time < 2.0
    assert np.all(np.isfinite(res.x))


def test_project_trajectory_critical_plane_stays_clean(pair):
    cfg = make_cfg(eps=0.2, T=0.25, sigma=0.0)
    res = simulate_sdde(cfg, WienerPath(1, cfg.dt))
    proj = project_trajectory(res, pair)
    assert np.max(proj.y_norm) < 5e-3  # O(dt/eps^2) discretisation floor
    assert np.allclose(proj.H, 0.5 * np.sum(proj.z**2, axis=1))


def test_multiplicative_mean_amplitude_growth(pair):
    # L1 = c delta_0, G = 0: E H_t follows the averaged geometric growth
    # e^{C2 t} with C2 = 0.5 ||psi||^2 c^2 (reference oracle: averaged eq.)
    from sddehopf.ensemble import run_full_ensemble

    c = 0.5
    cfg = make_cfg(eps=0.2, T=0.5, h_fast=1e-3, L1=point_delay(c, 0.0, max_delay=1.0))
    ens = run_full_ensemble(cfg, 600, 2026, pair=pair)
    h0 = 0.5 * 1.2**2
    c2 = 0.5 * float(pair.psi_tilde @ pair.psi_tilde) * c * c
    expected = h0 * np.exp(c2 * cfg.T)
    assert np.mean(ens.H_T) == pytest.approx(expected, rel=0.08)
