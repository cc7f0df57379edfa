import numpy as np
import pytest

from sddehopf.functionals import NonlinearitySpec, point_delay
from sddehopf.reduced import (
    build_transient,
    coupled_run,
    simulate_zhat,
    simulate_ztilde,
    stopping_diagnostics,
)
from sddehopf.sdde import AdditiveNoise, MultiplicativeNoise, SddeConfig
from sddehopf.spectral import critical_pair
from sddehopf.wiener import WienerPath

PI2 = np.pi / 2
L0 = point_delay(-PI2, -1.0)


@pytest.fixture(scope="module")
def pair():
    return critical_pair(L0)


def make_cfg(eps=0.2, T=0.5, h_fast=1e-3, sigma=1.0, gamma_c=0.0, xi=None, L1=None):
    dt = eps * eps * h_fast
    m = round(eps * eps * 1.0 / dt)
    dt = eps * eps * 1.0 / m
    noise = MultiplicativeNoise(L1) if L1 is not None else AdditiveNoise(sigma)
    g = NonlinearitySpec(nu3=point_delay(gamma_c, -1.0)) if gamma_c else NonlinearitySpec.zero()
    return SddeConfig(
        L0=L0, G=g, noise=noise, eps=eps, T=T, dt=dt,
        xi=xi if xi is not None else (lambda th: np.cos(PI2 * th) + 0.5),
    )


def test_zero_rhs_keeps_zhat_constant(pair):
    cfg = make_cfg(sigma=0.0)
    tr = build_transient(cfg, pair, fit=False)
    z = simulate_zhat(cfg, pair, tr, WienerPath(1, cfg.dt))
    assert np.all(z == z[0])


def test_zhat_equals_ztilde_when_stable_part_vanishes(pair):
    cfg = make_cfg(xi=lambda th: 1.2 * np.cos(PI2 * th))
    tr = build_transient(cfg, pair, fit=False)
    assert tr.is_zero
    w = WienerPath(17, cfg.dt)
    zh = simulate_zhat(cfg, pair, tr, w)
    zt = simulate_ztilde(cfg, pair, w)
    assert np.array_equal(zh, zt)


def test_beta_vanishes_exactly_without_stable_part(pair):
    cfg = make_cfg(xi=lambda th: 1.2 * np.cos(PI2 * th))
    run = coupled_run(cfg, pair, WienerPath(23, cfg.dt))
    assert run.sup_beta == 0.0


def test_coupled_noise_free_critical_plane_diagnostics_small(pair):
    # continuum limit: all three processes coincide; residuals are the
    # dt/eps^2 discretisation floor
    cfg = make_cfg(sigma=0.0, xi=lambda th: 1.2 * np.cos(PI2 * th))
    run = coupled_run(cfg, pair, WienerPath(2, cfg.dt))
    assert run.sup_beta == 0.0
    assert run.sup_alpha < 2e-4
    assert run.sup_y < 5e-3
    assert run.sup_err_hat < 1e-2
    assert run.sup_err_tilde < 1e-2


def test_frame_consistency(pair):
    # H from the rotating-frame coordinates equals H from the projection
    cfg = make_cfg()
    run = coupled_run(cfg, pair, WienerPath(5, cfg.dt))
    dphi = pair.omega_c * cfg.dt / cfg.eps**2
    for q, t in enumerate(run.t_ck):
        i = round(t / cfg.dt)
        z = run.z_ck[q]
        mz = pair.rotate(-(i * dphi) / pair.omega_c, z)  # e^{-tB} z
        assert 0.5 * (mz @ mz) == pytest.approx(run.H[q], abs=1e-10)


def test_increment_accounting(pair):
    cfg = make_cfg()
    run = coupled_run(cfg, pair, WienerPath(5, cfg.dt))
    n = cfg.n_steps
    assert run.increments_consumed == (n, n, n)


def test_transient_decay_envelope(pair):
    cfg = make_cfg(xi=lambda th: np.cos(PI2 * th) + 0.5)
    tr = build_transient(cfg, pair)
    assert not tr.is_zero and tr.kappa is not None and tr.kappa > 0
    y0_norm = tr.y0.sup_norm()
    for t in np.linspace(0.0, cfg.T, 30):
        u = t / cfg.eps**2
        bound = tr.K * y0_norm * np.exp(-tr.kappa * u)
        # 1e-6 relative slack: the tabulated transient carries the method-of-
        # steps error floor, which the clean-window envelope fit sits below
        assert tr.segment_norm(u, cfg.r) <= bound * (1 + 1e-6) + 1e-6 * y0_norm


def test_stopping_diagnostics_infinite_threshold(pair):
    cfg = make_cfg()
    run = coupled_run(cfg, pair, WienerPath(9, cfg.dt))
    rep = stopping_diagnostics(run, np.inf)
    assert not rep.stopped
    assert rep.e_eps == pytest.approx(run.t_ck[-1])
    assert rep.sup_y_stopped == pytest.approx(run.sup_y)
    assert rep.sup_alpha_stopped == pytest.approx(run.sup_alpha)
    assert rep.event_E


def test_stopping_diagnostics_first_crossing(pair):
    cfg = make_cfg()
    run = coupled_run(cfg, pair, WienerPath(9, cfg.dt))
    c_e = 0.5 * (np.min(run.phi_z_norm) + np.max(run.phi_z_norm))
    rep = stopping_diagnostics(run, c_e)
    first = np.nonzero(run.phi_z_norm >= c_e)[0][0]
    assert rep.stopped
    assert rep.e_eps == pytest.approx(run.t_ck[first])
    assert rep.sup_alpha_stopped == pytest.approx(np.max(run.alpha[: first + 1]))
    assert rep.event_E == (np.max(run.phi_zhat_norm) < 0.99 * c_e)


def test_zhat_mean_amplitude_growth_multiplicative(pair):
    # section-2.1 oracle: for G = 0 the averaged equation is geometric with
    # C2 = 0.5 ||psi||^2 ||L1 Phi||^2; the reduced ensemble mean follows it
    c = 0.5
    cfg = make_cfg(eps=0.3, T=0.5, h_fast=2e-3, L1=point_delay(c, -1.0),
                   xi=lambda th: 1.2 * np.cos(PI2 * th))
    l1phi = np.array([
        cfg.noise.L1.apply_to_callable(lambda th: np.cos(PI2 * th)),
        cfg.noise.L1.apply_to_callable(lambda th: np.sin(PI2 * th)),
    ])
    c2 = 0.5 * float(pair.psi_tilde @ pair.psi_tilde) * float(l1phi @ l1phi)
    h_end = []
    for seed in range(300):
        z = simulate_ztilde(cfg, pair, WienerPath(4000 + seed, cfg.dt))
        h_end.append(0.5 * (z[-1] @ z[-1]))
    h0 = 0.5 * 1.2**2
    assert np.mean(h_end) == pytest.approx(h0 * np.exp(c2 * cfg.T), rel=0.1)


def test_ztilde_statistics_bounded_uniformly_in_eps(pair):
    # Lipschitz coefficients: E sup ||ztilde||^2 stays O(1) along eps
    means = []
    for eps in (0.3, 0.15):
        cfg = make_cfg(eps=eps, T=0.5, h_fast=2e-3, L1=point_delay(0.5, -1.0),
                       xi=lambda th: 1.2 * np.cos(PI2 * th))
        sups = []
        for seed in range(40):
            z = simulate_ztilde(cfg, pair, WienerPath(900 + seed, cfg.dt))
            sups.append(np.max(np.sum(z * z, axis=1)))
        means.append(np.mean(sups))
    assert means[1] < 2.0 * means[0] + 1.0
