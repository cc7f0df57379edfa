"""Delay-free reduced processes coupled to the full SDDE on one Wiener path.

In the rotating frame z_rot = e^{-tB/eps^2} z the critical coordinates of the
full system satisfy a 2-D equation whose coefficients still see the stable
remainder y.  Two approximations drop it:

* zhat keeps the deterministic stable transient of the initial condition
  (the semigroup image of the stable part of xi, a decaying deterministic
  segment path) in the coefficient arguments;
* ztilde ignores the stable space altogether.

The error diagnostics are alpha = 0.5 |z_rot - zhat|^2 (projection of the
full run against zhat), beta = 0.5 |ztilde - zhat|^2, and the stochastic
stable remainder Y-script = y - transient, measured in sup norm on the
segment grid.

Single-path reference implementations live here (plain loops, mirroring the
ensemble kernels operation for operation); the vectorised drivers are in
``ensemble``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .functionals import LinearFunctionalSpec
from .segment import SegmentBuffer
from .spectral import CriticalPair, fit_decay, integrate_unperturbed, projection_weights
from .sdde import (
    AdditiveNoise,
    BlowupInfo,
    MultiplicativeNoise,
    SddeConfig,
    SddeResult,
    checkpoint_stride,
    simulate_sdde,
)
from .wiener import WienerPath

__all__ = [
    "StableTransient",
    "build_transient",
    "simulate_zhat",
    "simulate_ztilde",
    "CoupledRun",
    "coupled_run",
    "StoppingReport",
    "stopping_diagnostics",
]


@dataclass
class StableTransient:
    """Deterministic decaying image of the stable part of the initial segment.

    ``table`` holds the scalar solution x_Y of the unperturbed equation in
    unscaled time u with history y0; the transient segment at rescaled time t
    is theta -> x_Y(t / eps^2 + theta).  Beyond ``u_cut`` the solution is
    numerically zero and lookups return 0.
    """

    y0: SegmentBuffer
    u: np.ndarray
    x_table: np.ndarray
    u_cut: float
    K: float | None = None
    kappa: float | None = None

    @property
    def is_zero(self) -> bool:
        return self.x_table.size == 0

    def value(self, u) -> np.ndarray:
        """x_Y at unscaled time(s) u; zero beyond the stored range."""
        if self.is_zero:
            return np.zeros_like(np.asarray(u, dtype=float))
        return np.interp(np.asarray(u, dtype=float), self.u, self.x_table, left=0.0, right=0.0)

    def segment_norm(self, u: float, r: float, n: int = 256) -> float:
        """sup-norm of the transient segment at unscaled time u."""
        th = np.linspace(-r, 0.0, n + 1)
        return float(np.max(np.abs(self.value(u + th))))

    def atom_table(self, locs: np.ndarray, n_steps: int, dt: float, eps: float) -> np.ndarray:
        """Transient values at segment atoms, per step: shape (n_active, len(locs)).

        Row i holds x_Y(i dt / eps^2 + theta_k); rows stop once the transient
        has died out (callers treat missing rows as zero).
        """
        if self.is_zero or locs.size == 0:
            return np.zeros((0, max(locs.size, 1)))
        du = dt / eps**2
        n_active = min(n_steps + 1, int(np.ceil((self.u_cut - np.min(locs)) / du)) + 2)
        steps = np.arange(n_active) * du
        out = np.empty((n_active, locs.size))
        for k, th in enumerate(locs):
            out[:, k] = self.value(steps + th)
        return out

    def value0_table(self, n_steps: int, dt: float, eps: float) -> np.ndarray:
        """x_Y(i dt / eps^2) for i = 0..min(n_steps, active); used for the
        reconstruction term transient(0)."""
        if self.is_zero:
            return np.zeros(0)
        du = dt / eps**2
        n_active = min(n_steps + 1, int(np.ceil(self.u_cut / du)) + 2)
        return self.value(np.arange(n_active) * du)

    def grid_table(self, ck_times: np.ndarray, theta: np.ndarray, eps: float) -> np.ndarray:
        """Transient segment on the theta grid at each checkpoint time."""
        if self.is_zero:
            return np.zeros((0, theta.size))
        out = np.empty((ck_times.size, theta.size))
        for i, t in enumerate(ck_times):
            out[i] = self.value(t / eps**2 + theta)
        return out


def build_transient(
    cfg: SddeConfig,
    pair: CriticalPair,
    dt_table: float | None = None,
    fit: bool = True,
) -> StableTransient:
    """Method-of-steps tabulation of the stable transient for cfg.xi."""
    hist = cfg.history_samples()
    theta = cfg.theta_grid()
    a_w, phi_mat = projection_weights(theta, cfg.L0, pair)
    z0 = a_w @ hist
    y0_vals = hist - phi_mat @ z0
    y0 = SegmentBuffer(theta, y0_vals, eps=cfg.eps)
    scale = float(np.max(np.abs(y0_vals)))
    if scale < 1e-14 * max(1.0, float(np.max(np.abs(hist)))):
        return StableTransient(y0=y0, u=np.empty(0), x_table=np.empty(0), u_cut=0.0)

    r = cfg.r
    if dt_table is None:
        dt_table = r / 2000.0
    m_tab = int(round(r / dt_table))
    hist_tab = np.interp(np.linspace(-r, 0.0, m_tab + 1), theta, y0_vals)
    # integrate far enough for ~30 e-folds at the spectral gap rate
    kappa0 = pair.kappa if pair.kappa else 1.0
    u_max = max(5.0 * r, 34.0 / kappa0)
    u, x = integrate_unperturbed(cfg.L0, hist_tab, u_max, dt_table)

    # rolling sup over the trailing r-window gives ||y_u||
    m_win = m_tab
    absx = np.abs(x)
    sup_roll = np.array([np.max(absx[i - m_win : i + 1]) for i in range(m_win, x.size)])
    uu = u[m_win:]
    below = np.nonzero(sup_roll <= 1e-13 * scale)[0]
    u_cut = uu[below[0]] if below.size else uu[-1]

    keep = u <= u_cut + r
    trans = StableTransient(y0=y0, u=u[keep], x_table=x[keep], u_cut=float(u_cut))
    if fit:
        # stay above the Heun floor of the table (~dt_table^2 relative)
        pos = sup_roll > 1e-5 * scale
        try:
            dfit = fit_decay(uu[pos], sup_roll[pos], t0=0.0)
            trans.K = dfit.K / scale
            trans.kappa = dfit.kappa
        except Exception:
            pass
    return trans


# ---------------------------------------------------------------------------
# Single-path reference integrators (rotating frame)
# ---------------------------------------------------------------------------

def _atoms_with_phase(spec: LinearFunctionalSpec | None, omega: float):
    if spec is None:
        return np.empty(0), np.empty(0)
    locs, wts = spec.atoms()
    return omega * locs, wts


def _simulate_reduced(
    cfg: SddeConfig,
    pair: CriticalPair,
    w: WienerPath,
    transient: StableTransient | None,
) -> tuple[np.ndarray, BlowupInfo | None]:
    """Euler-Maruyama for the rotating-frame reduced process.

    With ``transient`` the coefficients see the stable transient (zhat);
    without it they do not (ztilde).  Operation order mirrors the ensemble
    kernel exactly.
    """
    n = cfg.n_steps
    m = cfg.m_hist
    omega = pair.omega_c
    psi1, psi2 = float(pair.psi_tilde[0]), float(pair.psi_tilde[1])
    dphi = omega * cfg.dt / cfg.eps**2
    two_pi = 2.0 * math.pi

    d1, w1 = _atoms_with_phase(cfg.G.nu1, omega)
    d3, w3 = _atoms_with_phase(cfg.G.nu3, omega)
    if isinstance(cfg.noise, MultiplicativeNoise):
        mult = True
        sigma = 0.0
        dl, wl = _atoms_with_phase(cfg.noise.L1, omega)
        locs_l = cfg.noise.L1.atoms()[0]
    else:
        mult = False
        sigma = cfg.noise.sigma
        dl, wl = np.empty(0), np.empty(0)
        locs_l = np.empty(0)

    if transient is not None and not transient.is_zero:
        y_n1 = transient.atom_table(cfg.G.nu1.atoms()[0] if cfg.G.nu1 else np.empty(0), n, cfg.dt, cfg.eps)
        y_n3 = transient.atom_table(cfg.G.nu3.atoms()[0] if cfg.G.nu3 else np.empty(0), n, cfg.dt, cfg.eps)
        y_l1 = transient.atom_table(locs_l, n, cfg.dt, cfg.eps)
        n_y = max(y_n1.shape[0], y_n3.shape[0], y_l1.shape[0])
    else:
        y_n1 = y_n3 = y_l1 = np.zeros((0, 1))
        n_y = 0

    theta = cfg.theta_grid()
    a_w, _ = projection_weights(theta, cfg.L0, pair)
    z0 = a_w @ cfg.history_samples()

    z = np.empty((n + 1, 2))
    z[0] = z0
    dw = w.increments(0, n)[:, 0]
    guard = cfg.overflow_guard
    blow = None
    z1, z2 = float(z0[0]), float(z0[1])
    for i in range(n):
        phi = math.fmod(i * dphi, two_pi)
        c0, s0 = math.cos(phi), math.sin(phi)
        p1 = c0 * psi1 - s0 * psi2
        p2 = s0 * psi1 + c0 * psi2
        gv = 0.0
        for k in range(d1.size):
            yv = y_n1[i, k] if i < y_n1.shape[0] else 0.0
            gv += w1[k] * (math.cos(phi + d1[k]) * z1 + math.sin(phi + d1[k]) * z2 + yv)
        for k in range(d3.size):
            yv = y_n3[i, k] if i < y_n3.shape[0] else 0.0
            v = math.cos(phi + d3[k]) * z1 + math.sin(phi + d3[k]) * z2 + yv
            gv += w3[k] * (v * v * v)
        if mult:
            dv = 0.0
            for k in range(dl.size):
                yv = y_l1[i, k] if i < y_l1.shape[0] else 0.0
                dv += wl[k] * (math.cos(phi + dl[k]) * z1 + math.sin(phi + dl[k]) * z2 + yv)
        else:
            dv = sigma
        z1 = z1 + cfg.dt * (p1 * gv) + p1 * dv * dw[i]
        z2 = z2 + cfg.dt * (p2 * gv) + p2 * dv * dw[i]
        z[i + 1, 0] = z1
        z[i + 1, 1] = z2
        if abs(z1) + abs(z2) > guard:
            blow = BlowupInfo(step=i + 1, time=(i + 1) * cfg.dt, component="reduced")
            z = z[: i + 2]
            break
    return z, blow


def simulate_zhat(
    cfg: SddeConfig, pair: CriticalPair, transient: StableTransient, w: WienerPath
) -> np.ndarray:
    """Rotating-frame reduction keeping the deterministic stable transient."""
    z, blow = _simulate_reduced(cfg, pair, w, transient)
    if blow is not None:
        raise OverflowError(f"zhat blew up at step {blow.step}")
    return z


def simulate_ztilde(cfg: SddeConfig, pair: CriticalPair, w: WienerPath) -> np.ndarray:
    """Rotating-frame reduction ignoring the stable space entirely."""
    z, blow = _simulate_reduced(cfg, pair, w, None)
    if blow is not None:
        raise OverflowError(f"ztilde blew up at step {blow.step}")
    return z


# ---------------------------------------------------------------------------
# Coupled run and diagnostics
# ---------------------------------------------------------------------------

@dataclass
class CoupledRun:
    """One Wiener path through the full system and both reductions."""

    cfg: SddeConfig
    pair: CriticalPair
    full: SddeResult
    zhat: np.ndarray    # (n+1, 2), rotating frame
    ztilde: np.ndarray
    t_ck: np.ndarray
    z_ck: np.ndarray    # fixed-frame projection of the full segment, (n_ck, 2)
    alpha: np.ndarray
    beta_ck: np.ndarray
    y_norm: np.ndarray  # sup |Y-script| on the grid
    H: np.ndarray
    phi_z_norm: np.ndarray    # sup-theta |Phi z| (stopping-time observable)
    phi_zhat_norm: np.ndarray
    sup_beta: float
    sup_err_hat: float    # sup_t |X - (Phi(0) e^{tB/eps^2} zhat + transient(0))|
    sup_err_tilde: float
    increments_consumed: tuple[int, int, int]
    blowup: BlowupInfo | None

    @property
    def sup_alpha(self) -> float:
        return float(np.nanmax(self.alpha))

    @property
    def sup_y(self) -> float:
        return float(np.nanmax(self.y_norm))


def coupled_run(
    cfg: SddeConfig,
    pair: CriticalPair,
    w: WienerPath,
    transient: StableTransient | None = None,
    per_period: int = 8,
) -> CoupledRun:
    """Drive the full SDDE, zhat and ztilde with the same increments.

    All three consume exactly cfg.n_steps increments of ``w`` (the path
    object caches its stream, so reuse is exact).  Projections of the full
    trajectory happen every checkpoint; beta and the reconstruction errors
    are tracked at every step.
    """
    if transient is None:
        transient = build_transient(cfg, pair, fit=False)
    full = simulate_sdde(cfg, w)
    zh, blow_h = _simulate_reduced(cfg, pair, w, transient)
    zt, blow_t = _simulate_reduced(cfg, pair, w, None)
    n = cfg.n_steps
    blow = full.blowup
    if blow is None and blow_h is not None:
        blow = BlowupInfo(blow_h.step, blow_h.time, "zhat")
    if blow is None and blow_t is not None:
        blow = BlowupInfo(blow_t.step, blow_t.time, "ztilde")

    m = cfg.m_hist
    omega = pair.omega_c
    dphi = omega * cfg.dt / cfg.eps**2
    two_pi = 2.0 * math.pi
    theta = cfg.theta_grid()
    a_w, phi_mat = projection_weights(theta, cfg.L0, pair)

    n_ok = min(full.x.size - m - 1, zh.shape[0] - 1, zt.shape[0] - 1)
    stride = checkpoint_stride(cfg, pair, per_period)
    idx = np.arange(0, n_ok + 1, stride)
    t_ck = idx * cfg.dt
    y_grid = transient.grid_table(t_ck, theta, cfg.eps)

    z_ck = np.empty((idx.size, 2))
    alpha = np.empty(idx.size)
    y_norm = np.empty(idx.size)
    phi_z = np.empty(idx.size)
    phi_zh = np.empty(idx.size)
    for q, i in enumerate(idx):
        seg = full.x[i : i + m + 1]
        z = a_w @ seg
        z_ck[q] = z
        phi = math.fmod(i * dphi, two_pi)
        c, s = math.cos(phi), math.sin(phi)
        mz1 = c * z[0] - s * z[1]
        mz2 = s * z[0] + c * z[1]
        alpha[q] = 0.5 * ((mz1 - zh[i, 0]) ** 2 + (mz2 - zh[i, 1]) ** 2)
        yg = y_grid[q] if y_grid.shape[0] else 0.0
        y_norm[q] = np.max(np.abs(seg - phi_mat @ z - yg))
        phi_z[q] = np.max(np.abs(phi_mat @ z))
        u = np.array([c * zh[i, 0] + s * zh[i, 1], -s * zh[i, 0] + c * zh[i, 1]])
        phi_zh[q] = np.max(np.abs(phi_mat @ u))

    beta_full = 0.5 * np.sum((zt[: n_ok + 1] - zh[: n_ok + 1]) ** 2, axis=1)
    y0_tab = transient.value0_table(n, cfg.dt, cfg.eps)
    steps = np.arange(n_ok + 1)
    phis = np.mod(steps * dphi, two_pi)
    y0v = np.zeros(n_ok + 1)
    k = min(y0_tab.size, n_ok + 1)
    y0v[:k] = y0_tab[:k]
    xs = full.x[m : m + n_ok + 1]
    # both reconstructions carry the deterministic transient's value at 0;
    # ztilde drops the transient from the dynamics only
    rec_h = np.cos(phis) * zh[: n_ok + 1, 0] + np.sin(phis) * zh[: n_ok + 1, 1] + y0v
    rec_t = np.cos(phis) * zt[: n_ok + 1, 0] + np.sin(phis) * zt[: n_ok + 1, 1] + y0v

    return CoupledRun(
        cfg=cfg,
        pair=pair,
        full=full,
        zhat=zh,
        ztilde=zt,
        t_ck=t_ck,
        z_ck=z_ck,
        alpha=alpha,
        beta_ck=beta_full[idx],
        y_norm=y_norm,
        H=0.5 * np.sum(z_ck**2, axis=1),
        phi_z_norm=phi_z,
        phi_zhat_norm=phi_zh,
        sup_beta=float(np.max(beta_full)),
        sup_err_hat=float(np.max(np.abs(xs - rec_h))),
        sup_err_tilde=float(np.max(np.abs(xs - rec_t))),
        increments_consumed=(n, n, n),
        blowup=blow,
    )


@dataclass(frozen=True)
class StoppingReport:
    e_eps: float
    stopped: bool          # whether the threshold was reached before T
    sup_y_stopped: float
    sup_alpha_stopped: float
    event_E: bool          # sup_t ||Phi e^{tB/eps^2} zhat|| < 0.99 C_e


def stopping_diagnostics(run: CoupledRun, C_e: float) -> StoppingReport:
    """Stopping time e_eps = first checkpoint with ||pi segment|| >= C_e,
    the suprema stopped there, and the confinement event for zhat."""
    hit = np.nonzero(run.phi_z_norm >= C_e)[0]
    if hit.size:
        stop_idx = hit[0]
        e_eps = float(run.t_ck[stop_idx])
        stopped = True
    else:
        stop_idx = run.t_ck.size - 1
        e_eps = float(run.t_ck[-1])
        stopped = False
    sl = slice(0, stop_idx + 1)
    return StoppingReport(
        e_eps=e_eps,
        stopped=stopped,
        sup_y_stopped=float(np.max(run.y_norm[sl])),
        sup_alpha_stopped=float(np.max(run.alpha[sl])),
        event_E=bool(np.max(run.phi_zhat_norm) < 0.99 * C_e),
    )
