"""Vectorised, seeded ensemble drivers.

Path i of an ensemble consumes the increment stream of WienerPath(seed + i),
so any path can be reproduced in isolation with the single-path reference
integrators; a test asserts bit-identical trajectories.  Wiener increments
are streamed in blocks through the numba kernels; per-path state lives in
flat arrays.

Thread fan-out splits the path range into contiguous chunks (the kernels
release the GIL); the merge is a no-op because every chunk writes disjoint
slices of preallocated outputs, so results are independent of thread count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .sdde import MultiplicativeNoise, SddeConfig, _atom_lags, checkpoint_stride
from .spectral import CriticalPair, projection_weights
from .reduced import StableTransient, build_transient

__all__ = [
    "FullEnsembleResult",
    "run_full_ensemble",
    "CoupledEnsembleResult",
    "run_coupled_ensemble",
    "default_threads",
]

_BLOCK_STEPS = 2048


def default_threads() -> int:
    env = os.environ.get("SDDEHOPF_THREADS")
    if env:
        return max(1, int(env))
    return 1


def _noise_arrays(cfg: SddeConfig):
    if isinstance(cfg.noise, MultiplicativeNoise):
        lL = _atom_lags(cfg.noise.L1, cfg.eps, cfg.dt)
        return lL, 0.0, True
    empty = (np.empty(0, np.int64), np.empty(0), np.empty(0))
    return empty, float(cfg.noise.sigma), False


def _chunks(n_paths: int, threads: int) -> list[tuple[int, int]]:
    threads = max(1, min(threads, n_paths))
    edges = np.linspace(0, n_paths, threads + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


@dataclass
class FullEnsembleResult:
    """Terminal state and path statistics of a full-system ensemble."""

    cfg: SddeConfig
    base_seed: int
    x_T: np.ndarray
    sup_abs: np.ndarray
    tau: np.ndarray          # NaN where |X| never reached the threshold
    blow_step: np.ndarray    # -1 where the path stayed finite
    z_T: np.ndarray | None = None
    H_T: np.ndarray | None = None

    @property
    def alive(self) -> np.ndarray:
        return self.blow_step < 0

    @property
    def blown_fraction(self) -> float:
        return float(np.mean(~self.alive))


def run_full_ensemble(
    cfg: SddeConfig,
    n_paths: int,
    base_seed: int,
    pair: CriticalPair | None = None,
    threshold: float = 0.0,
    block: int = _BLOCK_STEPS,
    threads: int | None = None,
    xi_scales: np.ndarray | None = None,
) -> FullEnsembleResult:
    """Integrate n_paths independent copies of the full SDDE.

    With ``pair`` the terminal segments are projected to critical
    coordinates (z_T, H_T); with ``threshold`` > 0 the first time |X|
    reaches it is recorded per path (linear interpolation inside the step).
    ``xi_scales`` multiplies the shared initial segment per path (the
    sampled-initial-amplitude switch).
    """
    if threads is None:
        threads = default_threads()
    m, n = cfg.m_hist, cfg.n_steps
    hist = cfg.history_samples()
    if xi_scales is not None and len(xi_scales) != n_paths:
        raise ValueError("xi_scales must have one entry per path")
    l0 = _atom_lags(cfg.L0, cfg.eps, cfg.dt)
    n1 = _atom_lags(cfg.G.nu1, cfg.eps, cfg.dt)
    n3 = _atom_lags(cfg.G.nu3, cfg.eps, cfg.dt)
    lL, sigma, mult = _noise_arrays(cfg)
    inv_eps2 = 1.0 / (cfg.eps * cfg.eps)
    sdt = np.sqrt(cfg.dt)

    x = np.empty(n_paths)
    sup_abs = np.empty(n_paths)
    tau = np.full(n_paths, np.nan)
    blow_step = np.full(n_paths, -1, np.int64)
    seg_T = np.empty((m + 1, n_paths))

    def work(a: int, b: int) -> None:
        nn = b - a
        ring = np.empty((m + 1, nn))
        ring[:] = hist[:, None]
        if xi_scales is not None:
            ring *= xi_scales[None, a:b]
        xs = ring[m].copy()
        al = np.ones(nn, np.bool_)
        bs = np.full(nn, -1, np.int64)
        sa = np.abs(xs)
        ta = np.full(nn, np.nan)
        if threshold > 0.0:
            ta[np.abs(xs) >= threshold] = 0.0
        gens = [np.random.Generator(np.random.PCG64(base_seed + i)) for i in range(a, b)]
        g = m
        done = 0
        dW = np.empty((block, nn))
        while done < n:
            nb = min(block, n - done)
            for j, gen in enumerate(gens):
                dW[:nb, j] = gen.standard_normal(nb)
            dW[:nb] *= sdt
            _kernels.full_block(
                ring, xs, al, bs, sa, ta, g, nb, dW[:nb], m,
                l0[0], l0[1], l0[2], n1[0], n1[1], n1[2], n3[0], n3[1], n3[2],
                lL[0], lL[1], lL[2], sigma, mult,
                inv_eps2, cfg.dt, cfg.overflow_guard, threshold,
            )
            g += nb
            done += nb
        x[a:b] = xs
        sup_abs[a:b] = sa
        tau[a:b] = ta
        blow_step[a:b] = bs
        rows = (np.arange(g - m, g + 1)) % (m + 1)
        seg_T[:, a:b] = ring[rows]

    parts = _chunks(n_paths, threads)
    if len(parts) == 1:
        work(*parts[0])
    else:
        with ThreadPoolExecutor(max_workers=len(parts)) as ex:
            list(ex.map(lambda ab: work(*ab), parts))

    res = FullEnsembleResult(
        cfg=cfg, base_seed=base_seed, x_T=x, sup_abs=sup_abs, tau=tau, blow_step=blow_step
    )
    if pair is not None:
        a_w, _ = projection_weights(cfg.theta_grid(), cfg.L0, pair)
        z = (a_w @ seg_T).T
        z[~res.alive] = np.nan
        res.z_T = z
        res.H_T = 0.5 * np.sum(z * z, axis=1)
    return res


@dataclass
class CoupledEnsembleResult:
    """Per-path diagnostics of full + zhat + ztilde on shared increments.

    Checkpoint arrays have shape (n_ck, n_paths); running suprema are per
    path over every step.  NaN marks blown paths from the blow step on.
    """

    cfg: SddeConfig
    pair: CriticalPair
    base_seed: int
    t_ck: np.ndarray
    z_ck: np.ndarray        # (n_ck, 2, n_paths)
    alpha: np.ndarray
    y_norm: np.ndarray
    phi_z_norm: np.ndarray
    phi_zhat_norm: np.ndarray
    sup_beta: np.ndarray
    sup_err_hat: np.ndarray
    sup_err_tilde: np.ndarray
    sup_abs: np.ndarray
    blow_step: np.ndarray
    blow_comp: np.ndarray
    zhat_T: np.ndarray
    ztilde_T: np.ndarray

    @property
    def alive(self) -> np.ndarray:
        return self.blow_step < 0

    @property
    def blown_fraction(self) -> float:
        return float(np.mean(~self.alive))

    @property
    def H(self) -> np.ndarray:
        return 0.5 * (self.z_ck[:, 0, :] ** 2 + self.z_ck[:, 1, :] ** 2)

    @property
    def sup_alpha(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.nanmax(self.alpha, axis=0)

    @property
    def sup_y(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.nanmax(self.y_norm, axis=0)

    def stopping(self, C_e: float):
        """Vectorised stopping-time diagnostics (see reduced.stopping_diagnostics)."""
        n_ck, n_paths = self.phi_z_norm.shape
        crossed = self.phi_z_norm >= C_e
        first = np.where(crossed.any(axis=0), crossed.argmax(axis=0), n_ck - 1)
        e_eps = self.t_ck[first]
        sup_y_st = np.empty(n_paths)
        sup_a_st = np.empty(n_paths)
        for p in range(n_paths):
            sl = slice(0, first[p] + 1)
            sup_y_st[p] = np.nanmax(self.y_norm[sl, p])
            sup_a_st[p] = np.nanmax(self.alpha[sl, p])
        with np.errstate(invalid="ignore"):
            event = np.nanmax(self.phi_zhat_norm, axis=0) < 0.99 * C_e
        return e_eps, sup_y_st, sup_a_st, event


def run_coupled_ensemble(
    cfg: SddeConfig,
    pair: CriticalPair,
    n_paths: int,
    base_seed: int,
    transient: StableTransient | None = None,
    per_period: int = 8,
    block: int = _BLOCK_STEPS,
    threads: int | None = None,
) -> CoupledEnsembleResult:
    if threads is None:
        threads = default_threads()
    m, n = cfg.m_hist, cfg.n_steps
    stride = checkpoint_stride(cfg, pair, per_period)
    n_ck = n // stride + 1  # a non-dividing tail simply has no checkpoint
    hist = cfg.history_samples()
    theta = cfg.theta_grid()
    a_w, phi_mat = projection_weights(theta, cfg.L0, pair)
    z0 = a_w @ hist
    if transient is None:
        transient = build_transient(cfg, pair, fit=False)

    l0 = _atom_lags(cfg.L0, cfg.eps, cfg.dt)
    n1 = _atom_lags(cfg.G.nu1, cfg.eps, cfg.dt)
    n3 = _atom_lags(cfg.G.nu3, cfg.eps, cfg.dt)
    lL, sigma, mult = _noise_arrays(cfg)
    omega = pair.omega_c

    def phase_of(spec):
        if spec is None:
            return np.empty(0)
        return omega * spec.atoms()[0]

    d1 = phase_of(cfg.G.nu1)
    d3 = phase_of(cfg.G.nu3)
    dL = phase_of(cfg.noise.L1) if mult else np.empty(0)

    y_n1 = transient.atom_table(cfg.G.nu1.atoms()[0] if cfg.G.nu1 else np.empty(0), n, cfg.dt, cfg.eps)
    y_n3 = transient.atom_table(cfg.G.nu3.atoms()[0] if cfg.G.nu3 else np.empty(0), n, cfg.dt, cfg.eps)
    y_l1 = transient.atom_table(cfg.noise.L1.atoms()[0] if mult else np.empty(0), n, cfg.dt, cfg.eps)
    y0_tab = transient.value0_table(n, cfg.dt, cfg.eps)
    t_ck = np.arange(n_ck) * stride * cfg.dt
    y_grid = transient.grid_table(t_ck, theta, cfg.eps)

    psi1, psi2 = float(pair.psi_tilde[0]), float(pair.psi_tilde[1])
    dphi = omega * cfg.dt / cfg.eps**2
    inv_eps2 = 1.0 / (cfg.eps * cfg.eps)
    sdt = np.sqrt(cfg.dt)
    phi10 = np.ascontiguousarray(phi_mat[:, 0])
    phi20 = np.ascontiguousarray(phi_mat[:, 1])
    a1 = np.ascontiguousarray(a_w[0])
    a2 = np.ascontiguousarray(a_w[1])

    z_ck = np.empty((n_ck, 2, n_paths))
    alpha = np.empty((n_ck, n_paths))
    y_norm = np.empty((n_ck, n_paths))
    phi_z = np.empty((n_ck, n_paths))
    phi_zh = np.empty((n_ck, n_paths))
    sup_beta = np.zeros(n_paths)
    sup_errh = np.zeros(n_paths)
    sup_errt = np.zeros(n_paths)
    sup_abs = np.empty(n_paths)
    blow_step = np.full(n_paths, -1, np.int64)
    blow_comp = np.zeros(n_paths, np.int8)
    zh_T = np.empty((n_paths, 2))
    zt_T = np.empty((n_paths, 2))

    # checkpoint 0: shared deterministic initial state
    y_g0 = y_grid[0] if y_grid.shape[0] else np.zeros(theta.size)
    y_res0 = hist - phi_mat @ z0
    z_ck[0, 0, :] = z0[0]
    z_ck[0, 1, :] = z0[1]
    alpha[0] = 0.0
    y_norm[0] = np.max(np.abs(y_res0 - y_g0))
    phi_z[0] = np.max(np.abs(phi_mat @ z0))
    phi_zh[0] = phi_z[0]

    def work(a: int, b: int) -> None:
        nn = b - a
        ring = np.empty((m + 1, nn))
        ring[:] = hist[:, None]
        xs = np.full(nn, hist[-1])
        zh1 = np.full(nn, z0[0])
        zh2 = np.full(nn, z0[1])
        zt1 = np.full(nn, z0[0])
        zt2 = np.full(nn, z0[1])
        al = np.ones(nn, np.bool_)
        bs = np.full(nn, -1, np.int64)
        bc = np.zeros(nn, np.int8)
        s_b = np.zeros(nn)
        s_eh = np.zeros(nn)
        s_et = np.zeros(nn)
        s_ab = np.full(nn, abs(hist[-1]))
        ckz1 = np.empty((n_ck, nn))
        ckz2 = np.empty((n_ck, nn))
        cka = np.empty((n_ck, nn))
        cky = np.empty((n_ck, nn))
        ckpz = np.empty((n_ck, nn))
        ckpzh = np.empty((n_ck, nn))
        gens = [np.random.Generator(np.random.PCG64(base_seed + i)) for i in range(a, b)]
        g = m
        done = 0
        dW = np.empty((block, nn))
        while done < n:
            nb = min(block, n - done)
            for j, gen in enumerate(gens):
                dW[:nb, j] = gen.standard_normal(nb)
            dW[:nb] *= sdt
            _kernels.coupled_block(
                ring, xs, zh1, zh2, zt1, zt2, al, bs, bc,
                s_b, s_eh, s_et, s_ab,
                g, nb, dW[:nb], m,
                l0[0], l0[1], l0[2],
                n1[0], n1[1], n1[2], d1,
                n3[0], n3[1], n3[2], d3,
                lL[0], lL[1], lL[2], dL, sigma, mult,
                y_n1, y_n3, y_l1, y0_tab,
                psi1, psi2, dphi, inv_eps2, cfg.dt, cfg.overflow_guard,
                stride, a1, a2, phi10, phi20, y_grid,
                ckz1, ckz2, cka, cky, ckpz, ckpzh,
            )
            g += nb
            done += nb
        z_ck[1:, 0, a:b] = ckz1[1:]
        z_ck[1:, 1, a:b] = ckz2[1:]
        alpha[1:, a:b] = cka[1:]
        y_norm[1:, a:b] = cky[1:]
        phi_z[1:, a:b] = ckpz[1:]
        phi_zh[1:, a:b] = ckpzh[1:]
        sup_beta[a:b] = s_b
        sup_errh[a:b] = s_eh
        sup_errt[a:b] = s_et
        sup_abs[a:b] = s_ab
        blow_step[a:b] = bs
        blow_comp[a:b] = bc
        zh_T[a:b, 0] = zh1
        zh_T[a:b, 1] = zh2
        zt_T[a:b, 0] = zt1
        zt_T[a:b, 1] = zt2

    parts = _chunks(n_paths, threads)
    if len(parts) == 1:
        work(*parts[0])
    else:
        with ThreadPoolExecutor(max_workers=len(parts)) as ex:
            list(ex.map(lambda ab: work(*ab), parts))

    return CoupledEnsembleResult(
        cfg=cfg, pair=pair, base_seed=base_seed,
        t_ck=t_ck, z_ck=z_ck, alpha=alpha, y_norm=y_norm,
        phi_z_norm=phi_z, phi_zhat_norm=phi_zh,
        sup_beta=sup_beta, sup_err_hat=sup_errh, sup_err_tilde=sup_errt,
        sup_abs=sup_abs, blow_step=blow_step, blow_comp=blow_comp,
        zhat_T=zh_T, ztilde_T=zt_T,
    )
