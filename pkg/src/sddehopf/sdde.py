"""Euler-Maruyama integration of the rescaled SDDE.

Additive form:        dX = eps^-2 L0(seg) dt + G(seg) dt + sigma dW
Multiplicative form:  dX = eps^-2 L0(seg) dt + G(seg) dt + L1(seg) dW

where seg is the rescaled segment theta -> X(t + eps^2 theta).  The drift is
stiff (eps^-2), so the step is validated against a stability rule; accuracy
over long fast-time horizons is the caller's responsibility via the dt rule
(explicit Euler inflates the critical-mode amplitude at a measured rate of
about 0.36 * (dt/eps^2) per unit fast time for the pi/2 point-delay system,
so figure-scale experiments run much finer steps than stability alone
requires).

This module holds the configuration plus a plain single-path reference
integrator; the vectorised ensemble drivers live in ``ensemble``.  Both paths
use the same floating-point operation order, which a test pins down.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functionals import LinearFunctionalSpec, NonlinearitySpec
from .segment import SegmentBuffer
from .spectral import CriticalPair, projection_weights
from .wiener import WienerPath

__all__ = [
    "StiffStep",
    "AdditiveNoise",
    "MultiplicativeNoise",
    "SddeConfig",
    "BlowupInfo",
    "SddeResult",
    "simulate_sdde",
    "ProjectionSeries",
    "project_trajectory",
    "checkpoint_stride",
]

STABILITY_FACTOR = 0.1


class StiffStep(Exception):
    """dt violates the stability bound for the eps^-2 drift."""


@dataclass(frozen=True)
class AdditiveNoise:
    sigma: float


@dataclass(frozen=True)
class MultiplicativeNoise:
    L1: LinearFunctionalSpec


def _atom_lags(spec: LinearFunctionalSpec | None, eps: float, dt: float):
    """Atom lookups as (integer steps back, interpolation fraction, weight).

    The delayed value at continuous lag L steps is
    (1 - a) * x[g - l] + a * x[g - l - 1] with l = floor(L), a = L - l.
    """
    if spec is None:
        return np.empty(0, np.int64), np.empty(0), np.empty(0)
    locs, wts = spec.atoms()
    lag = -locs * eps * eps / dt
    l0 = np.floor(lag + 1e-9).astype(np.int64)
    frac = lag - l0
    frac[frac < 1e-9] = 0.0
    return l0, frac, wts


@dataclass(frozen=True)
class SddeConfig:
    """Full description of one rescaled SDDE problem.

    ``xi`` is the initial segment on [-r, 0] in unscaled theta (a callable or
    a SegmentBuffer); the simulation pre-fills X(t) = xi(t / eps^2) on
    [-eps^2 r, 0] from it.
    """

    L0: LinearFunctionalSpec
    G: NonlinearitySpec
    noise: AdditiveNoise | MultiplicativeNoise
    eps: float
    T: float
    dt: float
    xi: object
    overflow_guard: float = 1e6
    stability_factor: float = STABILITY_FACTOR

    def __post_init__(self):
        if not (0.0 < self.eps < 1.0):
            raise ValueError("eps must lie in (0, 1)")
        if self.T <= 0 or self.dt <= 0:
            raise ValueError("T and dt must be positive")
        if self.L0.is_zero:
            raise ValueError("L0 with zero total variation is degenerate")
        r = self.L0.max_delay
        window = self.eps**2 * r
        m = round(window / self.dt)
        if m < 2 or abs(m * self.dt - window) > 1e-6 * window:
            raise ValueError("dt must divide eps^2 * r (delayed lookups on the grid)")
        bound = self.stability_factor * self.eps**2 / self.L0.total_variation
        if self.dt > bound * (1 + 1e-9):
            raise StiffStep(
                f"dt = {self.dt:.3e} exceeds stability bound {bound:.3e} "
                f"(= {self.stability_factor} * eps^2 / ||L0||)"
            )
        if isinstance(self.noise, MultiplicativeNoise) and self.G.has_cubic:
            raise ValueError(
                "multiplicative noise requires globally Lipschitz G (no cubic part)"
            )

    @property
    def r(self) -> float:
        return self.L0.max_delay

    @property
    def m_hist(self) -> int:
        """History window length in steps: eps^2 r / dt."""
        return round(self.eps**2 * self.r / self.dt)

    @property
    def n_steps(self) -> int:
        return round(self.T / self.dt)

    def xi_fn(self):
        xi = self.xi
        if isinstance(xi, SegmentBuffer):
            return xi.sample
        if callable(xi):
            return xi
        raise TypeError("xi must be a callable theta -> value or a SegmentBuffer")

    def history_samples(self) -> np.ndarray:
        """xi sampled on the simulation theta grid (m_hist + 1 points)."""
        m = self.m_hist
        theta = (np.arange(m + 1) - m) * (self.dt / self.eps**2)
        theta[-1] = 0.0
        theta[0] = -self.r
        fn = self.xi_fn()
        return np.array([fn(th) for th in theta], dtype=float)

    def theta_grid(self) -> np.ndarray:
        m = self.m_hist
        th = (np.arange(m + 1) - m) * (self.dt / self.eps**2)
        th[-1] = 0.0
        th[0] = -self.r
        return th

    def validate_against(self, pair: CriticalPair) -> None:
        bound = self.stability_factor * self.eps**2 * min(
            1.0 / self.L0.total_variation, 2.0 * np.pi / pair.omega_c
        )
        if self.dt > bound * (1 + 1e-9):
            raise StiffStep(
                f"dt = {self.dt:.3e} exceeds rotation-aware stability bound {bound:.3e}"
            )


@dataclass(frozen=True)
class BlowupInfo:
    step: int
    time: float
    component: str = "full"


@dataclass
class SddeResult:
    """Trajectory on the full grid [-eps^2 r, T] plus blowup status."""

    cfg: SddeConfig
    x: np.ndarray  # m_hist + n + 1 samples, history included
    blowup: BlowupInfo | None

    @property
    def m(self) -> int:
        return self.cfg.m_hist

    def times(self) -> np.ndarray:
        return (np.arange(self.x.size) - self.m) * self.cfg.dt

    def trajectory(self) -> tuple[np.ndarray, np.ndarray]:
        """(t, X) for t >= 0."""
        t = self.times()
        return t[self.m :], self.x[self.m :]

    def segment_at(self, g: int) -> SegmentBuffer:
        """Segment ending at global sample index g (g >= m_hist)."""
        m = self.m
        if g < m or g >= self.x.size:
            raise IndexError("segment index outside the stored trajectory")
        return SegmentBuffer(
            self.cfg.theta_grid(),
            self.x[g - m : g + 1].copy(),
            eps=self.cfg.eps,
            t_now=(g - m) * self.cfg.dt,
        )

    def terminal_segment(self) -> SegmentBuffer:
        return self.segment_at(self.x.size - 1)


def simulate_sdde(cfg: SddeConfig, w: WienerPath) -> SddeResult:
    """Reference single-path Euler-Maruyama integration.

    Kept deliberately plain (scalar python loop): the vectorised kernels in
    ``ensemble`` must reproduce this output bit for bit, which pins down the
    the scheme unambiguously.
    """
    if abs(w.dt - cfg.dt) > 1e-15 * cfg.dt:
        raise ValueError("WienerPath step must equal cfg.dt")
    m, n = cfg.m_hist, cfg.n_steps
    x = np.empty(m + n + 1)
    x[: m + 1] = cfg.history_samples()

    l0_j, l0_a, l0_w = _atom_lags(cfg.L0, cfg.eps, cfg.dt)
    n1_j, n1_a, n1_w = _atom_lags(cfg.G.nu1, cfg.eps, cfg.dt)
    n3_j, n3_a, n3_w = _atom_lags(cfg.G.nu3, cfg.eps, cfg.dt)
    if isinstance(cfg.noise, MultiplicativeNoise):
        mult = True
        sigma = 0.0
        lL_j, lL_a, lL_w = _atom_lags(cfg.noise.L1, cfg.eps, cfg.dt)
    else:
        mult = False
        sigma = cfg.noise.sigma
        lL_j = lL_a = lL_w = None

    inv_eps2 = 1.0 / (cfg.eps * cfg.eps)
    dt = cfg.dt
    guard = cfg.overflow_guard
    dw = w.increments(0, n)[:, 0]
    blow = None

    def look(g, j, a):
        if a == 0.0:
            return x[g - j]
        v0 = x[g - j]
        return v0 + a * (x[g - j - 1] - v0)

    for i in range(n):
        g = m + i
        l0v = 0.0
        for k in range(l0_j.size):
            l0v += l0_w[k] * look(g, l0_j[k], l0_a[k])
        gv = 0.0
        for k in range(n1_j.size):
            gv += n1_w[k] * look(g, n1_j[k], n1_a[k])
        for k in range(n3_j.size):
            v = look(g, n3_j[k], n3_a[k])
            gv += n3_w[k] * (v * v * v)
        if mult:
            dv = 0.0
            for k in range(lL_j.size):
                dv += lL_w[k] * look(g, lL_j[k], lL_a[k])
        else:
            dv = sigma
        xn = x[g] + dt * (inv_eps2 * l0v + gv) + dv * dw[i]
        x[g + 1] = xn
        if abs(xn) > guard:
            blow = BlowupInfo(step=i + 1, time=(i + 1) * dt)
            x = x[: g + 2]
            break
    return SddeResult(cfg=cfg, x=x, blowup=blow)


def checkpoint_stride(cfg: SddeConfig, pair: CriticalPair, per_period: int = 8) -> int:
    """Steps between projection checkpoints: eps^2 (2 pi / w_c) / per_period."""
    cadence = cfg.eps**2 * (2.0 * np.pi / pair.omega_c) / per_period
    return max(1, round(cadence / cfg.dt))


@dataclass
class ProjectionSeries:
    t: np.ndarray
    z: np.ndarray       # (n_ck, 2)
    y_norm: np.ndarray  # sup-norm of the stable remainder segment
    H: np.ndarray       # 0.5 ||z||_2^2

    def __iter__(self):
        return iter((self.t, self.z, self.y_norm, self.H))


def project_trajectory(
    result: SddeResult, pair: CriticalPair, stride: int | None = None
) -> ProjectionSeries:
    """Critical coordinates and stable remainder along a stored trajectory.

    Checkpoints every ``stride`` steps (default: 8 per fast period).  Emits
    H_t = 0.5 ||z_t||_2^2 alongside.
    """
    cfg = result.cfg
    if stride is None:
        stride = checkpoint_stride(cfg, pair)
    m = result.m
    theta = cfg.theta_grid()
    a_w, phi_mat = projection_weights(theta, cfg.L0, pair)
    idx = np.arange(m, result.x.size, stride)
    t = (idx - m) * cfg.dt
    z = np.empty((idx.size, 2))
    y_norm = np.empty(idx.size)
    for q, g in enumerate(idx):
        seg = result.x[g - m : g + 1]
        zq = a_w @ seg
        z[q] = zq
        y_norm[q] = np.max(np.abs(seg - phi_mat @ zq))
    return ProjectionSeries(t=t, z=z, y_norm=y_norm, H=0.5 * np.sum(z * z, axis=1))
