"""The averaged one-dimensional amplitude equation and its exit times.

For multiplicative noise with G = 0 the averaged equation is linear,
dH = C1 H dW + C2 H dt, with closed-form coefficients from M = psi_tilde
(L1 Phi).  For the additive case the generic construction averages the
rotating-frame drift over one fast period and the initial circle direction
(quadrature); the Ito correction contributes the constant
0.5 ||psi_tilde||^2 sigma^2 and the diffusion averages to
||psi_tilde|| sigma sqrt(H).  Degree counting in z makes every term a
monomial in H, so the quadrature only ever runs on the unit circle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .functionals import LinearFunctionalSpec, NonlinearitySpec
from .spectral import CriticalPair
from .wiener import WienerPath

__all__ = [
    "NegativeVariance",
    "QuadratureNonConverged",
    "AmplitudeSde",
    "averaged_multiplicative_coeffs",
    "averaged_multiplicative_from_operators",
    "averaged_additive",
    "StabilizingReport",
    "check_stabilizing",
    "simulate_h0",
    "simulate_h0_ensemble",
    "exit_time",
]


class NegativeVariance(Exception):
    """The closed-form 2 C1^2 expression came out negative (invalid M)."""


class QuadratureNonConverged(Exception):
    """Period-average coefficients still moving under grid refinement."""


@dataclass(frozen=True)
class AmplitudeSde:
    """dH = drift(H) dt + diffusion(H) dW on H >= 0.

    ``coeffs`` spells out the polynomial structure:
    drift = const + lin * H + quad * H^2, diffusion = c1 * H (multiplicative
    closed form) or sqrt_coef * sqrt(H) (additive).
    """

    provenance: str  # "closed_form" | "quadrature"
    const: float = 0.0
    lin: float = 0.0
    quad: float = 0.0
    c1: float = 0.0         # diffusion = c1 * H
    sqrt_coef: float = 0.0  # diffusion = sqrt_coef * sqrt(H)

    def drift(self, h):
        return self.const + self.lin * h + self.quad * h * h

    def diffusion(self, h):
        return self.c1 * h + self.sqrt_coef * np.sqrt(np.maximum(h, 0.0))

    @property
    def is_linear_multiplicative(self) -> bool:
        return self.sqrt_coef == 0.0 and self.const == 0.0 and self.quad == 0.0


def averaged_multiplicative_coeffs(m: np.ndarray) -> tuple[float, float]:
    """(C1, C2) of dH = C1 H dW + C2 H dt from the 2x2 matrix M."""
    m = np.asarray(m, dtype=float)
    two_c1_sq = (
        3.0 * (m[0, 0] ** 2 + m[1, 1] ** 2)
        + (m[0, 1] + m[1, 0]) ** 2
        + 2.0 * m[0, 0] * m[1, 1]
    )
    if two_c1_sq < 0.0:
        raise NegativeVariance(f"2 C1^2 = {two_c1_sq:.3e} < 0")
    c2 = 0.5 * float(np.sum(m * m))
    return float(np.sqrt(0.5 * two_c1_sq)), c2


def averaged_multiplicative_from_operators(
    psi_tilde: np.ndarray, L1: LinearFunctionalSpec, pair: CriticalPair
) -> AmplitudeSde:
    """Closed-form averaged equation for multiplicative noise with G = 0."""
    w = pair.omega_c
    l1_phi = np.array(
        [
            L1.apply_to_callable(lambda th: np.cos(w * th)),
            L1.apply_to_callable(lambda th: np.sin(w * th)),
        ]
    )
    psi_sq = float(psi_tilde @ psi_tilde)
    l1_sq = float(l1_phi @ l1_phi)
    dot = float(l1_phi @ psi_tilde)
    c2 = 0.5 * psi_sq * l1_sq
    c1 = math.sqrt(0.5 * psi_sq * l1_sq + dot * dot)
    return AmplitudeSde(provenance="closed_form", lin=c2, c1=c1)


def _period_average_coeffs(
    pair: CriticalPair,
    nu1: LinearFunctionalSpec | None,
    nu3: LinearFunctionalSpec | None,
    n_t: int,
    n_angle: int,
) -> tuple[float, float]:
    """Averages of the rotating drift projections at |z| = 1.

    kappa1: quadratic term (e^{tB} z)^T psi_tilde * integral Phi e^{tB} z dnu1,
    kappa3: quartic analogue with the cube against dnu3; both averaged over
    one period in t and uniformly over the direction of z.
    """
    w = pair.omega_c
    psi = pair.psi_tilde
    ts = (np.arange(n_t) + 0.5) * (2.0 * np.pi / w) / n_t
    angles = (np.arange(n_angle) + 0.5) * (2.0 * np.pi) / n_angle
    k1 = 0.0
    k3 = 0.0
    for a in angles:
        # e^{tB} z for z = (cos a, sin a): components in closed form
        u1 = np.cos(w * ts - a)
        u2 = -np.sin(w * ts - a)
        lead = psi[0] * u1 + psi[1] * u2
        if nu1 is not None:
            acc = np.zeros_like(ts)
            for th, wt in zip(*nu1.atoms()):
                acc += wt * np.cos(w * (ts + th) - a)
            k1 += float(np.mean(lead * acc))
        if nu3 is not None:
            acc = np.zeros_like(ts)
            for th, wt in zip(*nu3.atoms()):
                acc += wt * np.cos(w * (ts + th) - a) ** 3
            k3 += float(np.mean(lead * acc))
    return k1 / n_angle, k3 / n_angle


def averaged_additive(
    pair: CriticalPair,
    G: NonlinearitySpec,
    sigma: float,
    n_t: int = 256,
    n_angle: int = 64,
    rel_tol: float = 1e-6,
) -> AmplitudeSde:
    """Averaged amplitude equation for the additive-noise case.

    drift(H) = 2 kappa1 H + 4 kappa3 H^2 + 0.5 ||psi|| ^2 sigma^2,
    diffusion(H) = ||psi|| sigma sqrt(H); kappa terms from period/angle
    quadrature of the projected drift on the unit circle (degree counting in
    z turns them into exact monomial coefficients in H).
    """
    k1, k3 = _period_average_coeffs(pair, G.nu1, G.nu3, n_t, n_angle)
    k1f, k3f = _period_average_coeffs(pair, G.nu1, G.nu3, 2 * n_t, n_angle)
    scale = max(abs(k1f), abs(k3f), 1e-12)
    if max(abs(k1 - k1f), abs(k3 - k3f)) > rel_tol * scale:
        raise QuadratureNonConverged(
            f"period average moved by {max(abs(k1 - k1f), abs(k3 - k3f)):.2e} under refinement"
        )
    psi_sq = float(pair.psi_tilde @ pair.psi_tilde)
    return AmplitudeSde(
        provenance="quadrature",
        const=0.5 * psi_sq * sigma * sigma,
        lin=2.0 * k1f,
        quad=4.0 * k3f,
        sqrt_coef=math.sqrt(psi_sq) * sigma,
    )


@dataclass(frozen=True)
class StabilizingReport:
    stabilizing: bool
    C_G_hat: float


def check_stabilizing(
    pair: CriticalPair,
    nu3: LinearFunctionalSpec | None,
    n_t: int = 256,
    n_angle: int = 64,
) -> StabilizingReport:
    """Period-averaged cubic projection strictly negative on the unit circle.

    Degree-4 homogeneity makes the unit circle sufficient; the max over
    directions bounds the quartic form, and -max is a valid estimate of the
    stabilising constant.
    """
    if nu3 is None or nu3.is_zero:
        return StabilizingReport(stabilizing=False, C_G_hat=0.0)
    w = pair.omega_c
    psi = pair.psi_tilde
    ts = (np.arange(n_t) + 0.5) * (2.0 * np.pi / w) / n_t
    worst = -np.inf
    for a in (np.arange(n_angle) + 0.5) * (2.0 * np.pi) / n_angle:
        u1 = np.cos(w * ts - a)
        u2 = -np.sin(w * ts - a)
        lead = psi[0] * u1 + psi[1] * u2
        acc = np.zeros_like(ts)
        for th, wt in zip(*nu3.atoms()):
            acc += wt * np.cos(w * (ts + th) - a) ** 3
        worst = max(worst, float(np.mean(lead * acc)))
    return StabilizingReport(stabilizing=bool(worst < 0.0), C_G_hat=-worst)


def simulate_h0(
    sde: AmplitudeSde, h0: float, T: float, dt: float, w: WienerPath
) -> tuple[np.ndarray, np.ndarray]:
    """One path of the averaged equation.

    Linear multiplicative equations use the exact log-space update (the
    solution is an explicit geometric Brownian motion); everything else is
    Euler-Maruyama with reflection at 0, which preserves nonnegativity (the
    sqrt diffusion vanishes at 0, so the reflection bias is O(dt)).
    """
    if h0 < 0:
        raise ValueError("h0 must be nonnegative")
    n = int(round(T / dt))
    t = np.arange(n + 1) * dt
    h = np.empty(n + 1)
    h[0] = h0
    dw = w.increments(0, n)[:, 0]
    if sde.is_linear_multiplicative:
        c1, c2 = sde.c1, sde.lin
        log_inc = (c2 - 0.5 * c1 * c1) * dt + c1 * dw
        h[1:] = h0 * np.exp(np.cumsum(log_inc))
        return t, h
    x = h0
    for i in range(n):
        x = abs(x + sde.drift(x) * dt + sde.diffusion(x) * dw[i])
        h[i + 1] = x
    return t, h


def simulate_h0_ensemble(
    sde: AmplitudeSde,
    h0: float | np.ndarray,
    T: float,
    dt: float,
    n_paths: int,
    base_seed: int,
    h_star: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Terminal values and exit times of an averaged-equation ensemble.

    Returns (H_T, tau) with tau = NaN where H never reached h_star (or if no
    threshold was given).  Draws come from a single seeded stream (the
    averaged equation is never coupled path-by-path to anything else, so the
    per-path seed discipline of the SDDE ensembles is not needed here).
    """
    rng = np.random.Generator(np.random.PCG64(base_seed))
    n = int(round(T / dt))
    h = np.full(n_paths, h0, dtype=float) if np.isscalar(h0) else np.array(h0, dtype=float)
    tau = np.full(n_paths, np.nan)
    if h_star is not None:
        tau[h >= h_star] = 0.0
    sdt = math.sqrt(dt)
    use_exact = sde.is_linear_multiplicative
    for i in range(n):
        dw = rng.standard_normal(n_paths) * sdt
        if use_exact:
            hn = h * np.exp((sde.lin - 0.5 * sde.c1**2) * dt + sde.c1 * dw)
        else:
            hn = np.abs(h + sde.drift(h) * dt + sde.diffusion(h) * dw)
        if h_star is not None:
            fresh = np.isnan(tau) & (hn >= h_star)
            if np.any(fresh):
                num = h_star - h[fresh]
                den = hn[fresh] - h[fresh]
                frac = np.where(den > 0, np.clip(num / den, 0.0, 1.0), 1.0)
                tau[fresh] = (i + frac) * dt
        h = hn
    return h, tau


def exit_time(t: np.ndarray, x: np.ndarray, threshold: float) -> float | None:
    """First time x >= threshold, refined by linear interpolation; None if
    censored at the horizon."""
    above = np.nonzero(np.asarray(x) >= threshold)[0]
    if above.size == 0:
        return None
    i = int(above[0])
    if i == 0:
        return float(t[0])
    x0, x1 = x[i - 1], x[i]
    frac = (threshold - x0) / (x1 - x0) if x1 > x0 else 1.0
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))
