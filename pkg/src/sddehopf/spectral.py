"""Spectral analysis of the unperturbed linear delay equation dx/dt = L0(x_t).

Everything downstream hangs off four objects computed here:

* the characteristic roots of lambda - L0(exp(lambda .)) = 0, located by a
  Newton sweep cross-checked against an argument-principle winding count;
* the criticality verdict (exactly one conjugate pair on the imaginary axis,
  everything else strictly stable);
* the critical basis Phi = [cos(w theta), sin(w theta)], the rotation
  generator B, and the adjoint vector psi_tilde that gives the coordinates of
  the unit point mass at theta = 0 on the critical plane;
* the stable part gamma(t) of the fundamental solution and a fitted
  exponential envelope K * exp(-kappa t) for it.

The projection onto the critical plane uses the classical adjoint bilinear
form (value-at-zero product minus the double integral against the measure).
The 2x2 normalisation is available in closed form for atomic measures, which
is what makes psi_tilde exact here.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functionals import LinearFunctionalSpec
from .segment import SegmentBuffer

__all__ = [
    "WindingMismatch",
    "ContourThroughRoot",
    "InconclusiveRegion",
    "SingularNormalization",
    "NonDecaying",
    "Rectangle",
    "CriticalityReport",
    "CriticalPair",
    "DecayFit",
    "characteristic_value",
    "characteristic_derivative",
    "winding_count",
    "find_roots",
    "default_region",
    "verify_criticality",
    "normalization_matrix",
    "compute_psi_tilde",
    "critical_pair",
    "projection_weights",
    "project",
    "integrate_unperturbed",
    "fundamental_solution",
    "gamma_table",
    "fit_decay",
]

ROOT_TOL = 1e-10
CRIT_TOL = 1e-8


class WindingMismatch(Exception):
    """Newton sweep found fewer roots than the winding count promises."""


class ContourThroughRoot(Exception):
    """Characteristic function nearly vanishes on the requested contour."""


class InconclusiveRegion(Exception):
    """Region too small to bound the rightmost non-critical roots."""


class SingularNormalization(Exception):
    """Bilinear-form matrix numerically singular (non-semisimple pair)."""


class NonDecaying(Exception):
    """Envelope fit produced kappa <= 0."""


@dataclass(frozen=True)
class Rectangle:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def contains(self, z: complex, pad: float = 0.0) -> bool:
        return (self.re_min - pad <= z.real <= self.re_max + pad
                and self.im_min - pad <= z.imag <= self.im_max + pad)


def default_region(r: float) -> Rectangle:
    # wide enough to capture the spectral gap that governs the decay rate
    return Rectangle(-4.0 * np.pi / r, 0.5, -6.0 * np.pi / r, 6.0 * np.pi / r)


def characteristic_value(L0: LinearFunctionalSpec, lam: complex) -> complex:
    """lambda - L0(exp(lambda .)); entire, exact for atomic measures."""
    return lam - L0.apply_to_exponential(lam)


def characteristic_derivative(L0: LinearFunctionalSpec, lam: complex) -> complex:
    locs, wts = L0.atoms()
    if locs.size == 0:
        return 1.0 + 0.0j
    with np.errstate(over="ignore", invalid="ignore"):
        return 1.0 - complex(np.sum(wts * locs * np.exp(lam * locs)))


def winding_count(L0: LinearFunctionalSpec, region: Rectangle, n_per_edge: int = 512) -> int:
    """Number of characteristic roots inside ``region`` by the argument principle.

    The characteristic function is entire, so the winding number of its
    boundary image equals the zero count (with multiplicity).  The phase is
    tracked by unwrapping; sampling is refined until adjacent increments stay
    below pi/2.
    """
    corners = [
        region.re_min + 1j * region.im_min,
        region.re_max + 1j * region.im_min,
        region.re_max + 1j * region.im_max,
        region.re_min + 1j * region.im_max,
        region.re_min + 1j * region.im_min,
    ]
    scale = max(1.0, abs(region.re_min), abs(region.re_max), abs(region.im_max))
    n = n_per_edge
    for _ in range(6):
        pts = np.concatenate(
            [np.linspace(corners[i], corners[i + 1], n, endpoint=False) for i in range(4)]
        )
        pts = np.append(pts, pts[0])
        vals = pts - np.array([L0.apply_to_exponential(p) for p in pts])
        amin = np.min(np.abs(vals))
        if amin < 1e-9 * scale:
            raise ContourThroughRoot(
                f"|characteristic value| = {amin:.3e} on the contour; perturb the region"
            )
        dphase = np.diff(np.unwrap(np.angle(vals)))
        if np.max(np.abs(dphase)) < 0.5 * np.pi:
            total = float(np.sum(dphase))
            return int(round(total / (2.0 * np.pi)))
        n *= 2
    raise ContourThroughRoot("phase increments did not settle under refinement")


def _newton_polish(L0, z0, bound: float, tol=ROOT_TOL, max_iter=60):
    z = complex(z0)
    for _ in range(max_iter):
        f = characteristic_value(L0, z)
        if not np.isfinite(f.real) or not np.isfinite(f.imag):
            return None
        if abs(f) < tol:
            return z
        df = characteristic_derivative(L0, z)
        if df == 0 or not np.isfinite(df.real) or not np.isfinite(df.imag):
            return None
        z = z - f / df
        if not np.isfinite(z.real) or not np.isfinite(z.imag) or abs(z) > bound:
            return None
    f = characteristic_value(L0, z)
    return z if (np.isfinite(f.real) and np.isfinite(f.imag) and abs(f) < tol) else None


def find_roots(
    L0: LinearFunctionalSpec,
    region: Rectangle | None = None,
    grid_density: int = 12,
    root_tol: float = ROOT_TOL,
    cluster_tol: float | None = None,
) -> list[complex]:
    """All characteristic roots inside ``region``.

    Newton iterations are started from a rectangular grid whose spacing is
    the expected imaginary root spacing 2*pi/r divided by ``grid_density``;
    converged roots are deduplicated and the final count is checked against
    the argument-principle winding number of the region boundary.
    """
    r = L0.max_delay
    if region is None:
        region = default_region(r)
    if grid_density < 8:
        raise ValueError("grid_density must be >= 8 (points per expected root spacing)")
    spacing = (2.0 * np.pi / r) / grid_density
    if cluster_tol is None:
        cluster_tol = 1e-6 * (2.0 * np.pi / r)

    res = np.arange(region.re_min, region.re_max + spacing, spacing)
    ims = np.arange(region.im_min, region.im_max + spacing, spacing)
    bound = 10.0 * max(abs(region.re_min), abs(region.re_max), abs(region.im_min), abs(region.im_max), 1.0)
    roots: list[complex] = []
    for a in res:
        for b in ims:
            z = _newton_polish(L0, a + 1j * b, bound, tol=root_tol)
            if z is None or not region.contains(z, pad=1e-9):
                continue
            if all(abs(z - w) > cluster_tol for w in roots):
                roots.append(z)

    expected = winding_count(L0, region)
    if len(roots) != expected:
        raise WindingMismatch(
            f"found {len(roots)} roots but winding count is {expected}; "
            "increase grid_density"
        )
    roots.sort(key=lambda z: (-z.real, abs(z.imag)))
    return roots


@dataclass(frozen=True)
class CriticalityReport:
    is_critical: bool
    omega_c: float | None
    gap: float | None
    n_roots: int
    rightmost_re: float


def verify_criticality(
    roots: list[complex],
    tol: float = CRIT_TOL,
    region: Rectangle | None = None,
) -> CriticalityReport:
    """Check for exactly one conjugate pair on the axis, all else stable.

    ``gap`` is -max(Re) over the non-critical roots found; it is only a bound
    on the true spectral gap if the region was wide enough, which is what the
    region heuristics guard.
    """
    if not roots:
        raise InconclusiveRegion("no roots found in the searched region")
    critical = [z for z in roots if abs(z.real) < tol and z.imag > tol]
    conj_ok = all(any(abs(np.conj(z) - w) < 10 * tol for w in roots) for z in critical)
    others = [z for z in roots if abs(z.real) >= tol or abs(z.imag) <= tol]
    rightmost = max(z.real for z in roots)

    is_critical = len(critical) == 1 and conj_ok and all(z.real < -tol for z in others)
    omega = critical[0].imag if len(critical) == 1 else None

    stable = [z for z in others if z.real < -tol]
    gap = -max(z.real for z in stable) if stable else None

    if is_critical:
        if not stable:
            raise InconclusiveRegion("no stable roots resolved; widen the region")
        if region is not None:
            worst = max(stable, key=lambda z: z.real)
            r_spacing = np.pi  # imaginary spacing of the root ladder is ~2 pi / r
            if abs(worst.imag) > region.im_max - r_spacing * 0.5:
                raise InconclusiveRegion(
                    "rightmost stable root sits at the imaginary boundary; widen the region"
                )
            if region.re_max <= tol:
                raise InconclusiveRegion("region does not extend past the imaginary axis")
    return CriticalityReport(
        is_critical=bool(is_critical),
        omega_c=omega,
        gap=gap,
        n_roots=len(roots),
        rightmost_re=rightmost,
    )


# ---------------------------------------------------------------------------
# Adjoint bilinear form and the critical projection
# ---------------------------------------------------------------------------

def _trig_product_integrals(omega: float, theta_k: float):
    """Closed forms of int_{theta_k}^0 psi_i(xi - theta_k) Phi_j(xi) dxi.

    psi_1 = cos(omega s), psi_2 = sin(omega s) on [0, r];
    Phi_1 = cos(omega theta), Phi_2 = sin(omega theta) on [-r, 0].
    Rows index psi, columns index Phi.
    """
    L = -theta_k
    d = -omega * theta_k
    cd, sd = np.cos(d), np.sin(d)
    i_cc = 0.5 * (L * cd + sd / omega)
    i_ss = 0.5 * (L * cd - sd / omega)
    i_sc = 0.5 * L * sd
    i_cs = -0.5 * L * sd
    return np.array([[i_cc, i_cs], [i_sc, i_ss]])


def normalization_matrix(L0: LinearFunctionalSpec, omega_c: float) -> np.ndarray:
    """Exact 2x2 matrix of the bilinear form between the raw adjoint basis
    (cos(omega s), sin(omega s)) and Phi."""
    n = np.array([[1.0, 0.0], [0.0, 0.0]])
    locs, wts = L0.atoms()
    for t, w in zip(locs, wts):
        n += w * _trig_product_integrals(omega_c, t)
    return n


def compute_psi_tilde(L0: LinearFunctionalSpec, omega_c: float) -> np.ndarray:
    """Coordinates of the critical projection of the point mass 1_{0}.

    The projection coordinate map is eta -> N^{-1} (psi_raw, eta); applied to
    1_{0} the integral term vanishes, leaving the value of the normalised
    adjoint basis at 0, i.e. N^{-1} [1, 0]^T.
    """
    n = normalization_matrix(L0, omega_c)
    det = n[0, 0] * n[1, 1] - n[0, 1] * n[1, 0]
    scale = np.max(np.abs(n))
    if abs(det) < 1e-12 * max(scale**2, 1e-300):
        raise SingularNormalization(
            "bilinear-form matrix is singular; critical eigenvalue not semisimple"
        )
    return np.linalg.solve(n, np.array([1.0, 0.0]))


@dataclass(frozen=True)
class CriticalPair:
    """Critical frequency, basis, adjoint vector, and spectral-gap estimate."""

    omega_c: float
    psi_tilde: np.ndarray
    r: float
    kappa: float | None = None
    gap_K: float | None = None

    @property
    def B(self) -> np.ndarray:
        w = self.omega_c
        return np.array([[0.0, w], [-w, 0.0]])

    def phi(self, theta) -> np.ndarray:
        """Basis row(s) [cos(w theta), sin(w theta)]; shape (..., 2)."""
        th = np.asarray(theta, dtype=float)
        return np.stack([np.cos(self.omega_c * th), np.sin(self.omega_c * th)], axis=-1)

    def rotation(self, t: float) -> np.ndarray:
        """exp(tB), evaluated in closed form with argument reduction."""
        a = np.mod(self.omega_c * t, 2.0 * np.pi)
        c, s = np.cos(a), np.sin(a)
        return np.array([[c, s], [-s, c]])

    def rotate(self, t: float, v: np.ndarray) -> np.ndarray:
        return self.rotation(t) @ v


def critical_pair(
    L0: LinearFunctionalSpec,
    region: Rectangle | None = None,
    grid_density: int = 12,
    tol: float = CRIT_TOL,
) -> CriticalPair:
    """Full pipeline: roots -> criticality -> psi_tilde -> CriticalPair.

    The gap estimate kappa comes from the real part of the nearest stable
    root; a sharper envelope can be fitted later from gamma samples.
    """
    if L0.is_zero:
        raise ValueError("L0 with zero total variation cannot be critical")
    if region is None:
        region = default_region(L0.max_delay)
    roots = find_roots(L0, region, grid_density=grid_density)
    report = verify_criticality(roots, tol=tol, region=region)
    if not report.is_critical:
        raise ValueError(f"system is not critical: {report}")
    psi = compute_psi_tilde(L0, report.omega_c)
    return CriticalPair(
        omega_c=report.omega_c, psi_tilde=psi, r=L0.max_delay, kappa=report.gap
    )


def projection_weights(
    theta: np.ndarray, L0: LinearFunctionalSpec, pair: CriticalPair
) -> tuple[np.ndarray, np.ndarray]:
    """Linear maps turning segment samples into critical coordinates.

    Returns (A, phi_mat) with z = A @ values and y = values - phi_mat @ z.
    A is built from the raw-adjoint quadrature weights normalised against the
    sampled basis itself, so segments lying exactly in the span of the
    sampled basis project with zero residual and the projection is idempotent
    to machine precision on any grid.
    """
    theta = np.asarray(theta, dtype=float)
    m = theta.size
    omega = pair.omega_c
    w_raw = np.zeros((2, m))
    w_raw[0, -1] = 1.0  # psi_1(0) * eta(0); psi_2(0) = 0
    locs, wts = L0.atoms()
    for theta_k, w_k in zip(locs, wts):
        if theta_k >= -1e-15:
            continue  # empty integration range for an atom at 0
        inside = np.nonzero(theta > theta_k + 1e-15)[0]
        start = inside[0]
        sub = np.concatenate([[theta_k], theta[inside]])
        tz = np.zeros(sub.size)
        d = np.diff(sub)
        tz[:-1] += 0.5 * d
        tz[1:] += 0.5 * d
        psi_vals = np.stack(
            [np.cos(omega * (sub - theta_k)), np.sin(omega * (sub - theta_k))]
        )
        coeff = w_k * tz * psi_vals  # (2, len(sub))
        w_raw[:, inside] += coeff[:, 1:]
        # distribute the off-grid endpoint onto its bracketing samples
        if start == 0:
            w_raw[:, 0] += coeff[:, 0]
        else:
            frac = (theta_k - theta[start - 1]) / (theta[start] - theta[start - 1])
            w_raw[:, start - 1] += coeff[:, 0] * (1.0 - frac)
            w_raw[:, start] += coeff[:, 0] * frac
    phi_mat = pair.phi(theta)  # (m, 2)
    n_disc = w_raw @ phi_mat
    det = n_disc[0, 0] * n_disc[1, 1] - n_disc[0, 1] * n_disc[1, 0]
    if abs(det) < 1e-12 * max(np.max(np.abs(n_disc)) ** 2, 1e-300):
        raise SingularNormalization("discrete bilinear form singular on this grid")
    a = np.linalg.solve(n_disc, w_raw)
    return a, phi_mat


def project(
    segment: SegmentBuffer, pair: CriticalPair, L0: LinearFunctionalSpec
) -> tuple[np.ndarray, SegmentBuffer]:
    """Split a segment into critical coordinates z and stable remainder y."""
    a, phi_mat = projection_weights(segment.theta, L0, pair)
    z = a @ segment.values
    y = segment.values - phi_mat @ z
    return z, SegmentBuffer(segment.theta, y, eps=segment.eps, t_now=segment.t_now)


# ---------------------------------------------------------------------------
# Method of steps for the unperturbed equation; gamma and its envelope
# ---------------------------------------------------------------------------

def integrate_unperturbed(
    L0: LinearFunctionalSpec,
    history: np.ndarray,
    t_max: float,
    dt: float,
    zero_left_value: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Heun integration of dx/dt = L0(x_t) from a sampled history.

    ``history`` holds x on the grid [-r, 0] (length r/dt + 1, t=0 last).
    Delayed lookups interpolate linearly between grid samples; the corrector
    stage may look up the predictor value for atoms at theta = 0.

    ``zero_left_value`` handles a history discontinuity at time 0 (the
    fundamental-solution datum): the stored sample is the right limit, and a
    corrector-stage lookup that lands exactly on time 0 must see the left
    limit instead, otherwise the trapezoid smears the jump into an O(dt)
    error at the first delay crossing.

    Returns (t, x) on [-r, t_max].
    """
    r = L0.max_delay
    m = int(round(r / dt))
    if abs(m * dt - r) > 1e-9 * r:
        raise ValueError("dt must divide the maximum delay")
    if history.shape != (m + 1,):
        raise ValueError(f"history must have {m + 1} samples on [-r, 0]")
    n = int(round(t_max / dt))
    x = np.zeros(m + n + 1)
    x[: m + 1] = history
    locs, wts = L0.atoms()
    lags = -locs / dt  # in steps, >= 0

    def rhs(i_now: int, x_pred: float | None = None) -> float:
        corrector = x_pred is not None
        total = 0.0
        for lag, w in zip(lags, wts):
            pos = i_now - lag
            j = int(np.floor(pos + 1e-12))
            frac = pos - j
            if frac < 1e-12:
                if corrector and j == m and zero_left_value is not None:
                    v = zero_left_value
                elif j == i_now and corrector:
                    v = x_pred
                else:
                    v = x[j]
            else:
                v1 = x_pred if (j + 1 == i_now and corrector) else x[j + 1]
                v = x[j] + frac * (v1 - x[j])
            total += w * v
        return total

    for i in range(m, m + n):
        f0 = rhs(i)
        pred = x[i] + dt * f0
        f1 = rhs(i + 1, x_pred=pred)
        x[i + 1] = x[i] + 0.5 * dt * (f0 + f1)
    t = (np.arange(m + n + 1) - m) * dt
    return t, x


def fundamental_solution(
    L0: LinearFunctionalSpec, t_max: float, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """Solution with the discontinuous initial datum 1_{0} (method of steps).

    x(0) = 1 and x vanishes on [-r, 0); the grid sample at time 0 carries the
    right limit and corrector lookups that land there see the left limit 0.
    """
    r = L0.max_delay
    m = int(round(r / dt))
    history = np.zeros(m + 1)
    history[-1] = 1.0
    return integrate_unperturbed(L0, history, t_max, dt, zero_left_value=0.0)


def gamma_table(
    L0: LinearFunctionalSpec,
    pair: CriticalPair,
    t_max: float | None = None,
    dt: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Stable part of the fundamental solution, gamma(t) = x(t) - Phi(0) e^{tB} psi_tilde."""
    r = L0.max_delay
    if t_max is None:
        t_max = 10.0 * r
    if dt is None:
        dt = r / 8000.0
    if dt > r / 50.0:
        raise ValueError("dt must be <= r/50 for the gamma table")
    if t_max < 10.0 * r:
        raise ValueError("t_max must be >= 10 r for the gamma table")
    t, x = fundamental_solution(L0, t_max, dt)
    keep = t >= -1e-12
    t = t[keep]
    x = x[keep]
    w = pair.omega_c
    chi = pair.psi_tilde[0] * np.cos(w * t) + pair.psi_tilde[1] * np.sin(w * t)
    return t, x - chi


@dataclass(frozen=True)
class DecayFit:
    K: float
    kappa: float
    residual: float


def fit_decay(
    t: np.ndarray,
    abs_vals: np.ndarray,
    t0: float | None = None,
    relative_floor: float = 1e-5,
) -> DecayFit:
    """Exponential envelope K e^{-kappa t} >= |gamma(t)| from a tail fit.

    Oscillatory tails are fitted through their local maxima (a plain
    least-squares line through log|gamma| would be dragged down by the dips
    near the zero crossings); monotone tails fall back to all positive
    samples, which keeps exact log-linear data exactly recoverable.  Fit
    samples more than ``relative_floor`` below the largest tail value are
    discarded -- on tabulated data that far down the integrator noise floor
    takes over.  K is inflated afterwards so the envelope holds at every
    provided sample.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(abs_vals, dtype=float)
    if t0 is None:
        t0 = t[0] + 0.25 * (t[-1] - t[0])
    tail = (t >= t0) & (v > 0)
    tt, vv = t[tail], v[tail]
    if tt.size < 3:
        raise ValueError("need at least 3 positive tail samples")
    interior = np.nonzero((vv[1:-1] > vv[:-2]) & (vv[1:-1] > vv[2:]))[0] + 1
    if interior.size >= 4:
        tt, vv = tt[interior], vv[interior]
    keep = vv > relative_floor * np.max(vv)
    if np.count_nonzero(keep) >= 3:
        tt, vv = tt[keep], vv[keep]
    slope, intercept = np.polyfit(tt, np.log(vv), 1)
    kappa = -slope
    if kappa <= 0:
        raise NonDecaying(f"fitted kappa = {kappa:.3e} <= 0")
    k_fit = float(np.exp(intercept))
    fit_vals = k_fit * np.exp(-kappa * tt)
    residual = float(np.max(np.abs(vv - fit_vals) / fit_vals))
    pos = v > 0
    k_env = float(np.max(v[pos] * np.exp(kappa * t[pos])))
    return DecayFit(K=max(k_fit, k_env), kappa=float(kappa), residual=residual)
