"""Signed-measure functionals on history segments.

A bounded linear functional L on C([-r, 0]) is represented here by a finite
signed measure: explicit point masses plus the jump measure of a
piecewise-constant Stieltjes cumulative (left-continuous on (-r, 0),
normalised to vanish at 0).  Both parts reduce to atoms, so evaluation is an
exact weighted sum -- no quadrature error anywhere in the linear algebra that
depends on these functionals.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LinearFunctionalSpec",
    "NonlinearitySpec",
    "point_delay",
    "combine",
]


@dataclass(frozen=True)
class LinearFunctionalSpec:
    """Atomic signed measure on [-r, 0] acting on segments eta by
    L(eta) = sum_k c_k eta(theta_k) + sum_j J_j eta(b_j).

    ``point_masses`` are explicit (location, weight) atoms.  ``density_steps``
    gives the breakpoints and jump values of a piecewise-constant cumulative
    function; its Stieltjes measure is again purely atomic, so the two parts
    differ only in how the input file spells them.
    """

    max_delay: float
    point_masses: tuple[tuple[float, float], ...] = ()
    density_steps: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        r = float(self.max_delay)
        if not (r > 0.0 and np.isfinite(r)):
            raise ValueError(f"max_delay must be positive and finite, got {r}")
        object.__setattr__(self, "max_delay", r)
        pm = tuple((float(t), float(w)) for t, w in self.point_masses)
        ds = tuple((float(t), float(w)) for t, w in self.density_steps)
        for t, w in pm + ds:
            if not (-r - 1e-12 <= t <= 1e-12):
                raise ValueError(f"atom location {t} outside [-{r}, 0]")
            if not np.isfinite(w):
                raise ValueError("atom weights must be finite")
        object.__setattr__(self, "point_masses", pm)
        object.__setattr__(self, "density_steps", ds)

    @classmethod
    def zero(cls, max_delay: float) -> "LinearFunctionalSpec":
        return cls(max_delay=max_delay)

    @property
    def is_zero(self) -> bool:
        return self.total_variation == 0.0

    @property
    def total_variation(self) -> float:
        return float(sum(abs(w) for _, w in self.point_masses + self.density_steps))

    # sup-norm operator norm of an atomic measure functional
    operator_norm = total_variation

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """All atoms as (locations, weights), duplicates merged."""
        raw = self.point_masses + self.density_steps
        if not raw:
            return np.empty(0), np.empty(0)
        locs = np.array([t for t, _ in raw])
        wts = np.array([w for _, w in raw])
        order = np.argsort(locs)
        locs, wts = locs[order], wts[order]
        keep_locs, keep_wts = [locs[0]], [wts[0]]
        for t, w in zip(locs[1:], wts[1:]):
            if t - keep_locs[-1] <= 1e-14:
                keep_wts[-1] += w
            else:
                keep_locs.append(t)
                keep_wts.append(w)
        return np.array(keep_locs), np.array(keep_wts)

    def apply_to_values(self, values: np.ndarray, power: int = 1) -> float | np.ndarray:
        """Apply to segment values already sampled at ``self.atoms()[0]``."""
        _, wts = self.atoms()
        v = np.asarray(values)
        if power != 1:
            v = v**power
        return wts @ v if v.ndim > 1 else float(wts @ v)

    def apply_to_callable(self, f, power: int = 1) -> float:
        """L(f^power) for a callable segment f on [-r, 0]."""
        locs, wts = self.atoms()
        return float(sum(w * f(t) ** power for t, w in zip(locs, wts)))

    def apply_to_exponential(self, lam: complex) -> complex:
        """L applied to theta -> exp(lam * theta); exact for atomic measures.

        May overflow to inf for Re(lam) << 0 (theta < 0); callers treat
        non-finite values as divergence.
        """
        locs, wts = self.atoms()
        with np.errstate(over="ignore", invalid="ignore"):
            return complex(np.sum(wts * np.exp(lam * locs)))

    def scaled(self, a: float) -> "LinearFunctionalSpec":
        return LinearFunctionalSpec(
            self.max_delay,
            tuple((t, a * w) for t, w in self.point_masses),
            tuple((t, a * w) for t, w in self.density_steps),
        )


def point_delay(weight: float, theta: float, max_delay: float | None = None) -> LinearFunctionalSpec:
    """Single point mass: eta -> weight * eta(theta)."""
    r = abs(theta) if max_delay is None else max_delay
    if r == 0.0:
        r = 1.0
    return LinearFunctionalSpec(max_delay=r, point_masses=((theta, weight),))


def combine(a: float, s1: LinearFunctionalSpec, b: float, s2: LinearFunctionalSpec) -> LinearFunctionalSpec:
    """a*s1 + b*s2 as a single functional (delays must agree)."""
    if s1.max_delay != s2.max_delay:
        raise ValueError("cannot combine functionals with different max_delay")
    return LinearFunctionalSpec(
        s1.max_delay,
        s1.scaled(a).point_masses + s2.scaled(b).point_masses,
        s1.scaled(a).density_steps + s2.scaled(b).density_steps,
    )


@dataclass(frozen=True)
class NonlinearitySpec:
    """Drift perturbation G(eta) = integral eta d(nu1) + integral eta^3 d(nu3).

    ``lipschitz_K`` is the global Lipschitz bound required of G when it is
    used with multiplicative noise (where nu3 must be empty).
    """

    nu1: LinearFunctionalSpec | None = None
    nu3: LinearFunctionalSpec | None = None
    lipschitz_K: float | None = None

    @property
    def is_zero(self) -> bool:
        return (self.nu1 is None or self.nu1.is_zero) and (self.nu3 is None or self.nu3.is_zero)

    @property
    def has_cubic(self) -> bool:
        return self.nu3 is not None and not self.nu3.is_zero

    def apply_to_callable(self, f) -> float:
        out = 0.0
        if self.nu1 is not None:
            out += self.nu1.apply_to_callable(f, power=1)
        if self.nu3 is not None:
            out += self.nu3.apply_to_callable(f, power=3)
        return out

    @classmethod
    def zero(cls) -> "NonlinearitySpec":
        return cls()
