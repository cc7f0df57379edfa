"""History segments: the rescaled extractor's view of a trajectory.

A segment is the function theta -> x(t + eps^2 * theta) on [-r, 0].  We store
it as uniformly spaced samples in theta with linear interpolation between
grid points (Euler-Maruyama is strong order <= 1, so higher-order
interpolation buys nothing).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functionals import LinearFunctionalSpec, NonlinearitySpec

__all__ = ["OutOfWindow", "SegmentBuffer", "apply_functional", "apply_nonlinearity"]


class OutOfWindow(Exception):
    """Query maps to a time before the stored history."""


@dataclass(frozen=True)
class SegmentBuffer:
    """Sampled segment on a uniform theta grid covering [-r, 0].

    ``theta`` ascends from -r to 0; ``values`` are the samples.  ``eps`` and
    ``t_now`` record where the segment was cut out of a trajectory (purely
    metadata; all queries are in theta).
    """

    theta: np.ndarray
    values: np.ndarray
    eps: float | None = None
    t_now: float | None = None

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if th.ndim != 1 or th.shape != v.shape or th.size < 2:
            raise ValueError("theta and values must be equal-length 1-D arrays (>= 2 samples)")
        d = np.diff(th)
        if not (d > 0).all():
            raise ValueError("theta grid must be strictly ascending")
        if abs(th[-1]) > 1e-12 * max(1.0, abs(th[0])):
            raise ValueError("theta grid must end at 0")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "values", v)

    @property
    def r(self) -> float:
        return float(-self.theta[0])

    @classmethod
    def from_function(cls, fn, r: float, n: int = 256, eps: float | None = None) -> "SegmentBuffer":
        th = np.linspace(-r, 0.0, n + 1)
        return cls(th, np.array([fn(t) for t in th], dtype=float), eps=eps)

    @classmethod
    def constant(cls, c: float, r: float, n: int = 8) -> "SegmentBuffer":
        th = np.linspace(-r, 0.0, n + 1)
        return cls(th, np.full(n + 1, float(c)))

    def sample(self, theta) -> float | np.ndarray:
        """Value at theta in [-r, 0], linear interpolation; exact on the grid."""
        th = np.asarray(theta, dtype=float)
        lo, hi = self.theta[0], self.theta[-1]
        tol = 1e-9 * max(1.0, self.r)
        if np.any(th < lo - tol) or np.any(th > hi + tol):
            raise OutOfWindow(f"theta {theta} outside stored window [{lo}, {hi}]")
        out = np.interp(np.clip(th, lo, hi), self.theta, self.values)
        return float(out) if np.isscalar(theta) else out

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def apply_functional(spec: LinearFunctionalSpec, buf: SegmentBuffer, power: int = 1) -> float:
    """sum_k w_k * buf(theta_k)^power over all atoms of the measure."""
    locs, wts = spec.atoms()
    if locs.size == 0:
        return 0.0
    vals = buf.sample(locs)
    return float(wts @ np.asarray(vals) ** power)


def apply_nonlinearity(g: NonlinearitySpec, buf: SegmentBuffer) -> float:
    out = 0.0
    if g.nu1 is not None:
        out += apply_functional(g.nu1, buf, 1)
    if g.nu3 is not None:
        out += apply_functional(g.nu3, buf, 3)
    return out
