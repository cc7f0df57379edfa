"""Empirical-distribution utilities for the validation experiments.

Exit-time samples censored at the horizon keep their mass: the CDF simply
never reaches 1, and the Kolmogorov-Smirnov sup runs over the pooled finite
atoms, so a censored-mass difference shows up at the largest exit time.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EmptySample",
    "NonPositiveData",
    "EmpiricalCdf",
    "ks_distance",
    "modulus_of_continuity",
    "SlopeFit",
    "loglog_slope",
]


class EmptySample(Exception):
    pass


class NonPositiveData(Exception):
    pass


@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous empirical CDF; censored samples count in the total
    mass but never appear below any finite x."""

    sorted_samples: np.ndarray
    censored_count: int = 0

    @classmethod
    def from_samples(cls, samples, censored_count: int = 0) -> "EmpiricalCdf":
        arr = np.asarray(samples, dtype=float)
        arr = arr[np.isfinite(arr)]
        if arr.size == 0:
            raise EmptySample("no finite samples")
        return cls(np.sort(arr), int(censored_count))

    @classmethod
    def from_exit_times(cls, tau, horizon: float) -> "EmpiricalCdf":
        """NaN entries are censored-at-horizon exits."""
        arr = np.asarray(tau, dtype=float)
        cens = int(np.sum(~np.isfinite(arr)))
        fin = arr[np.isfinite(arr)]
        if fin.size == 0:
            raise EmptySample("every path was censored")
        return cls(np.sort(np.minimum(fin, horizon)), cens)

    @property
    def n_total(self) -> int:
        return self.sorted_samples.size + self.censored_count

    def evaluate(self, x) -> np.ndarray:
        idx = np.searchsorted(self.sorted_samples, np.asarray(x, dtype=float), side="right")
        return idx / self.n_total

    def grid(self) -> tuple[np.ndarray, np.ndarray]:
        """(x, F(x)) at the sample atoms, for CSV output."""
        return self.sorted_samples, self.evaluate(self.sorted_samples)


def ks_distance(a: EmpiricalCdf, b: EmpiricalCdf) -> float:
    """sup |F_a - F_b| over the pooled sample atoms (both one-sided limits)."""
    if a.sorted_samples.size == 0 or b.sorted_samples.size == 0:
        raise EmptySample("KS distance needs nonempty samples on both sides")
    pool = np.concatenate([a.sorted_samples, b.sorted_samples])
    right = np.max(np.abs(a.evaluate(pool) - b.evaluate(pool)))
    la = np.searchsorted(a.sorted_samples, pool, side="left") / a.n_total
    lb = np.searchsorted(b.sorted_samples, pool, side="left") / b.n_total
    left = np.max(np.abs(la - lb))
    return float(max(right, left))


def modulus_of_continuity(t: np.ndarray, f: np.ndarray, a: float, b: float | None = None) -> float:
    """sup |f(u) - f(v)| over |u - v| <= a, u, v in [0, b].

    Exact over the sample pairs (monotone-deque sliding window, linear time).
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    if b is not None:
        keep = t <= b + 1e-12
        t, f = t[keep], f[keep]
    if t.size < 2:
        return 0.0
    if a <= 0:
        return 0.0
    hi: deque[int] = deque()
    lo: deque[int] = deque()
    best = 0.0
    left = 0
    for i in range(t.size):
        while hi and f[hi[-1]] <= f[i]:
            hi.pop()
        hi.append(i)
        while lo and f[lo[-1]] >= f[i]:
            lo.pop()
        lo.append(i)
        while t[i] - t[left] > a:
            if hi[0] == left:
                hi.popleft()
            if lo[0] == left:
                lo.popleft()
            left += 1
        span = f[hi[0]] - f[lo[0]]
        if span > best:
            best = span
    return float(best)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float


def loglog_slope(eps: np.ndarray, err: np.ndarray) -> SlopeFit:
    """Least-squares slope of log(err) against log(eps)."""
    eps = np.asarray(eps, dtype=float)
    err = np.asarray(err, dtype=float)
    if eps.size < 3:
        raise ValueError("need at least 3 points for a rate fit")
    if np.any(eps <= 0) or np.any(err <= 0):
        raise NonPositiveData("rate fits need positive eps and errors")
    x, y = np.log(eps), np.log(err)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(slope=float(slope), intercept=float(intercept), r_squared=r2)
