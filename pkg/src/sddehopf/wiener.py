"""Seeded, reusable Wiener increments.

A path is identified by (seed, dt, dims): the increment stream is the
standard-normal output of numpy's PCG64 generator scaled by sqrt(dt), so
identical parameters reproduce identical increments bit for bit.  Paths are
materialised lazily and cached, which lets one path drive several coupled
integrations.

Coarsening rule: the dt -> 2 dt path derived from a fine path sums adjacent
increment pairs (2i, 2i+1).  That is the defining rule, not a re-seeding; it
is what strong self-convergence studies rely on.
"""
from __future__ import annotations

import numpy as np

__all__ = ["WienerPath", "CoarsenedWienerPath", "ensemble_generators"]

_BLOCK = 8192


class WienerPath:
    """Lazily generated i.i.d. N(0, dt) increments, indexed by step."""

    def __init__(self, seed: int, dt: float, dims: int = 1):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.seed = int(seed)
        self.dt = float(dt)
        self.dims = int(dims)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))
        self._cache = np.empty((0, self.dims))

    def increments(self, start: int, count: int) -> np.ndarray:
        """Increments for steps [start, start + count); shape (count, dims)."""
        need = start + count
        if need > self._cache.shape[0]:
            grow = max(need - self._cache.shape[0], _BLOCK)
            fresh = self._gen.standard_normal((grow, self.dims)) * np.sqrt(self.dt)
            self._cache = np.concatenate([self._cache, fresh], axis=0)
        return self._cache[start : start + count]

    def cumulative(self, n: int) -> np.ndarray:
        """W at grid times 0, dt, ..., n*dt; shape (n+1, dims)."""
        w = np.zeros((n + 1, self.dims))
        np.cumsum(self.increments(0, n), axis=0, out=w[1:])
        return w

    def coarsen(self) -> "CoarsenedWienerPath":
        return CoarsenedWienerPath(self)


class CoarsenedWienerPath:
    """Pairwise-summed view of a finer path; dt doubles."""

    def __init__(self, fine: WienerPath):
        self.fine = fine
        self.seed = fine.seed
        self.dt = 2.0 * fine.dt
        self.dims = fine.dims

    def increments(self, start: int, count: int) -> np.ndarray:
        raw = self.fine.increments(2 * start, 2 * count)
        return raw[0::2] + raw[1::2]

    def coarsen(self) -> "CoarsenedWienerPath":
        return CoarsenedWienerPath(self)  # type: ignore[arg-type]


def ensemble_generators(base_seed: int, n_paths: int) -> list[np.random.Generator]:
    """One PCG64 stream per path, seeded base_seed + i.

    Path i of an ensemble consumes exactly the stream WienerPath(base_seed+i)
    would produce, so any single path can be re-run in isolation.
    """
    return [np.random.Generator(np.random.PCG64(base_seed + i)) for i in range(n_paths)]
