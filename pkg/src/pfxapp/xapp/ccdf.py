"""Empirical joint CCDF of per-UE throughput."""
from __future__ import annotations

from typing import Sequence

import numpy as np


def estimate_ccdf(samples: np.ndarray, phi: Sequence[float]) -> float:
    """Fraction of sample rows that meet or exceed ``phi`` in every coordinate."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise ValueError("need a non-empty (rows x UEs) sample matrix")
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (samples.shape[1],):
        raise ValueError(f"phi must have {samples.shape[1]} coordinates")
    hits = np.count_nonzero(np.all(samples >= phi, axis=1))
    return hits / samples.shape[0]


class JointCcdf:
    """Estimator ``S(phi)`` backed by a sample matrix (rows = T_A windows)."""

    def __init__(self, samples: np.ndarray):
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != 2 or samples.shape[0] == 0:
            raise ValueError("need a non-empty (rows x UEs) sample matrix")
        self.samples = samples

    @property
    def n_ues(self) -> int:
        return self.samples.shape[1]

    def __call__(self, phi: Sequence[float]) -> float:
        return estimate_ccdf(self.samples, phi)

    def on_grid(self, grid: Sequence[np.ndarray]) -> np.ndarray:
        """Evaluate S at every point of a product grid.

        ``grid[k]`` holds the strictly increasing evaluation values of
        coordinate ``k``. Returns an array of shape ``tuple(len(g) for g in grid)``.

        Rows are binned by the highest grid value they reach in each
        coordinate; suffix sums over the histogram then count, for each grid
        point, the rows dominating it.
        """
        if len(grid) != self.n_ues:
            raise ValueError(f"grid must have {self.n_ues} axes")
        shape = tuple(len(g) for g in grid)
        idx = np.empty(self.samples.shape, dtype=np.int64)
        for k, g in enumerate(grid):
            g = np.asarray(g, dtype=float)
            if g.ndim != 1 or len(g) == 0 or np.any(np.diff(g) <= 0):
                raise ValueError(f"grid axis {k} must be non-empty and strictly increasing")
            idx[:, k] = np.searchsorted(g, self.samples[:, k], side="right") - 1
        keep = np.all(idx >= 0, axis=1)
        hist = np.zeros(shape, dtype=np.int64)
        np.add.at(hist, tuple(idx[keep].T), 1)
        counts = hist
        for ax in range(self.n_ues):
            counts = np.flip(np.cumsum(np.flip(counts, ax), axis=ax), ax)
        return counts / self.samples.shape[0]
