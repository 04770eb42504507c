"""Level sets of the empirical joint CCDF, realized as Pareto frontiers."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ccdf import JointCcdf

GRID_DECIMALS = 9


@dataclass(frozen=True)
class LevelSet:
    q: float
    points: np.ndarray  # (k, n_ues)

    def __len__(self) -> int:
        return len(self.points)


def uniform_grid(samples: np.ndarray, step: float) -> list[np.ndarray]:
    """Per-coordinate grid ``0, step, 2*step, ...`` reaching one step past the sample max."""
    samples = np.asarray(samples, dtype=float)
    axes = []
    for k in range(samples.shape[1]):
        top = max(float(samples[:, k].max()), 0.0)
        n = int(math.floor(round(top / step, GRID_DECIMALS))) + 2
        axes.append(np.round(np.arange(n) * step, GRID_DECIMALS))
    return axes


def extract_level_set(ccdf: JointCcdf, q: float, step: float = 0.1,
                      grid: Sequence[np.ndarray] | None = None) -> LevelSet:
    """Grid points with ``S >= q`` that no other such grid point dominates.

    On a step-function estimator the exact ``S == q`` set is generally
    empty; the frontier of the super-level set is the boundary that matters
    for guarantees. If every grid point reaches ``q`` the grid is too small
    to locate a boundary and the result is empty.
    """
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must lie in (0, 1], got {q}")
    axes = uniform_grid(ccdf.samples, step) if grid is None else [np.asarray(g, float) for g in grid]
    surv = ccdf.on_grid(axes)
    ok = surv >= q
    if ok.all():
        return LevelSet(q, np.zeros((0, ccdf.n_ues)))
    # S is monotone, so a point is maximal iff no single-axis successor qualifies
    maximal = ok.copy()
    for ax in range(ok.ndim):
        nxt = np.zeros_like(ok)
        src = [slice(None)] * ok.ndim
        dst = [slice(None)] * ok.ndim
        src[ax] = slice(1, None)
        dst[ax] = slice(0, -1)
        nxt[tuple(dst)] = ok[tuple(src)]
        maximal &= ~nxt
    idx = np.argwhere(maximal)
    pts = np.column_stack([axes[k][idx[:, k]] for k in range(ok.ndim)]) if len(idx) else \
        np.zeros((0, ccdf.n_ues))
    return LevelSet(q, pts)
