"""Joint success rate of throughput requirements."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .table import REQ_TOL


@dataclass(frozen=True)
class SuccessReport:
    p_s: float          # percent
    p_s_baseline: float  # percent
    windows: int
    baseline_windows: int

    @property
    def delta(self) -> float:
        """Improvement over baseline, percentage points."""
        return self.p_s - self.p_s_baseline


def success_rate(requirements: Sequence[float] | np.ndarray, samples: np.ndarray) -> float:
    """Percent of windows in which every UE meets its requirement at once.

    ``requirements`` is either one vector for all windows or one row per window.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or len(samples) == 0:
        raise ValueError("need at least one window of samples")
    req = np.asarray(requirements, dtype=float)
    met = np.all(samples >= req - REQ_TOL, axis=1)
    return 100.0 * np.count_nonzero(met) / len(samples)


def evaluate_success(requirements, samples: np.ndarray, baseline_samples: np.ndarray,
                     baseline_requirements=None) -> SuccessReport:
    if baseline_requirements is None:
        baseline_requirements = requirements
    return SuccessReport(success_rate(requirements, samples),
                         success_rate(baseline_requirements, baseline_samples),
                         len(samples), len(baseline_samples))
