"""Beta-grid sweep: one seeded simulation per candidate beta vector."""
from __future__ import annotations

import csv
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from ..config import SimConfig
from ..ransim import Simulator

log = logging.getLogger(__name__)

BetaVec = tuple[float, ...]


@dataclass(frozen=True)
class BetaGrid:
    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("beta grid is empty")
        if any(not 0.0 <= v <= 1.0 for v in vals):
            raise ValueError("beta grid values must lie in [0, 1]")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("beta grid values must be strictly increasing")
        object.__setattr__(self, "values", vals)

    def vectors(self, n_ues: int) -> Iterator[BetaVec]:
        return itertools.product(self.values, repeat=n_ues)

    def size(self, n_ues: int) -> int:
        return len(self.values) ** n_ues


class SweepError(RuntimeError):
    def __init__(self, betas: BetaVec, cause: Exception):
        super().__init__(f"sweep failed at beta vector {betas}: {cause}")
        self.betas = betas


@dataclass
class SweepDataset:
    window_ms: float
    samples: dict[BetaVec, np.ndarray] = field(default_factory=dict)
    config_hash: str = ""

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def grid_values(self) -> tuple[float, ...]:
        return tuple(sorted({b for vec in self.samples for b in vec}))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["beta_vec", "window", "ue", "throughput"])
            for vec, mat in self.samples.items():
                key = format_beta_vec(vec)
                for win, row in enumerate(mat):
                    for ue, v in enumerate(row):
                        w.writerow([key, win, ue, repr(float(v))])

    @classmethod
    def from_csv(cls, path, window_ms: float, config_hash: str = "") -> "SweepDataset":
        rows: dict[BetaVec, dict[int, dict[int, float]]] = {}
        with open(path, newline="") as fh:
            for r in csv.DictReader(fh):
                vec = parse_beta_vec(r["beta_vec"])
                rows.setdefault(vec, {}).setdefault(int(r["window"]), {})[int(r["ue"])] = float(r["throughput"])
        ds = cls(window_ms, config_hash=config_hash)
        for vec, wins in rows.items():
            ds.samples[vec] = np.array([[wins[w][u] for u in range(len(vec))] for w in sorted(wins)])
        return ds


def format_beta_vec(vec: Sequence[float]) -> str:
    return ";".join(repr(float(b)) for b in vec)


def parse_beta_vec(text: str) -> BetaVec:
    return tuple(float(x) for x in text.split(";"))


def simulate_windows(config: SimConfig, betas: Sequence[float], n_windows: int,
                     warmup_windows: int = 10, seed: int | None = None) -> np.ndarray:
    """Windowed throughput (Mbit/s) of a fresh cell run at fixed ``betas``."""
    sim = Simulator(config, betas, seed=seed)
    sim.advance((warmup_windows + n_windows) * config.ttis_per_window)
    return sim.window_matrix(warmup_windows)


def _sweep_one(args):
    config, vec, n_windows, warmup, seed = args
    try:
        return vec, simulate_windows(config, vec, n_windows, warmup, seed)
    except Exception as exc:  # noqa: BLE001 - re-raised with the beta vector attached
        raise SweepError(vec, exc) from exc


def run_sweep(grid: BetaGrid, config: SimConfig, n_windows: int = 200, warmup_windows: int = 10,
              seed: int | None = None, jobs: int = 1,
              progress: Callable[[int, int], None] | None = None) -> SweepDataset:
    """Simulate every vector of ``grid`` ** ``n_ues``.

    All vectors share the same seed (common random numbers), so differences
    between them come from the betas, not from channel draws.
    """
    if n_windows < 1:
        raise ValueError("n_windows must be >= 1")
    vecs = list(grid.vectors(config.n_ues))
    ds = SweepDataset(config.window_ms, config_hash=config.capacity_hash())
    work = [(config, v, n_windows, warmup_windows, seed) for v in vecs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = pool.map(_sweep_one, work, chunksize=8)
            for k, (vec, mat) in enumerate(results, 1):
                ds.samples[vec] = mat
                if progress:
                    progress(k, len(vecs))
    else:
        for k, item in enumerate(work, 1):
            vec, mat = _sweep_one(item)
            ds.samples[vec] = mat
            if progress:
                progress(k, len(vecs))
    log.info("swept %d beta vectors, %d windows each", len(vecs), n_windows)
    return ds
