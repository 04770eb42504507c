"""Deterministic discrete-time uplink cell simulator.

The per-TTI work (arrivals, greedy scheduling, buffer drain, denominator
update) runs in a compiled kernel; this module owns the clock, the random
channel draws, CBR arrival bookkeeping and the T_A measurement windows.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._kernel import run_ttis
from .config import SimConfig
from .sched import SchedulerParams


@dataclass(frozen=True)
class ThroughputSample:
    ue_id: int
    window_index: int
    value: float  # Mbit/s


@dataclass
class TtiReport:
    tti: int
    rbs_allocated: np.ndarray
    bits_served: np.ndarray
    buffer_level: np.ndarray


@dataclass
class Window:
    index: int
    start_ms: float
    end_ms: float
    bits: np.ndarray
    betas: tuple[float, ...] = ()
    tag: object = None

    def throughput_mbps(self, window_ms: float) -> np.ndarray:
        return self.bits / window_ms / 1000.0


class IncompleteWindowError(LookupError):
    pass


class Simulator:
    """One uplink cell.

    Parameters changed with :meth:`set_betas` take effect at the next TTI
    boundary. If the new vector differs from the active one and
    ``realign_windows`` is set, the current partial measurement window is
    dropped and a fresh T_A window starts at the boundary, so no published
    window ever spans two beta vectors.

    ``window_tag`` is an arbitrary caller label; each window stores the
    value it had when the window's first TTI ran.
    """

    def __init__(self, config: SimConfig, betas: Sequence[float] | None = None,
                 seed: int | None = None, record: bool = False, realign_windows: bool = True):
        self.config = config
        n = config.n_ues
        betas = tuple(betas) if betas is not None else (1.0,) * n
        if len(betas) != n:
            raise ValueError(f"expected {n} betas, got {len(betas)}")
        self.params = SchedulerParams(config.alpha, betas, config.d_init)
        self.rng = np.random.default_rng(config.seed if seed is None else seed)
        self.record = record
        self.realign_windows = realign_windows

        self.tti = 0
        self.buffer = np.zeros(n, np.int64)
        self.d = np.full(n, config.d_init)
        self.saturated = np.array([src.saturated for src in config.traffic])
        self._rate_bpms = np.array([0.0 if src.saturated else src.rate_mbps * 1000.0
                                    for src in config.traffic])
        self._base = np.array([c.bits_per_rb for c in config.channels], np.float64)
        self._sigma = np.array([c.sigma if c.model == "lognormal" else 0.0 for c in config.channels])
        if config.theta_mode == "requested":
            self._theta_req = np.array(config.requested_mbps, np.float64) * 1000.0
        else:
            self._theta_req = np.zeros(n)

        self.cum_arrived = np.zeros(n, np.int64)
        self.cum_served = np.zeros(n, np.int64)
        self.windows: list[Window] = []
        self._win_start_tti = 0
        self._win_bits = np.zeros(n, np.int64)
        self._history: list[tuple[np.ndarray, ...]] = []
        self.window_tag: object = None
        self._win_open: tuple = ((), None)

    # -- clock ---------------------------------------------------------------
    @property
    def now_ms(self) -> float:
        return self.tti * self.config.tti_ms

    @property
    def betas(self) -> tuple[float, ...]:
        return self.params.betas

    def set_betas(self, betas: Sequence[float]) -> bool:
        """Swap the whole beta vector at the current TTI boundary.

        Returns True if the vector changed.
        """
        new = SchedulerParams(self.params.alpha, tuple(betas), self.params.d_init)
        if len(new.betas) != self.config.n_ues:
            raise ValueError(f"expected {self.config.n_ues} betas, got {len(new.betas)}")
        changed = new.betas != self.params.betas
        self.params = new
        if changed and self.realign_windows:
            self._win_start_tti = self.tti
            self._win_bits[:] = 0
        return changed

    # -- inputs ----------------------------------------------------------------
    def _channels(self, n_tti: int) -> np.ndarray:
        z = self.rng.standard_normal((n_tti, self.config.n_ues))
        return np.maximum(1, np.rint(self._base * np.exp(self._sigma * z))).astype(np.int64)

    def _packets_by(self, tti: np.ndarray) -> np.ndarray:
        # packets generated in [0, tti * tti_ms]
        t = tti[:, None] * self.config.tti_ms
        return np.floor(t * self._rate_bpms / self.config.packet_bits + 1e-9).astype(np.int64)

    def _arrivals(self, n_tti: int) -> np.ndarray:
        ticks = np.arange(self.tti, self.tti + n_tti + 1)
        counts = self._packets_by(ticks)
        arr = np.diff(counts, axis=0) * self.config.packet_bits
        arr[:, self.saturated] = 0
        return arr

    # -- stepping ---------------------------------------------------------------
    def _run(self, n_tti: int) -> tuple[np.ndarray, ...]:
        n = self.config.n_ues
        bprb = self._channels(n_tti)
        arrivals = self._arrivals(n_tti)
        rbs = np.zeros((n_tti, n), np.int64)
        bits = np.zeros((n_tti, n), np.int64)
        gamma = np.zeros((n_tti, n))
        d_out = np.zeros((n_tti, n))
        run_ttis(bprb, arrivals, self.buffer, self.saturated, self.d,
                 np.asarray(self.params.betas, np.float64), self._theta_req,
                 self.config.theta_mode == "requested", self.params.alpha,
                 self.config.n_rbs, float(self.config.tti_ms), rbs, bits, gamma, d_out)
        self.cum_arrived += arrivals.sum(axis=0)
        self.cum_served += bits.sum(axis=0)
        if self.record:
            self._history.append((bprb, rbs, bits, gamma, d_out, np.cumsum(arrivals, 0) - np.cumsum(bits, 0)))
        return rbs, bits

    def advance(self, n_tti: int) -> tuple[np.ndarray, np.ndarray]:
        """Run ``n_tti`` TTIs, closing every T_A window that completes.

        Returns the per-TTI RB and served-bit matrices.
        """
        if n_tti <= 0:
            n = self.config.n_ues
            return np.zeros((0, n), np.int64), np.zeros((0, n), np.int64)
        per_win = self.config.ttis_per_window
        out_rbs, out_bits = [], []
        left = n_tti
        while left:
            if self.tti == self._win_start_tti:
                self._win_open = (self.params.betas, self.window_tag)
            to_boundary = per_win - (self.tti - self._win_start_tti)
            chunk = min(left, to_boundary)
            rbs, bits = self._run(chunk)
            out_rbs.append(rbs)
            out_bits.append(bits)
            self._win_bits += bits.sum(axis=0)
            self.tti += chunk
            left -= chunk
            if self.tti - self._win_start_tti == per_win:
                self.windows.append(Window(len(self.windows), self._win_start_tti * self.config.tti_ms,
                                           self.now_ms, self._win_bits.copy(), *self._win_open))
                self._win_start_tti = self.tti
                self._win_bits[:] = 0
        return np.concatenate(out_rbs), np.concatenate(out_bits)

    def step_tti(self) -> TtiReport:
        tti = self.tti
        rbs, bits = self.advance(1)
        level = np.where(self.saturated, np.inf, self.buffer.astype(float))
        return TtiReport(tti, rbs[0], bits[0], level.copy())

    def run_until(self, t_ms: float) -> None:
        target = int(math.ceil(t_ms / self.config.tti_ms - 1e-9))
        self.advance(target - self.tti)

    # -- measurement ------------------------------------------------------------
    def measure_window(self, window_index: int) -> list[ThroughputSample]:
        if window_index < 0 or window_index >= len(self.windows):
            raise IncompleteWindowError(f"window {window_index} has not completed")
        w = self.windows[window_index]
        vals = w.throughput_mbps(self.config.window_ms)
        return [ThroughputSample(i, window_index, float(v)) for i, v in enumerate(vals)]

    def window_matrix(self, start: int = 0) -> np.ndarray:
        """Throughput (Mbit/s) of completed windows ``start:``, rows = windows."""
        ws = self.windows[start:]
        if not ws:
            return np.zeros((0, self.config.n_ues))
        return np.stack([w.bits for w in ws]) / self.config.window_ms / 1000.0

    @property
    def history(self) -> dict[str, np.ndarray]:
        if not self.record:
            raise RuntimeError("simulator was created with record=False")
        keys = ("bits_per_rb", "rbs", "bits", "gamma", "d", "arrived_minus_served")
        if not self._history:
            return {k: np.zeros((0, self.config.n_ues)) for k in keys}
        return {k: np.concatenate([h[j] for h in self._history]) for j, k in enumerate(keys)}


def write_samples_csv(path, rows: Iterable[ThroughputSample]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window", "ue", "value_mbps"])
        for s in rows:
            w.writerow([s.window_index, s.ue_id, f"{s.value:.6f}"])


def read_samples_csv(path) -> np.ndarray:
    """Inverse of :func:`write_samples_csv`: a windows x UEs matrix."""
    data: dict[int, dict[int, float]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            data.setdefault(int(row["window"]), {})[int(row["ue"])] = float(row["value_mbps"])
    if not data:
        return np.zeros((0, 0))
    n = max(len(v) for v in data.values())
    return np.array([[data[w][u] for u in range(n)] for w in sorted(data)])
