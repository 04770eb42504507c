"""Closed-loop run: requirement schedule -> xApp -> E2 control -> scheduler."""
from __future__ import annotations

import logging
import math
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import SimConfig
from .e2lite import (ControlMessage, DuAgent, EventLog, InProcLink, LoopKpis, RequirementMessage,
                     SocketLink, measure_kpis)
from .ransim import Simulator
from .xapp.table import InfeasibleRequirement, PolicyTable, QueryResult, select_betas

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LoopTiming:
    """Simulated hop delays (ms). Controls land on the first TTI boundary after arrival."""

    xapp_processing_ms: float = 1.0
    control_delay_ms: float = 35.0


@dataclass(frozen=True)
class Requirement:
    at_ms: float
    mbps: tuple[float, ...]


@dataclass
class WindowRecord:
    index: int
    start_ms: float
    end_ms: float
    values: np.ndarray
    req_episode: int      # requirement in force when the window opened (-1: none yet)
    applied_episode: int  # episode whose control set the window's betas (-1: initial betas)
    betas: tuple[float, ...]


@dataclass
class EpisodeRecord:
    index: int
    at_ms: float
    requirement: tuple[float, ...]
    betas: tuple[float, ...] | None = None
    survivors: int = 0
    infeasible: str | None = None
    applied_at: float | None = None
    kpis: LoopKpis | None = None
    wall_processing_ms: float | None = None


@dataclass
class RunResult:
    config: SimConfig
    windows: list[WindowRecord] = field(default_factory=list)
    episodes: list[EpisodeRecord] = field(default_factory=list)
    events: EventLog = field(default_factory=EventLog)

    @property
    def infeasible_count(self) -> int:
        return sum(1 for e in self.episodes if e.infeasible)

    def matrix(self) -> np.ndarray:
        if not self.windows:
            return np.zeros((0, self.config.n_ues))
        return np.stack([w.values for w in self.windows])

    def episode_windows(self, k: int, controlled: bool = True) -> np.ndarray:
        """Windows judged against requirement ``k``.

        With ``controlled`` only windows run under episode ``k``'s own betas
        count; otherwise every window opened while requirement ``k`` was in
        force (the baseline view).
        """
        rows = [w.values for w in self.windows
                if w.req_episode == k and (not controlled or w.applied_episode == k)]
        return np.stack(rows) if rows else np.zeros((0, self.config.n_ues))


class XApp:
    """Policy-table lookup with a private, seeded random stream."""

    def __init__(self, table: PolicyTable, seed: int | None = None):
        self.table = table
        self.rng = np.random.default_rng(seed)
        self.indications = 0

    def select(self, requirement: Sequence[float]) -> QueryResult:
        return select_betas(self.table, requirement, rng=self.rng)


def serve_xapp(link: SocketLink, xapp: XApp, timing: LoopTiming = LoopTiming()) -> None:
    """RIC-side loop for the socket transport.

    Answers each requirement frame with a control frame; an empty beta list
    means the requirement is infeasible. Indication frames are only counted.
    Returns on a stop frame or EOF.
    """
    seq = 0
    while True:
        try:
            msg = link.receive()
        except EOFError:
            return
        if msg is None:
            return
        if isinstance(msg, RequirementMessage):
            seq += 1
            try:
                betas = xapp.select(msg.requirement).betas
            except InfeasibleRequirement:
                betas = ()
            link.send(ControlMessage(seq, msg.timestamp + timing.xapp_processing_ms, betas))
        else:
            xapp.indications += 1


def validate_schedule(schedule: Sequence[Requirement], config: SimConfig) -> None:
    last = -math.inf
    for r in schedule:
        if r.at_ms <= last:
            raise ValueError("requirement times must be strictly increasing")
        k = r.at_ms / config.window_ms
        if abs(k - round(k)) > 1e-9:
            raise ValueError(f"requirement at {r.at_ms} ms is not on a T_A boundary")
        if len(r.mbps) != config.n_ues:
            raise ValueError(f"requirement at {r.at_ms} ms has {len(r.mbps)} entries, expected {config.n_ues}")
        if any(x < 0 for x in r.mbps):
            raise ValueError(f"requirement at {r.at_ms} ms has a negative entry")
        last = r.at_ms


class _ClosedLoop:
    def __init__(self, config, schedule, duration_ms, table, seed, select_seed, timing,
                 forced_betas, transport):
        validate_schedule(schedule, config)
        if transport not in ("inproc", "socket"):
            raise ValueError(f"unknown transport {transport!r}")
        self.config = config
        self.pending = list(schedule)
        self.end_tti = int(round(duration_ms / config.tti_ms))
        self.timing = timing
        self.forced = tuple(float(b) for b in forced_betas) if forced_betas is not None else None
        self.sim = Simulator(config, (1.0,) * config.n_ues, seed=seed)
        self.du = DuAgent(self.sim)
        self.link = InProcLink(timing.control_delay_ms)
        self.xapp = XApp(table, select_seed) if table is not None else None
        self.controlled = table is not None or self.forced is not None
        self.result = RunResult(config)
        self.episode = -1
        self.applied_episode = -1
        self.seq = 0
        self.sock = None
        if transport == "socket" and self.xapp is not None and self.forced is None:
            a, b = socket.socketpair()
            self.sock = (SocketLink(a), SocketLink(b))
            self.ric = threading.Thread(target=serve_xapp, args=(self.sock[1], self.xapp, timing),
                                        daemon=True)
            self.ric.start()

    def _retag(self):
        self.sim.window_tag = (self.episode, self.applied_episode)

    def _boundary(self, t_ms: float) -> int:
        return min(int(math.ceil(t_ms / self.config.tti_ms - 1e-9)), self.end_tti)

    def _run_to(self, tti: int):
        self.sim.advance(tti - self.sim.tti)
        ev = self.result.events
        for ind in self.du.poll_indications():
            w = self.sim.windows[ind.window_index]
            req_ep, app_ep = w.tag
            self.result.windows.append(WindowRecord(w.index, w.start_ms, w.end_ms,
                                                    w.throughput_mbps(self.config.window_ms),
                                                    req_ep, app_ep, w.betas))
            # a sample belongs to the episode whose requirement was current when it was reported
            ev.add("sample", ind.timestamp, self.episode, ind.values())

    def _deliver_controls(self):
        for ep, msg in self.link.receive(self.sim.now_ms):
            ack = self.du.apply(msg)
            self.applied_episode = ep
            self._retag()
            self.result.episodes[ep].applied_at = ack.applied_at
            self.result.events.add("control_applied", ack.applied_at, ep, msg.betas)

    def _select(self, req: Requirement) -> tuple[tuple[float, ...], int, float]:
        t_sel = req.at_ms + self.timing.xapp_processing_ms
        if self.forced is not None:
            return self.forced, 1, t_sel
        if self.sock is not None:
            du_link = self.sock[0]
            du_link.send(RequirementMessage(self.episode + 1, req.at_ms, tuple(req.mbps)))
            reply = du_link.receive()
            if not reply.betas:
                raise InfeasibleRequirement("xApp reported the requirement infeasible")
            return reply.betas, 0, reply.issued_at
        res = self.xapp.select(req.mbps)
        return res.betas, res.survivors, t_sel

    def _new_requirements(self):
        ev = self.result.events
        while self.pending and self.pending[0].at_ms <= self.sim.now_ms + 1e-9:
            req = self.pending.pop(0)
            self.episode += 1
            self._retag()
            rec = EpisodeRecord(self.episode, req.at_ms, tuple(req.mbps))
            self.result.episodes.append(rec)
            ev.add("requirement", req.at_ms, self.episode, req.mbps)
            if not self.controlled:
                continue
            t0 = time.perf_counter()
            try:
                betas, survivors, t_sel = self._select(req)
            except InfeasibleRequirement as exc:
                rec.infeasible = str(exc)
                log.warning("episode %d: %s; keeping betas %s", self.episode, exc, self.sim.betas)
                continue
            finally:
                rec.wall_processing_ms = (time.perf_counter() - t0) * 1000.0
            rec.betas, rec.survivors = tuple(betas), survivors
            ev.add("betas_selected", t_sel, self.episode, betas)
            self.seq += 1
            self.link.send((self.episode, ControlMessage(self.seq, t_sel, tuple(betas))), t_sel)

    def run(self) -> RunResult:
        self._retag()
        try:
            while True:
                self._deliver_controls()
                self._new_requirements()
                t_req = self.pending[0].at_ms if self.pending else math.inf
                t_ctl = self.link.next_due()
                t_next = min(t_req, math.inf if t_ctl is None else t_ctl)
                target = self._boundary(t_next) if math.isfinite(t_next) else self.end_tti
                self._run_to(target)
                if self.sim.tti >= self.end_tti:
                    break
        finally:
            if self.sock is not None:
                self.sock[0].send(None)
                self.ric.join(timeout=5)
                for lk in self.sock:
                    lk.close()
        for rec in self.result.episodes:
            rec.kpis = measure_kpis(self.result.events.episode(rec.index))
        return self.result


def run_closed_loop(config: SimConfig, schedule: Sequence[Requirement], duration_ms: float,
                    table: PolicyTable | None = None, seed: int | None = None,
                    select_seed: int | None = None, timing: LoopTiming = LoopTiming(),
                    forced_betas: Sequence[float] | None = None, transport: str = "inproc") -> RunResult:
    """Drive one cell through ``schedule`` for ``duration_ms``.

    ``forced_betas`` bypasses the xApp and sends that vector for every
    requirement. With neither a table nor a forced vector the cell stays at
    its initial all-ones betas and no control is sent: the baseline.
    ``transport="socket"`` puts the xApp in a second thread behind a local
    socket pair; simulated timing is the same as in-process.
    """
    return _ClosedLoop(config, schedule, duration_ms, table, seed, select_seed, timing,
                       forced_betas, transport).run()
