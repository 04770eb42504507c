"""Minimal E2-style messaging between the DU agent and the RIC.

Messages travel either through an in-process delay line on the simulation
clock (:class:`InProcLink`) or as newline-delimited JSON frames over a local
stream socket (:class:`SocketLink`). Frame schema, version 1::

    {"v": 1, "type": "indication", "seq": 3, "timestamp": 150.0,
     "window_index": 2, "samples": [[0, 2.41], [1, 0.62], ...]}
    {"v": 1, "type": "control", "seq": 1, "issued_at": 37.0, "betas": [0.8, 0.95, 0.95, 0.95]}
    {"v": 1, "type": "requirement", "seq": 1, "timestamp": 0.0, "requirement": [3.0, 0.2, 0.2, 0.2]}
    {"v": 1, "type": "stop"}

Timestamps are simulation milliseconds.
"""
from __future__ import annotations

import heapq
import itertools
import json
import socket
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .ransim import Simulator, Window

FRAME_VERSION = 1
SAMPLE_TOL = 1e-9


class ControlRejected(ValueError):
    pass


class FrameError(ValueError):
    pass


@dataclass(frozen=True)
class IndicationMessage:
    seq: int
    timestamp: float
    window_index: int
    samples: tuple[tuple[int, float], ...]

    def values(self) -> list[float]:
        return [v for _, v in sorted(self.samples)]


@dataclass(frozen=True)
class ControlMessage:
    seq: int
    issued_at: float
    betas: tuple[float, ...]

    def validate(self, n_ues: int) -> None:
        if len(self.betas) != n_ues:
            raise ControlRejected(f"control {self.seq}: {len(self.betas)} betas for a {n_ues}-UE cell")
        for b in self.betas:
            if not 0.0 <= b <= 1.0:
                raise ControlRejected(f"control {self.seq}: beta {b} outside [0, 1]")


@dataclass(frozen=True)
class RequirementMessage:
    seq: int
    timestamp: float
    requirement: tuple[float, ...]


@dataclass(frozen=True)
class Ack:
    seq: int
    applied_at: float
    changed: bool


def publish_indication(seq: int, window: Window, window_ms: float) -> IndicationMessage:
    vals = window.throughput_mbps(window_ms)
    return IndicationMessage(seq, window.end_ms, window.index,
                             tuple((i, float(v)) for i, v in enumerate(vals)))


def apply_control(msg: ControlMessage, sim: Simulator) -> Ack:
    """Validate and install ``msg.betas``; they govern every TTI from now on."""
    msg.validate(sim.config.n_ues)
    changed = sim.set_betas(msg.betas)
    return Ack(msg.seq, sim.now_ms, changed)


class DuAgent:
    """DU side: turns completed T_A windows into indications and applies controls."""

    def __init__(self, sim: Simulator):
        self.sim = sim
        self._seq = itertools.count(1)
        self._published = 0

    def poll_indications(self) -> list[IndicationMessage]:
        out = []
        while self._published < len(self.sim.windows):
            w = self.sim.windows[self._published]
            out.append(publish_indication(next(self._seq), w, self.sim.config.window_ms))
            self._published += 1
        return out

    def apply(self, msg: ControlMessage) -> Ack:
        return apply_control(msg, self.sim)


# -- transports -----------------------------------------------------------------

class InProcLink:
    """One-way delay line keyed on simulation time."""

    def __init__(self, delay_ms: float = 0.0):
        self.delay_ms = delay_ms
        self._heap: list = []
        self._order = itertools.count()

    def send(self, msg, now_ms: float) -> float:
        due = now_ms + self.delay_ms
        heapq.heappush(self._heap, (due, next(self._order), msg))
        return due

    def next_due(self) -> float | None:
        return self._heap[0][0] if self._heap else None

    def receive(self, now_ms: float) -> list:
        out = []
        while self._heap and self._heap[0][0] <= now_ms + 1e-9:
            out.append(heapq.heappop(self._heap)[2])
        return out

    def __len__(self) -> int:
        return len(self._heap)


def encode_frame(msg) -> bytes:
    if isinstance(msg, IndicationMessage):
        doc = {"type": "indication", "seq": msg.seq, "timestamp": msg.timestamp,
               "window_index": msg.window_index, "samples": [list(s) for s in msg.samples]}
    elif isinstance(msg, ControlMessage):
        doc = {"type": "control", "seq": msg.seq, "issued_at": msg.issued_at, "betas": list(msg.betas)}
    elif isinstance(msg, RequirementMessage):
        doc = {"type": "requirement", "seq": msg.seq, "timestamp": msg.timestamp,
               "requirement": list(msg.requirement)}
    elif msg is None:
        doc = {"type": "stop"}
    else:
        raise TypeError(f"cannot encode {type(msg).__name__}")
    return (json.dumps({"v": FRAME_VERSION, **doc}) + "\n").encode()


def decode_frame(line: bytes | str):
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise FrameError(f"malformed frame: {exc}") from exc
    if doc.get("v") != FRAME_VERSION:
        raise FrameError(f"unsupported frame version {doc.get('v')!r}")
    kind = doc.get("type")
    try:
        if kind == "indication":
            return IndicationMessage(int(doc["seq"]), float(doc["timestamp"]), int(doc["window_index"]),
                                     tuple((int(u), float(v)) for u, v in doc["samples"]))
        if kind == "control":
            return ControlMessage(int(doc["seq"]), float(doc["issued_at"]),
                                  tuple(float(b) for b in doc["betas"]))
        if kind == "requirement":
            return RequirementMessage(int(doc["seq"]), float(doc["timestamp"]),
                                      tuple(float(r) for r in doc["requirement"]))
        if kind == "stop":
            return None
    except (KeyError, TypeError, ValueError) as exc:
        raise FrameError(f"bad {kind} frame: {exc}") from exc
    raise FrameError(f"unknown frame type {kind!r}")


class SocketLink:
    """Bidirectional frame stream over a connected stream socket."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._rfile = sock.makefile("rb")

    def send(self, msg) -> None:
        self.sock.sendall(encode_frame(msg))

    def receive(self):
        line = self._rfile.readline()
        if not line:
            raise EOFError("peer closed the link")
        return decode_frame(line)

    def close(self) -> None:
        self._rfile.close()
        self.sock.close()


# -- KPI bookkeeping -------------------------------------------------------------

@dataclass(frozen=True)
class Event:
    kind: str  # requirement | betas_selected | control_applied | sample
    t_ms: float
    episode: int
    data: tuple = ()


@dataclass
class EventLog:
    events: list[Event] = field(default_factory=list)

    def add(self, kind: str, t_ms: float, episode: int, data: Iterable = ()) -> None:
        self.events.append(Event(kind, float(t_ms), episode, tuple(data)))

    def episode(self, k: int) -> list[Event]:
        return [e for e in self.events if e.episode == k]

    def episodes(self) -> list[int]:
        return sorted({e.episode for e in self.events})


@dataclass(frozen=True)
class LoopKpis:
    xapp_processing_time: float | None
    control_loop_time: float | None
    control_latency: float | None


def _first(events: Sequence[Event], kind: str) -> Event | None:
    return next((e for e in events if e.kind == kind), None)


def measure_kpis(events: Sequence[Event]) -> LoopKpis:
    """Durations of one requirement episode, all relative to the requirement.

    Processing time ends when the xApp has its beta vector; the loop time
    ends when the DU applies it; latency ends with the first window, closing
    after the application, whose throughput meets the requirement for every
    UE. Anything that never happened is ``None``.
    """
    req = _first(events, "requirement")
    if req is None:
        raise ValueError("episode has no requirement event")
    t0 = req.t_ms
    sel = _first(events, "betas_selected")
    app = _first(events, "control_applied")
    proc = sel.t_ms - t0 if sel else None
    loop = app.t_ms - t0 if app else None
    latency = None
    if app is not None:
        for e in sorted((e for e in events if e.kind == "sample"), key=lambda e: e.t_ms):
            if e.t_ms > app.t_ms and all(v >= r - SAMPLE_TOL for v, r in zip(e.data, req.data)):
                latency = e.t_ms - t0
                break
    return LoopKpis(proc, loop, latency)
