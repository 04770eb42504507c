"""Simulation configuration and its TOML loader.

Config file schema (all keys optional except ``n_ues``)::

    [sim]
    n_ues = 4
    tti_ms = 1.0
    n_rbs = 25
    window_ms = 50          # T_A, integer multiple of tti_ms
    duration_ms = 10000
    seed = 1
    alpha = 0.01
    d_init = 1.0
    theta_mode = "achievable"   # or "requested"
    packet_bits = 12000

    [traffic]
    # "saturated" or a Mbit/s rate; scalar applies to every UE, list is per UE
    rate_mbps = "saturated"
    requested_mbps = [2.0, 1.0, 1.0, 1.0]   # only read when theta_mode = "requested"

    [channel]
    bits_per_rb = 200       # scalar or per-UE list
    model = "lognormal"     # or "static"
    sigma = 0.3             # scalar or per-UE list
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelState:
    ue_id: int
    bits_per_rb: int = 200
    model: str = "lognormal"
    sigma: float = 0.3

    def __post_init__(self):
        if self.bits_per_rb < 1:
            raise ConfigError(f"UE {self.ue_id}: bits_per_rb must be >= 1")
        if self.model not in ("static", "lognormal"):
            raise ConfigError(f"UE {self.ue_id}: unknown channel model {self.model!r}")
        if self.sigma < 0:
            raise ConfigError(f"UE {self.ue_id}: sigma must be >= 0")


@dataclass(frozen=True)
class TrafficSource:
    """CBR source; ``rate_mbps=None`` means a saturated (full-buffer) UE."""

    ue_id: int
    rate_mbps: float | None = None

    @property
    def saturated(self) -> bool:
        return self.rate_mbps is None


@dataclass(frozen=True)
class SimConfig:
    n_ues: int = 4
    tti_ms: float = 1.0
    n_rbs: int = 25
    window_ms: float = 50.0
    duration_ms: float = 10_000.0
    seed: int = 1
    alpha: float = 0.01
    d_init: float = 1.0
    theta_mode: str = "achievable"
    packet_bits: int = 12_000
    traffic: tuple[TrafficSource, ...] = ()
    channels: tuple[ChannelState, ...] = ()
    requested_mbps: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n_ues < 1:
            raise ConfigError("n_ues must be >= 1")
        if self.n_rbs < 1:
            raise ConfigError("n_rbs must be >= 1")
        if self.tti_ms <= 0:
            raise ConfigError("tti_ms must be positive")
        ratio = self.window_ms / self.tti_ms
        if ratio < 1 or abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("window_ms must be a positive integer multiple of tti_ms")
        if self.duration_ms < self.window_ms:
            raise ConfigError("duration_ms must be >= window_ms")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if self.d_init <= 0:
            raise ConfigError("d_init must be positive")
        if self.theta_mode not in ("achievable", "requested"):
            raise ConfigError(f"unknown theta_mode {self.theta_mode!r}")
        if self.packet_bits < 1:
            raise ConfigError("packet_bits must be >= 1")
        if not self.traffic:
            object.__setattr__(self, "traffic", tuple(TrafficSource(i) for i in range(self.n_ues)))
        if not self.channels:
            object.__setattr__(self, "channels", tuple(ChannelState(i) for i in range(self.n_ues)))
        if len(self.traffic) != self.n_ues or len(self.channels) != self.n_ues:
            raise ConfigError("traffic and channel entries must match n_ues")
        for src in self.traffic:
            if src.rate_mbps is not None and src.rate_mbps < 0:
                raise ConfigError(f"UE {src.ue_id}: negative traffic rate")
        if self.theta_mode == "requested":
            if self.requested_mbps is None or len(self.requested_mbps) != self.n_ues:
                raise ConfigError("theta_mode='requested' needs requested_mbps for every UE")

    @property
    def ttis_per_window(self) -> int:
        return int(round(self.window_ms / self.tti_ms))

    @property
    def n_ttis(self) -> int:
        return int(round(self.duration_ms / self.tti_ms))

    @property
    def max_rate_mbps(self) -> float:
        """Upper bound on any windowed throughput sample, ignoring channel variation clamps."""
        return self.n_rbs * max(c.bits_per_rb for c in self.channels) / self.tti_ms / 1000.0

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def capacity_hash(self) -> str:
        """Digest of everything that shapes the throughput distribution except seeds and run length."""
        d = dataclasses.asdict(self)
        for k in ("seed", "duration_ms"):
            d.pop(k)
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _per_ue(value: Any, n: int, name: str) -> list:
    if isinstance(value, (list, tuple)):
        if len(value) != n:
            raise ConfigError(f"{name}: expected {n} entries, got {len(value)}")
        return list(value)
    return [value] * n


def config_from_dict(raw: dict) -> SimConfig:
    sim = dict(raw.get("sim", {}))
    unknown = set(sim) - {f.name for f in dataclasses.fields(SimConfig)}
    if unknown:
        raise ConfigError(f"unknown [sim] keys: {sorted(unknown)}")
    n = int(sim.get("n_ues", 4))
    traffic_raw = raw.get("traffic", {})
    rates = _per_ue(traffic_raw.get("rate_mbps", "saturated"), n, "traffic.rate_mbps")
    traffic = []
    for i, r in enumerate(rates):
        if isinstance(r, str):
            if r != "saturated":
                raise ConfigError(f"traffic.rate_mbps: bad value {r!r}")
            r = None
        traffic.append(TrafficSource(i, None if r is None else float(r)))
    requested = traffic_raw.get("requested_mbps")
    if requested is not None:
        requested = tuple(float(x) for x in _per_ue(requested, n, "traffic.requested_mbps"))

    ch = raw.get("channel", {})
    bprb = _per_ue(ch.get("bits_per_rb", 200), n, "channel.bits_per_rb")
    sigma = _per_ue(ch.get("sigma", 0.3), n, "channel.sigma")
    model = _per_ue(ch.get("model", "lognormal"), n, "channel.model")
    channels = tuple(ChannelState(i, int(bprb[i]), model[i], float(sigma[i])) for i in range(n))
    try:
        return SimConfig(traffic=tuple(traffic), channels=channels, requested_mbps=requested, **sim)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> SimConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(raw)


def uniform_config(n_ues: int = 4, *, bits_per_rb: int | Sequence[int] = 200, sigma: float = 0.3,
                   rate_mbps: float | None = None, **sim) -> SimConfig:
    """Convenience constructor: identical traffic and channel model for every UE."""
    bprb = _per_ue(bits_per_rb, n_ues, "bits_per_rb")
    model = "static" if sigma == 0 else "lognormal"
    return SimConfig(
        n_ues=n_ues,
        traffic=tuple(TrafficSource(i, rate_mbps) for i in range(n_ues)),
        channels=tuple(ChannelState(i, int(bprb[i]), model, sigma) for i in range(n_ues)),
        **sim,
    )

