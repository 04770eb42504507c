"""Application-side enrichment: F1-vs-bitrate model and camera priorities."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

# no detection below 0.1 Mbit/s, F1 = 0.95 at 10 Mbit/s
DEFAULT_ANCHOR_LO = (0.1, 0.0)
DEFAULT_ANCHOR_HI = (10.0, 0.95)
# rounding slack when inverting exactly at an anchor
ANCHOR_SLACK = 1e-12


class F1RangeError(ValueError):
    pass


@dataclass(frozen=True)
class F1Model:
    """``f1(x) = a * x**b + c`` on bitrates ``[x_lo, x_hi]`` (Mbit/s)."""

    a: float
    b: float
    c: float
    x_lo: float = DEFAULT_ANCHOR_LO[0]
    x_hi: float = DEFAULT_ANCHOR_HI[0]

    def raw(self, x):
        return self.a * np.power(x, self.b) + self.c

    def bitrate_to_f1(self, x: float) -> float:
        if not self.x_lo <= x <= self.x_hi:
            raise F1RangeError(f"bitrate {x} outside model domain [{self.x_lo}, {self.x_hi}]")
        return float(min(max(self.raw(x), 0.0), 1.0))

    def f1_to_bitrate(self, y: float) -> float:
        lo, hi = sorted((self.raw(self.x_lo), self.raw(self.x_hi)))
        if not lo - ANCHOR_SLACK <= y <= hi + ANCHOR_SLACK:
            raise F1RangeError(f"F1 {y} outside achievable range [{lo}, {hi}]")
        x = ((y - self.c) / self.a) ** (1.0 / self.b)
        return float(min(max(x, self.x_lo), self.x_hi))

    def f1_of_throughput(self, x) -> np.ndarray:
        """F1 for measured throughput, clipping bitrates into the model domain."""
        x = np.clip(np.asarray(x, dtype=float), self.x_lo, self.x_hi)
        return np.clip(self.raw(x), 0.0, 1.0)


def fit_model(b: float, anchor_lo: tuple[float, float] = DEFAULT_ANCHOR_LO,
              anchor_hi: tuple[float, float] = DEFAULT_ANCHOR_HI) -> F1Model:
    """Solve for ``a`` and ``c`` so the curve passes through both anchors."""
    if b == 0:
        raise ValueError("b = 0 makes x**b constant; the model is undefined there")
    (x0, y0), (x1, y1) = anchor_lo, anchor_hi
    if x0 <= 0 or x1 <= 0:
        raise ValueError("anchor bitrates must be positive")
    if x0 == x1:
        raise ValueError("anchors need distinct bitrates")
    p0, p1 = x0 ** b, x1 ** b
    a = (y1 - y0) / (p1 - p0)
    c = y0 - a * p0
    return F1Model(a, b, c, min(x0, x1), max(x0, x1))


def f1_curves(b_values: Iterable[float], bitrates: Sequence[float],
              anchor_lo=DEFAULT_ANCHOR_LO, anchor_hi=DEFAULT_ANCHOR_HI) -> list[tuple[float, float, float]]:
    rows = []
    for b in b_values:
        model = fit_model(b, anchor_lo, anchor_hi)
        rows.extend((b, float(x), model.bitrate_to_f1(float(x))) for x in bitrates)
    return rows


def write_curves_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["b", "x", "f1"])
        for b, x, y in rows:
            w.writerow([repr(round(float(b), 12)), repr(float(x)), repr(float(y))])


@dataclass(frozen=True)
class PriorityProfile:
    framing_rate: float = 2.0
    adjacent_rate: float = 1.0
    far_rate: float = 0.0

    def __post_init__(self):
        if not self.framing_rate >= self.adjacent_rate >= self.far_rate >= 0:
            raise ValueError("profile needs framing >= adjacent >= far >= 0")

    def scaled(self, factor: float) -> "PriorityProfile":
        return PriorityProfile(self.framing_rate * factor, self.adjacent_rate * factor,
                               self.far_rate * factor)


@dataclass(frozen=True)
class CameraTopology:
    cameras: tuple[str, ...]
    adjacent: Mapping[str, tuple[str, ...]]
    opposite: Mapping[str, str]

    def __post_init__(self):
        known = set(self.cameras)
        for cam in self.cameras:
            if cam not in self.adjacent or cam not in self.opposite:
                raise ValueError(f"camera {cam} lacks adjacency or opposite entry")
            if not set(self.adjacent[cam]) <= known or self.opposite[cam] not in known:
                raise ValueError(f"camera {cam} references an unknown camera")

    @classmethod
    def ring(cls, n: int = 4, prefix: str = "cam") -> "CameraTopology":
        """Cameras at the corners of a sector, numbered around the perimeter."""
        if n < 4 or n % 2:
            raise ValueError("ring topology needs an even number of cameras >= 4")
        cams = tuple(f"{prefix}{i + 1}" for i in range(n))
        adj = {c: (cams[(i - 1) % n], cams[(i + 1) % n]) for i, c in enumerate(cams)}
        opp = {c: cams[(i + n // 2) % n] for i, c in enumerate(cams)}
        return cls(cams, adj, opp)

    @classmethod
    def from_json(cls, path: str | Path) -> "CameraTopology":
        doc = json.loads(Path(path).read_text())
        return cls(tuple(doc["cameras"]), {k: tuple(v) for k, v in doc["adjacent"].items()},
                   dict(doc["opposite"]))

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps({
            "cameras": list(self.cameras),
            "adjacent": {k: list(v) for k, v in self.adjacent.items()},
            "opposite": dict(self.opposite)}, indent=1))


def requirements_from_detection(framing: str, topology: CameraTopology,
                                profile: PriorityProfile = PriorityProfile()) -> tuple[float, ...]:
    """Per-camera throughput requirement (Mbit/s), ordered as ``topology.cameras``.

    Cameras that are neither the framing one nor its neighbours get the far
    rate, which at 0 means "no guarantee".
    """
    if framing not in topology.cameras:
        raise KeyError(f"unknown camera {framing!r}")
    near = set(topology.adjacent[framing])
    req = []
    for cam in topology.cameras:
        if cam == framing:
            req.append(profile.framing_rate)
        elif cam in near:
            req.append(profile.adjacent_rate)
        else:
            req.append(profile.far_rate)
    return tuple(req)
