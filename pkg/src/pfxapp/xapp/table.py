"""Requirement -> beta policy table and the runtime query filters."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .ccdf import JointCcdf
from .levelset import GRID_DECIMALS, extract_level_set
from .sweep import BetaVec, SweepDataset

TABLE_FORMAT = "pfxapp-policy-table"
TABLE_VERSION = 1
REQ_TOL = 1e-9


class InfeasibleRequirement(ValueError):
    def __init__(self, message: str, coordinate: int | None = None, shortfall: float = 0.0):
        super().__init__(message)
        self.coordinate = coordinate
        self.shortfall = shortfall


class StaleTableError(ValueError):
    pass


@dataclass
class PolicyTable:
    q: float
    beta_grid: tuple[float, ...]
    window_ms: float
    config_hash: str
    n_ues: int
    value_step: float = 0.1
    entries: dict[tuple[float, ...], list[BetaVec]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, key: Sequence[float], betas: BetaVec) -> None:
        k = tuple(round(float(v), GRID_DECIMALS) for v in key)
        bucket = self.entries.setdefault(k, [])
        if betas not in bucket:
            bucket.append(betas)

    def key_matrix(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, self.n_ues))
        return np.array(list(self.entries.keys()), dtype=float)

    def check_compatible(self, config_hash: str) -> None:
        if config_hash != self.config_hash:
            raise StaleTableError(
                f"policy table was built for config {self.config_hash}, current config is {config_hash}; "
                "rebuild the table with build-table")

    def save(self, path: str | Path) -> None:
        doc = {
            "format": TABLE_FORMAT,
            "v": TABLE_VERSION,
            "q": self.q,
            "beta_grid": list(self.beta_grid),
            "window_ms": self.window_ms,
            "config_hash": self.config_hash,
            "n_ues": self.n_ues,
            "value_step": self.value_step,
            "entries": [{"key": list(k), "betas": [list(b) for b in v]} for k, v in self.entries.items()],
        }
        Path(path).write_text(json.dumps(doc, indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "PolicyTable":
        doc = json.loads(Path(path).read_text())
        if doc.get("format") != TABLE_FORMAT:
            raise ValueError(f"{path} is not a policy table")
        if doc.get("v") != TABLE_VERSION:
            raise ValueError(f"unsupported policy table version {doc.get('v')}")
        table = cls(doc["q"], tuple(doc["beta_grid"]), doc["window_ms"], doc["config_hash"],
                    doc["n_ues"], doc.get("value_step", 0.1))
        for e in doc["entries"]:
            for b in e["betas"]:
                table.add(e["key"], tuple(float(x) for x in b))
        return table


def build_policy_table(dataset: SweepDataset, q: float, value_step: float = 0.1) -> PolicyTable:
    """Insert every level-set point of every swept beta vector.

    A key reached by several beta vectors keeps all of them; the query
    filters choose later.
    """
    if not dataset.samples:
        raise ValueError("empty sweep dataset")
    n_ues = len(next(iter(dataset.samples)))
    table = PolicyTable(q, dataset.grid_values, dataset.window_ms, dataset.config_hash, n_ues, value_step)
    for vec, mat in dataset.samples.items():
        level = extract_level_set(JointCcdf(mat), q, step=value_step)
        for point in level.points:
            table.add(point, vec)
    return table


def passes_equality_filter(req: Sequence[float], betas: Sequence[float]) -> bool:
    """Equal requirements must map to equal betas."""
    n = len(req)
    for i in range(n):
        for j in range(i + 1, n):
            if abs(req[i] - req[j]) <= REQ_TOL and betas[i] != betas[j]:
                return False
    return True


def passes_order_filter(req: Sequence[float], betas: Sequence[float]) -> bool:
    """A strictly larger requirement never gets a strictly larger beta."""
    n = len(req)
    for i in range(n):
        for j in range(n):
            if req[i] < req[j] - REQ_TOL and betas[i] < betas[j]:
                return False
    return True


@dataclass(frozen=True)
class QueryResult:
    requirement: tuple[float, ...]
    betas: BetaVec
    survivors: int
    seed: int | None

    def to_dict(self) -> dict:
        return {"requirement": list(self.requirement), "betas": list(self.betas),
                "survivors": self.survivors, "seed": self.seed}


def candidates(table: PolicyTable, requirement: Sequence[float]) -> list[BetaVec]:
    """Beta vectors under keys that dominate ``requirement``, sorted."""
    keys = table.key_matrix()
    req = np.asarray(requirement, dtype=float)
    mask = np.all(keys >= req - REQ_TOL, axis=1)
    found: set[BetaVec] = set()
    for k, hit in zip(table.entries, mask):
        if hit:
            found.update(table.entries[k])
    return sorted(found)


def select_betas(table: PolicyTable, requirement: Sequence[float], seed: int | None = None,
                 rng: np.random.Generator | None = None) -> QueryResult:
    """Pick a beta vector guaranteed (at level q) to meet ``requirement``.

    Keys that fall short of the requirement in any coordinate are dropped,
    the equality and ordering filters prune the remaining beta vectors, and
    one survivor is drawn uniformly with ``rng`` (or a generator seeded
    with ``seed``).
    """
    req = tuple(float(x) for x in requirement)
    if len(req) != table.n_ues:
        raise ValueError(f"requirement needs {table.n_ues} entries, got {len(req)}")
    if any(x < 0 for x in req):
        raise ValueError("requirements must be non-negative")
    if not table.entries:
        raise InfeasibleRequirement("policy table is empty")
    cands = candidates(table, req)
    if not cands:
        keys = table.key_matrix()
        short = np.maximum(np.asarray(req) - keys, 0.0)
        best = int(np.argmin(short.max(axis=1)))
        coord = int(np.argmax(short[best]))
        raise InfeasibleRequirement(
            f"no table entry meets requirement {list(req)}; UE {coord} falls short by at least "
            f"{short[best, coord]:.3f} Mbit/s", coord, float(short[best, coord]))
    survivors = [b for b in cands if passes_equality_filter(req, b) and passes_order_filter(req, b)]
    if not survivors:
        raise InfeasibleRequirement(
            f"{len(cands)} beta vectors meet requirement {list(req)} but none satisfies the "
            "equal-requirement and ordering filters")
    if rng is None:
        rng = np.random.default_rng(seed)
    pick = survivors[int(rng.integers(len(survivors)))]
    return QueryResult(req, pick, len(survivors), seed)
