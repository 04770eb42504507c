"""Experiment specs and the run-report files written by the CLI.

Spec file (TOML)::

    name = "priorities"
    sim_config = "sim.toml"        # relative to the spec file
    out_dir = "out/priorities"
    seed = 7                       # closed-loop and baseline runs
    select_seed = 3                # xApp's random pick among survivors
    q = 0.99
    beta_grid = [0.8, 0.85, 0.9, 0.95, 1.0]
    sweep_windows = 200
    warmup_windows = 10
    value_step = 0.1
    requirement_scale = 1.0
    tail_ms = 5000                 # run length after the last requirement

    [timing]
    xapp_processing_ms = 1.0
    control_delay_ms = 35.0

    [[requirements]]
    at_ms = 1000
    mbps = [3.0, 0.2, 0.2, 0.2]

    # or, instead of [[requirements]], an rApp-driven camera schedule:
    [camera]
    topology = "topology.json"     # optional; default is a 4-camera ring
    framing_rate = 2.0
    adjacent_rate = 1.0
    far_rate = 0.0
    schedule = [{at_ms = 1000, framing = "cam1"}, {at_ms = 6000, framing = "cam3"}]
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, SimConfig, load_config, tomllib
from .loop import LoopTiming, Requirement, RunResult, validate_schedule
from .rapp import CameraTopology, PriorityProfile, requirements_from_detection
from .xapp.evaluate import success_rate
from .xapp.sweep import BetaGrid


@dataclass
class ExperimentSpec:
    name: str
    sim: SimConfig
    out_dir: Path
    beta_grid: BetaGrid
    q: float = 0.99
    schedule: list[Requirement] = field(default_factory=list)
    seed: int = 7
    select_seed: int = 3
    sweep_windows: int = 200
    warmup_windows: int = 10
    value_step: float = 0.1
    tail_ms: float = 5000.0
    timing: LoopTiming = LoopTiming()
    framing: list[str] = field(default_factory=list)

    @property
    def duration_ms(self) -> float:
        last = self.schedule[-1].at_ms if self.schedule else 0.0
        return last + self.tail_ms

    @property
    def sweep_path(self) -> Path:
        return self.out_dir / "sweep.csv"

    @property
    def table_path(self) -> Path:
        return self.out_dir / "policy_table.json"


_SPEC_KEYS = {"name", "sim_config", "out_dir", "seed", "select_seed", "q", "beta_grid", "sweep_windows",
              "warmup_windows", "value_step", "requirement_scale", "tail_ms", "timing", "requirements",
              "camera"}


def load_spec(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read spec {path}: {exc}") from exc
    unknown = set(raw) - _SPEC_KEYS
    if unknown:
        raise ConfigError(f"unknown spec keys: {sorted(unknown)}")
    base = path.parent
    if "sim_config" not in raw:
        raise ConfigError("spec needs sim_config")
    sim = load_config(base / raw["sim_config"])
    scale = float(raw.get("requirement_scale", 1.0))

    schedule: list[Requirement] = []
    framing: list[str] = []
    if "requirements" in raw and "camera" in raw:
        raise ConfigError("use either [[requirements]] or [camera], not both")
    for r in raw.get("requirements", []):
        schedule.append(Requirement(float(r["at_ms"]), tuple(float(x) * scale for x in r["mbps"])))
    if "camera" in raw:
        cam = raw["camera"]
        topo = (CameraTopology.from_json(base / cam["topology"]) if "topology" in cam
                else CameraTopology.ring(sim.n_ues))
        if len(topo.cameras) != sim.n_ues:
            raise ConfigError(f"topology has {len(topo.cameras)} cameras for {sim.n_ues} UEs")
        try:
            profile = PriorityProfile(cam.get("framing_rate", 2.0), cam.get("adjacent_rate", 1.0),
                                      cam.get("far_rate", 0.0)).scaled(scale)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for item in cam.get("schedule", []):
            try:
                req = requirements_from_detection(item["framing"], topo, profile)
            except KeyError as exc:
                raise ConfigError(f"camera schedule: {exc}") from exc
            schedule.append(Requirement(float(item["at_ms"]), req))
            framing.append(item["framing"])
    try:
        validate_schedule(schedule, sim)
        grid = BetaGrid(tuple(raw.get("beta_grid", (0.8, 0.85, 0.9, 0.95, 1.0))))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    q = float(raw.get("q", 0.99))
    if not 0 < q <= 1:
        raise ConfigError("q must lie in (0, 1]")
    t = raw.get("timing", {})
    return ExperimentSpec(
        name=str(raw.get("name", path.stem)),
        sim=sim,
        out_dir=base / raw.get("out_dir", f"out/{path.stem}"),
        beta_grid=grid,
        q=q,
        schedule=schedule,
        seed=int(raw.get("seed", 7)),
        select_seed=int(raw.get("select_seed", 3)),
        sweep_windows=int(raw.get("sweep_windows", 200)),
        warmup_windows=int(raw.get("warmup_windows", 10)),
        value_step=float(raw.get("value_step", 0.1)),
        tail_ms=float(raw.get("tail_ms", 5000.0)),
        timing=LoopTiming(float(t.get("xapp_processing_ms", 1.0)), float(t.get("control_delay_ms", 35.0))),
        framing=framing,
    )


# -- run outputs -------------------------------------------------------------------

def write_run(result: RunResult, out: Path, extra: dict | None = None) -> dict:
    """Write ``throughput.csv``, ``windows.csv`` and ``report.json`` under ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "throughput.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window", "ue", "value_mbps"])
        for rec in result.windows:
            for ue, v in enumerate(rec.values):
                w.writerow([rec.index, ue, f"{v:.6f}"])
    with open(out / "windows.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window", "start_ms", "end_ms", "req_episode", "applied_episode", "betas"])
        for rec in result.windows:
            w.writerow([rec.index, rec.start_ms, rec.end_ms, rec.req_episode, rec.applied_episode,
                        ";".join(repr(b) for b in rec.betas)])
    episodes = []
    for e in result.episodes:
        k = e.kpis
        episodes.append({
            "episode": e.index, "at_ms": e.at_ms, "requirement": list(e.requirement),
            "betas": list(e.betas) if e.betas is not None else None, "survivors": e.survivors,
            "infeasible": e.infeasible, "applied_at": e.applied_at,
            "xapp_processing_time": k.xapp_processing_time if k else None,
            "control_loop_time": k.control_loop_time if k else None,
            "control_latency": k.control_latency if k else None,
        })
    report = {"v": 1, "config_hash": result.config.capacity_hash(), "window_ms": result.config.window_ms,
              "n_ues": result.config.n_ues, "episodes": episodes}
    if extra:
        report.update(extra)
    (out / "report.json").write_text(json.dumps(report, indent=1))
    return report


@dataclass
class LoadedRun:
    report: dict
    values: np.ndarray          # windows x UEs
    req_episode: np.ndarray
    applied_episode: np.ndarray

    def episode_windows(self, k: int, controlled: bool) -> np.ndarray:
        m = self.req_episode == k
        if controlled:
            m &= self.applied_episode == k
        return self.values[m]


def read_run(out: Path) -> LoadedRun:
    out = Path(out)
    report = json.loads((out / "report.json").read_text())
    n = report["n_ues"]
    vals: dict[int, list[float]] = {}
    with open(out / "throughput.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            vals.setdefault(int(row["window"]), [0.0] * n)[int(row["ue"])] = float(row["value_mbps"])
    req, app, order = [], [], []
    with open(out / "windows.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            order.append(int(row["window"]))
            req.append(int(row["req_episode"]))
            app.append(int(row["applied_episode"]))
    values = np.array([vals[w] for w in order]) if order else np.zeros((0, n))
    return LoadedRun(report, values, np.array(req, int), np.array(app, int))


def evaluate_runs(run: LoadedRun, baseline: LoadedRun) -> list[dict]:
    """Per-episode P_S (closed loop) and Delta P_S against the baseline run."""
    rows = []
    for ep in run.report["episodes"]:
        k = ep["episode"]
        req = ep["requirement"]
        mine = run.episode_windows(k, controlled=True)
        base = baseline.episode_windows(k, controlled=False)
        p_s = success_rate(req, mine) if len(mine) else None
        p_b = success_rate(req, base) if len(base) else None
        rows.append({"episode": k, "requirement": req, "betas": ep["betas"], "p_s": p_s,
                     "p_s_baseline": p_b,
                     "delta_p_s": None if p_s is None or p_b is None else p_s - p_b,
                     "windows": len(mine)})
    return rows
