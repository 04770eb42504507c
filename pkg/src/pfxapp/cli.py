"""Command line entry point: ``pfxapp {sweep,build-table,run,eval,curves}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError
from .experiment import ExperimentSpec, evaluate_runs, load_spec, read_run, write_run
from .loop import run_closed_loop
from .rapp import DEFAULT_ANCHOR_HI, DEFAULT_ANCHOR_LO, f1_curves, write_curves_csv
from .xapp.sweep import SweepDataset, run_sweep
from .xapp.table import PolicyTable, StaleTableError, build_policy_table

log = logging.getLogger("pfxapp")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3


def cmd_sweep(spec: ExperimentSpec, jobs: int = 1) -> Path:
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    n = spec.beta_grid.size(spec.sim.n_ues)
    log.info("sweeping %d beta vectors x %d windows", n, spec.sweep_windows)

    def progress(k, total):
        if k % 50 == 0 or k == total:
            log.info("  %d/%d", k, total)

    ds = run_sweep(spec.beta_grid, spec.sim, spec.sweep_windows, spec.warmup_windows,
                   jobs=jobs, progress=progress)
    ds.to_csv(spec.sweep_path)
    return spec.sweep_path


def cmd_build(spec: ExperimentSpec, sweep_path: Path | None = None) -> Path:
    path = sweep_path or spec.sweep_path
    if not path.exists():
        raise ConfigError(f"no sweep dataset at {path}; run `pfxapp sweep` first")
    ds = SweepDataset.from_csv(path, spec.sim.window_ms, spec.sim.capacity_hash())
    table = build_policy_table(ds, spec.q, spec.value_step)
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    table.save(spec.table_path)
    log.info("policy table: %d keys from %d beta vectors", len(table), len(ds))
    return spec.table_path


def _mean(xs):
    xs = [x for x in xs if x is not None]
    return float(np.mean(xs)) if xs else None


def cmd_run(spec: ExperimentSpec, table_path: Path | None = None, forced_betas=None,
            transport: str = "inproc") -> dict:
    """Closed-loop run plus its all-ones baseline; returns the run report."""
    table = None
    if forced_betas is None:
        path = table_path or spec.table_path
        if not path.exists():
            raise ConfigError(f"no policy table at {path}; run `pfxapp build-table` first")
        table = PolicyTable.load(path)
        table.check_compatible(spec.sim.capacity_hash())
    kw = dict(seed=spec.seed, timing=spec.timing)
    result = run_closed_loop(spec.sim, spec.schedule, spec.duration_ms, table=table,
                             select_seed=spec.select_seed, forced_betas=forced_betas,
                             transport=transport, **kw)
    baseline = run_closed_loop(spec.sim, spec.schedule, spec.duration_ms, **kw)
    write_run(baseline, spec.out_dir / "baseline")
    write_run(result, spec.out_dir / "run")
    rows = evaluate_runs(read_run(spec.out_dir / "run"), read_run(spec.out_dir / "baseline"))
    kpis = [e.kpis for e in result.episodes]
    summary = {
        "throughput_csv": str(spec.out_dir / "run" / "throughput.csv"),
        "p_s": _mean(r["p_s"] for r in rows),
        "delta_p_s": _mean(r["delta_p_s"] for r in rows),
        "xapp_processing_time": _mean(k.xapp_processing_time for k in kpis),
        "control_loop_time": _mean(k.control_loop_time for k in kpis),
        "control_latency": _mean(k.control_latency for k in kpis),
        "xapp_wall_ms": _mean(e.wall_processing_ms for e in result.episodes),
        "transport": transport,
        "beta_history": [[e.at_ms, list(e.betas) if e.betas else None] for e in result.episodes],
        "episodes": rows,
        "infeasible": result.infeasible_count,
    }
    report = write_run(result, spec.out_dir / "run", {"summary": summary})
    return report


def cmd_eval(run_dir: Path, baseline_dir: Path, out: Path | None = None) -> list[dict]:
    rows = evaluate_runs(read_run(run_dir), read_run(baseline_dir))
    if out is not None:
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["episode", "requirement", "betas", "p_s", "p_s_baseline", "delta_p_s", "windows"])
            for r in rows:
                w.writerow([r["episode"], ";".join(map(str, r["requirement"])),
                            ";".join(map(str, r["betas"] or [])), r["p_s"], r["p_s_baseline"],
                            r["delta_p_s"], r["windows"]])
    return rows


def cmd_curves(b_values, x_min: float, x_max: float, points: int, out: Path,
               anchor_lo=DEFAULT_ANCHOR_LO, anchor_hi=DEFAULT_ANCHOR_HI) -> Path:
    xs = np.linspace(x_min, x_max, points)
    write_curves_csv(out, f1_curves(b_values, xs, anchor_lo, anchor_hi))
    return out


def default_b_values() -> list[float]:
    return [round(b, 1) for b in np.arange(-1.0, 1.0001, 0.2) if abs(b) > 1e-9]


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pfxapp", description="Tunable PF scheduler + xApp testbed")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    def with_spec(sp):
        sp.add_argument("spec", type=Path, help="experiment spec (TOML)")
        sp.add_argument("--seed", type=int, help="override the spec's run seed")
        sp.add_argument("--out-dir", type=Path, help="override the spec's output directory")
        return sp

    s = with_spec(sub.add_parser("sweep", help="simulate every beta vector of the grid"))
    s.add_argument("--jobs", type=int, default=1)
    b = with_spec(sub.add_parser("build-table", help="build the policy table from a sweep"))
    b.add_argument("--sweep", type=Path)
    r = with_spec(sub.add_parser("run", help="closed-loop run and baseline"))
    r.add_argument("--table", type=Path)
    r.add_argument("--force-betas", type=_parse_floats, help="bypass the xApp, e.g. 1,1,1,1")
    r.add_argument("--transport", choices=("inproc", "socket"), default="inproc")
    e = sub.add_parser("eval", help="success rate of a run against its baseline")
    e.add_argument("run_dir", type=Path)
    e.add_argument("baseline_dir", type=Path)
    e.add_argument("--out", type=Path)
    c = sub.add_parser("curves", help="F1-vs-bitrate curve family as CSV")
    c.add_argument("--b", type=_parse_floats, default=None, help="comma-separated b values")
    c.add_argument("--x-min", type=float, default=DEFAULT_ANCHOR_LO[0])
    c.add_argument("--x-max", type=float, default=DEFAULT_ANCHOR_HI[0])
    c.add_argument("--points", type=int, default=100)
    c.add_argument("--out", type=Path, default=Path("f1_curves.csv"))
    return p


def _spec_from_args(args) -> ExperimentSpec:
    spec = load_spec(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    if args.out_dir is not None:
        spec.out_dir = args.out_dir
    return spec


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        if args.cmd == "sweep":
            print(cmd_sweep(_spec_from_args(args), args.jobs))
        elif args.cmd == "build-table":
            print(cmd_build(_spec_from_args(args), args.sweep))
        elif args.cmd == "run":
            report = cmd_run(_spec_from_args(args), args.table, args.force_betas, args.transport)
            s = report["summary"]
            print(json.dumps({k: s[k] for k in ("p_s", "delta_p_s", "xapp_processing_time",
                                                "control_loop_time", "control_latency", "infeasible")}))
            if s["infeasible"]:
                return EXIT_INFEASIBLE
        elif args.cmd == "eval":
            rows = cmd_eval(args.run_dir, args.baseline_dir, args.out)
            for r in rows:
                p = "n/a" if r["p_s"] is None else f"{r['p_s']:.1f}"
                d = "n/a" if r["delta_p_s"] is None else f"{r['delta_p_s']:+.1f}"
                print(f"{r['episode']:3d}  req={r['requirement']}  betas={r['betas']}  P_S={p}  dP_S={d}")
            print(f"average P_S={_mean(r['p_s'] for r in rows)}  dP_S={_mean(r['delta_p_s'] for r in rows)}")
        elif args.cmd == "curves":
            b_values = args.b if args.b is not None else default_b_values()
            print(cmd_curves(b_values, args.x_min, args.x_max, args.points, args.out))
    except (ConfigError, StaleTableError, ValueError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
