"""Scenario execution and CSV emission for the command line front end."""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from bpc.config import Scenario, manifest_text
from bpc.control import hold_phase, run_global_strategy
from bpc.core import CoupledState, reconstruct_physical
from bpc.coupled import Termination, solve

TIMESERIES_COLUMNS = ("t", "h", "ell", "g", "l2_norm", "linf_norm", "energy", "jump")
REPORT_COLUMNS = ("name", "passed", "failed_phase", "T0", "T1", "T2", "h_T2", "ell_T2",
                  "h_error", "ell_abs", "u_linf", "u_l2", "tracking_h_error",
                  "tracking_ell_error", "message")

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


@dataclass
class Outcome:
    name: str
    status: int
    message: str
    report: dict | None = None


def fmt(value) -> str:
    """Full double precision, stable across runs."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return "" if value is None else str(value)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            values = [row.get(c) for c in columns] if isinstance(row, dict) else row
            w.writerow([fmt(v) for v in values])


def write_table(path: Path, columns, array: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in array:
            fh.write(",".join("%.17g" % v for v in row) + "\n")


def _timeseries(runs, decimate: int) -> np.ndarray:
    blocks = [np.column_stack([r.diagnostics[c] for c in TIMESERIES_COLUMNS]) for r in runs]
    table = np.vstack(blocks)
    if decimate > 1 and table.shape[0] > 1:
        keep = np.zeros(table.shape[0], dtype=bool)
        keep[::decimate] = True
        keep[-1] = True
        table = table[keep]
    return table


def _snapshot_name(t: float) -> str:
    return f"u_{t:g}.csv"


def _write_snapshots(outdir: Path, states, times, points: int) -> None:
    if not states:
        return
    ts = np.array([s.t for s in states])
    for t in times:
        k = int(np.searchsorted(ts, t - 1e-12, side="left"))
        k = min(k, len(states) - 1)
        write_table(outdir / _snapshot_name(t), ("x", "u"), reconstruct_physical(states[k], points))


def _report_row(name: str, rep) -> dict:
    final = rep.terminal_state
    c, info = rep.checks, rep.info
    return dict(name=name, passed=rep.passed, failed_phase=rep.failed_phase or "",
                T0=rep.T0, T1=rep.T1, T2=rep.T2,
                h_T2=final.h if final is not None else math.nan,
                ell_T2=final.ell if final is not None else math.nan,
                h_error=c.get("h_error", math.nan), ell_abs=c.get("ell_abs", math.nan),
                u_linf=c.get("u_linf", math.nan), u_l2=c.get("u_l2", math.nan),
                tracking_h_error=info.get("tracking_h_error", math.nan),
                tracking_ell_error=info.get("tracking_ell_error", math.nan),
                message=rep.message)


def run_scenario(sc: Scenario, outdir) -> Outcome:
    """Run one resolved scenario and write its files into ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "manifest.ini").write_text(manifest_text(sc), encoding="utf-8")
    try:
        u0 = sc.initial.build()
    except (OSError, ValueError) as exc:
        return Outcome(sc.name, EXIT_ERROR, f"initial data: {exc}")
    cfg = sc.sim

    if sc.mode == "strategy":
        rep = run_global_strategy(u0, sc.h0, sc.ell0, sc.h_target, sc.delta, cfg, sc.strategy)
        runs = [rep.phases[p] for p in ("smoothing", "tracking", "hold") if p in rep.phases]
        if runs:
            write_table(outdir / "timeseries.csv", TIMESERIES_COLUMNS,
                        _timeseries(runs, sc.output.decimate))
        states = [s for r in runs for s in r.states]
        _write_snapshots(outdir, states, sc.output.snapshots, sc.output.snapshot_points)
        row = _report_row(sc.name, rep)
        write_csv(outdir / "report.csv", REPORT_COLUMNS, [row])
        if rep.passed:
            return Outcome(sc.name, EXIT_OK, f"pass, T2 = {rep.T2:g}", row)
        failures = [r for r in runs if r.termination is Termination.NUMERICAL_FAILURE]
        if failures:
            return Outcome(sc.name, EXIT_ERROR,
                           f"numerical failure at t = {float(failures[0].t_event)!r}", row)
        return Outcome(sc.name, EXIT_FAIL, f"strategy failed ({rep.failed_phase or 'checks'}): "
                       f"{rep.message or rep.checks}", row)

    try:
        state0 = CoupledState.from_function(u0, sc.h0, sc.ell0, cfg.n_left, cfg.n_right)
    except ValueError as exc:
        return Outcome(sc.name, EXIT_ERROR, str(exc))
    if sc.mode == "hold":
        if sc.ell0 != 0.0:
            return Outcome(sc.name, EXIT_ERROR, "[particle] ell0: hold mode needs ell0 = 0")
        run = hold_phase(state0, sc.t_end, cfg)
    else:
        run = solve(state0, sc.g if sc.mode == "constant" else 0.0, sc.t_end, cfg)
    write_table(outdir / "timeseries.csv", TIMESERIES_COLUMNS, _timeseries([run], sc.output.decimate))
    _write_snapshots(outdir, run.states, sc.output.snapshots, sc.output.snapshot_points)
    if run.termination is Termination.NUMERICAL_FAILURE:
        return Outcome(sc.name, EXIT_ERROR, f"numerical failure at t = {float(run.t_event)!r}: {run.message}")
    if run.termination is Termination.CONTACT:
        return Outcome(sc.name, EXIT_OK, f"contact at T_c = {float(run.t_event)!r}")
    return Outcome(sc.name, EXIT_OK, f"reached t = {run.final.t:g}")


def _worker(args) -> Outcome:
    sc, outdir = args
    try:
        return run_scenario(sc, outdir)
    except Exception as exc:  # a crashed entry must not take the pool down
        return Outcome(sc.name, EXIT_ERROR, f"{type(exc).__name__}: {exc}")


def run_all(scenarios, root, threads: int = 1) -> list[Outcome]:
    """Run every scenario in its own subdirectory of ``root``; aggregate strategy reports."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    jobs = [(sc, root / sc.name) for sc in scenarios]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_worker, jobs))
    else:
        outcomes = [_worker(j) for j in jobs]
    rows = [o.report for o in outcomes if o.report is not None]
    if rows:
        write_csv(root / "report.csv", REPORT_COLUMNS, rows)
    return outcomes


def overall_status(outcomes) -> int:
    codes = {o.status for o in outcomes}
    if EXIT_ERROR in codes:
        return EXIT_ERROR
    return EXIT_FAIL if EXIT_FAIL in codes else EXIT_OK


def write_check(path: Path, result) -> None:
    columns = []
    for row in result.rows:
        columns += [k for k in row if k not in columns]
    write_csv(path, ["suite"] + columns + ["suite_passed"],
              [dict(row, suite=result.name, suite_passed=result.passed) for row in result.rows])


def output_root(flag: str | None, config_dir: str | None) -> str:
    """``--out`` beats ``BPC_OUT``, which beats the config file's ``[output] dir``."""
    if flag:
        return flag
    env = os.environ.get("BPC_OUT")
    if env:
        return env
    return config_dir or "bpc_out"
