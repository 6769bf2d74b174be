"""Batch experiment runner.

Builds a matrix of benchmark instances, runs the configured solvers with
per-run time limits, classifies successes, and writes deterministic result
files.  Every instance is generated from a seed derived by hashing
``(master seed, cell id, instance index)``, so any cell can be reproduced in
isolation and repeated runs yield byte-identical record files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import recovery, weber
from .dca import dca_solve
from .psalmdc import solve

FAMILIES = ("weber", "recovery")
SOLVERS = ("psalmdc", "dca", "both")


@dataclass
class ExperimentConfig:
    family: str
    solver: str = "both"
    instances: int = 10
    seed: int = 0
    time_limit: float = 60.0
    out_dir: str = "results"
    parallel: int = 1
    # weber family
    facilities: tuple[int, ...] = (1,)
    data_csv: str | None = None
    weber_decimals: int = 3
    # recovery family
    n: int = 256
    m: int = 64
    sparsity: tuple[int, ...] = (5,)
    matrix: str = "gaussian"
    variant: str = recovery.L1_MINUS_TOPK
    refinement: int = 10
    rel_error_tol: float = 1e-3

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown solver selection {self.solver!r}")
        if self.instances < 1:
            raise ValueError("at least one instance per cell required")
        if self.time_limit <= 0:
            raise ValueError("time limit must be positive")
        self.facilities = tuple(int(p) for p in np.atleast_1d(self.facilities))
        self.sparsity = tuple(int(s) for s in np.atleast_1d(self.sparsity))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def solvers(self) -> tuple[str, ...]:
        return ("psalmdc", "dca") if self.solver == "both" else (self.solver,)


@dataclass
class RunRecord:
    family: str
    cell: str
    level: int                # facility count or sparsity, per family
    matrix: str
    variant: str
    refinement: int
    solver: str
    instance: int
    seed: int
    success: bool
    relative_error: float
    final_objective: float
    start_objective: float
    feas_violation: float
    iterations: int
    status: str
    wall_time: float = 0.0
    cpu_time: float = 0.0


# timing fields are excluded so repeated runs produce identical bytes
RUNS_CSV_COLUMNS = [f.name for f in fields(RunRecord)
                    if f.name not in ("wall_time", "cpu_time")]
TIMING_CSV_COLUMNS = ["cell", "solver", "instance", "wall_time", "cpu_time"]


def instance_seed(master_seed: int, cell: str, index: int) -> int:
    """Stable per-instance seed; independent of execution order."""
    digest = hashlib.sha256(f"{master_seed}|{cell}|{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def classify_success(family: str, *, final_objective: float | None = None,
                     reference_objective: float | None = None,
                     decimals: int = 3, x=None, signal=None,
                     rel_tol: float = 1e-3) -> bool:
    """Family-specific success rule.

    Location planning succeeds when the final objective matches the
    reference after rounding to ``decimals`` places; recovery when the
    relative error is at most ``rel_tol`` (boundary counts as success).
    """
    if family == "weber":
        if final_objective is None or reference_objective is None:
            raise ValueError("objective match needs a reference objective")
        return round(final_objective, decimals) == round(reference_objective,
                                                         decimals)
    if family == "recovery":
        if x is None or signal is None:
            raise ValueError("relative error needs the recovered and true signals")
        return recovery.relative_error(x, signal) <= rel_tol
    raise ValueError(f"unknown family {family!r}")


@dataclass
class CellSpec:
    cell: str
    level: int
    reference_objective: float = float("nan")


def _weber_cells(config: ExperimentConfig) -> list[CellSpec]:
    cells = []
    for p in config.facilities:
        instance = _weber_instance(config, p)
        reference = weber.weber_reference_objective(instance, seed=config.seed)
        cells.append(CellSpec(cell=f"weber-p{p}", level=p,
                              reference_objective=reference))
    return cells


def _weber_instance(config: ExperimentConfig, p: int) -> weber.WeberInstance:
    if config.data_csv:
        return weber.load_weber_csv(config.data_csv, facilities=p)
    return weber.synthetic_weber_instance(seed=config.seed, facilities=p)


def _recovery_cells(config: ExperimentConfig) -> list[CellSpec]:
    tag = config.matrix
    if config.matrix == "oversampled_dct":
        tag = f"{config.matrix}-F{config.refinement}"
    return [CellSpec(cell=f"recovery-{tag}-{config.variant}-s{s}", level=s)
            for s in config.sparsity]


def _run_weber_task(config: ExperimentConfig, spec: CellSpec,
                    index: int) -> list[RunRecord]:
    p = spec.level
    instance = _weber_instance(config, p)
    prog = weber.build_weber_program(instance)
    seed = instance_seed(config.seed, spec.cell, index)
    x0 = weber.random_start(instance, np.random.default_rng(seed))
    start_objective = weber.weber_objective(instance, x0)
    records = []
    for solver_name in config.solvers():
        if solver_name == "psalmdc":
            params = weber.weber_solver_params(
                instance, time_limit=config.time_limit)
            result = solve(prog, params, x0,
                           u0=weber.weber_safeguard_start(instance))
            x, status = result.point.x, result.status
        else:
            params = weber.weber_dca_params(
                instance, time_limit=config.time_limit)
            result = dca_solve(prog, params, x0)
            x, status = result.x, result.status
        final_objective = weber.weber_objective(instance, x)
        c_values, _ = prog.eval_c(x)
        feas = float(np.linalg.norm(np.maximum(c_values, 0.0)))
        success = classify_success(
            "weber", final_objective=final_objective,
            reference_objective=spec.reference_objective,
            decimals=config.weber_decimals)
        records.append(RunRecord(
            family="weber", cell=spec.cell, level=p, matrix="", variant="",
            refinement=0, solver=solver_name, instance=index, seed=seed,
            success=success, relative_error=float("nan"),
            final_objective=final_objective, start_objective=start_objective,
            feas_violation=feas, iterations=result.iterations,
            status=status.value, wall_time=result.wall_time,
            cpu_time=result.cpu_time))
    return records


def _run_recovery_task(config: ExperimentConfig, spec: CellSpec,
                       index: int) -> list[RunRecord]:
    s = spec.level
    seed = instance_seed(config.seed, spec.cell, index)
    refinement = config.refinement if config.matrix == "oversampled_dct" else None
    instance = recovery.make_recovery_instance(
        n=config.n, m=config.m, s=s, matrix=config.matrix,
        variant=config.variant, refinement=refinement, seed=seed)
    prog = recovery.build_recovery_program(instance)
    start_objective = prog.eval_g(instance.x0)[0] - prog.eval_h(instance.x0)[0]
    records = []
    for solver_name in config.solvers():
        if solver_name == "psalmdc":
            params = recovery.recovery_solver_params(
                instance, time_limit=config.time_limit)
            result = solve(prog, params, instance.x0,
                           v0=recovery.recovery_safeguard_start(instance))
            x, status = result.point.x, result.status
        else:
            params = recovery.recovery_dca_params(
                instance, time_limit=config.time_limit)
            result = dca_solve(prog, params, instance.x0)
            x, status = result.x, result.status
        rel = recovery.relative_error(x, instance.signal)
        success = classify_success("recovery", x=x, signal=instance.signal,
                                   rel_tol=config.rel_error_tol)
        final_objective = prog.eval_g(x)[0] - prog.eval_h(x)[0]
        records.append(RunRecord(
            family="recovery", cell=spec.cell, level=s, matrix=config.matrix,
            variant=config.variant,
            refinement=refinement if refinement is not None else 0,
            solver=solver_name, instance=index, seed=seed, success=success,
            relative_error=rel, final_objective=final_objective,
            start_objective=start_objective,
            feas_violation=float(np.linalg.norm(prog.eq_residual(x))),
            iterations=result.iterations, status=status.value,
            wall_time=result.wall_time, cpu_time=result.cpu_time))
    return records


def _execute_task(args) -> list[RunRecord]:
    config, spec, index = args
    if config.family == "weber":
        return _run_weber_task(config, spec, index)
    return _run_recovery_task(config, spec, index)


def run_experiment(config: ExperimentConfig) -> tuple[list[RunRecord], dict]:
    """Run the full instance matrix; returns sorted records and a summary."""
    cells = (_weber_cells(config) if config.family == "weber"
             else _recovery_cells(config))
    tasks = [(config, spec, index)
             for spec in cells for index in range(config.instances)]
    if config.parallel > 1:
        with ProcessPoolExecutor(max_workers=config.parallel) as pool:
            chunks = list(pool.map(_execute_task, tasks))
    else:
        chunks = [_execute_task(task) for task in tasks]
    records = [record for chunk in chunks for record in chunk]
    records.sort(key=lambda r: (r.cell, r.solver, r.instance))
    return records, summarize(records)


def summarize(records: list[RunRecord]) -> dict:
    """Per-cell, per-solver success counts and timing over successes only."""
    summary: dict = {}
    for record in records:
        cell = summary.setdefault(record.cell, {})
        entry = cell.setdefault(record.solver, {
            "level": record.level, "runs": 0, "successes": 0, "times": []})
        entry["runs"] += 1
        if record.success:
            entry["successes"] += 1
            entry["times"].append(record.wall_time)
    for cell in summary.values():
        for entry in cell.values():
            times = entry.pop("times")
            entry["mean_time"] = statistics.mean(times) if times else None
            entry["median_time"] = statistics.median(times) if times else None
    return summary


def _format(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_outputs(records: list[RunRecord], summary: dict, out_dir) -> None:
    """Write ``runs.csv``, ``timings.csv``, ``summary.json`` and plot data.

    ``runs.csv`` holds the deterministic record fields in fixed column order;
    wall and CPU times go to ``timings.csv`` so that reruns with the same
    seed reproduce ``runs.csv`` byte for byte.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "runs.csv", "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(RUNS_CSV_COLUMNS)
        for record in records:
            writer.writerow([_format(getattr(record, c))
                             for c in RUNS_CSV_COLUMNS])
    with open(out / "timings.csv", "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TIMING_CSV_COLUMNS)
        for record in records:
            writer.writerow([_format(getattr(record, c))
                             for c in TIMING_CSV_COLUMNS])
    with open(out / "summary.json", "w") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")
    plotdir = out / "plotdata"
    plotdir.mkdir(exist_ok=True)
    for cell, solvers in summary.items():
        with open(plotdir / f"{cell}.tsv", "w") as handle:
            handle.write("sparsity\tsolver\tsuccess_count\tmean_time\tmedian_time\n")
            for solver_name in sorted(solvers):
                entry = solvers[solver_name]
                mean = "" if entry["mean_time"] is None else repr(entry["mean_time"])
                median = ("" if entry["median_time"] is None
                          else repr(entry["median_time"]))
                handle.write(f"{entry['level']}\t{solver_name}\t"
                             f"{entry['successes']}\t{mean}\t{median}\n")
