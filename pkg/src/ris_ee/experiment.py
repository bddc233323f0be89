"""Monte-Carlo experiment harness.

Trial t at every sweep point uses channel seed ``base_seed + t``, so all
solvers, and all sweep points that keep the dimensions, see the same draw.
Per-trial failures are recorded in the row and never abort the sweep.
"""

from __future__ import annotations

import csv
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .alternating import Objective, PhaseMethod, SolverSpec, genie_rate, maximize
from .errors import IoFailure
from .model import SystemConfig, generate_channels
from .oracle import GridSpec, joint_grid_max
from .relay import RelayGrid, optimize_relay

SWEEP_PARAMETERS = ("P_max", "N", "qos_fraction", "snr_db")
BASELINES = ("relay", "oracle-ee", "oracle-se")

Solver = Union[SolverSpec, str]


def parse_solver(name: str) -> Solver:
    """``sfp-ee``, ``gradient-se``, ... or one of the baselines."""
    if name in BASELINES:
        return name
    method, _, objective = name.partition("-")
    objective = {"ee": Objective.EE, "se": Objective.SUM_RATE,
                 "sum_rate": Objective.SUM_RATE}.get(objective)
    if objective is None or method not in {m.value for m in PhaseMethod}:
        raise ValueError(f"unknown solver {name!r}")
    return SolverSpec(phase_method=PhaseMethod(method), objective=objective)


def solver_id(solver: Solver) -> str:
    if isinstance(solver, SolverSpec):
        return solver.label.replace("sum_rate", "se")
    return solver


@dataclass(frozen=True)
class Sweep:
    parameter: str
    values: tuple

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"sweep parameter must be one of {SWEEP_PARAMETERS}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError("sweep must be non-empty")


@dataclass(frozen=True)
class ExperimentPlan:
    """One sweep of Monte-Carlo trials.

    ``qos_fraction`` sets R_min to that fraction of the orthogonal-channel
    uniform-power rate at each point (the ``qos_fraction`` sweep overrides
    it).  When the relay budget or relay noise equal their BS-side
    counterparts in ``scenario`` they keep tracking them along the sweep.
    """

    scenario: SystemConfig
    sweep: Sweep
    trials: int = 100
    base_seed: int = 0
    solvers: tuple = (SolverSpec(),)
    output_path: str | None = None
    qos_fraction: float = 0.0
    relay_grid: RelayGrid = RelayGrid()
    oracle_grid: GridSpec = GridSpec()

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        object.__setattr__(self, "solvers", tuple(
            parse_solver(s) if isinstance(s, str) else s for s in self.solvers))
        if not self.solvers:
            raise ValueError("at least one solver is required")
        if self.qos_fraction < 0:
            raise ValueError("qos_fraction must be >= 0")


def point_config(plan: ExperimentPlan, value: float) -> SystemConfig:
    base = plan.scenario
    cfg = base
    frac = plan.qos_fraction
    if plan.sweep.parameter == "P_max":
        cfg = cfg.replace(P_max=value)
    elif plan.sweep.parameter == "N":
        n = int(round(value))
        cfg = cfg.replace(N=n, M=max(base.M, n), K=base.K if base.allow_general else n)
    elif plan.sweep.parameter == "snr_db":
        cfg = cfg.replace(sigma2=base.P_max / 10.0 ** (value / 10.0))
    else:
        frac = value
    if base.P_R_max == base.P_max:
        cfg = cfg.replace(P_R_max=cfg.P_max)
    if base.relay_noise == base.sigma2:
        cfg = cfg.replace(relay_noise=cfg.sigma2)
    if frac > 0:
        cfg = cfg.replace(R_min=frac * genie_rate(cfg.P_max, cfg.sigma2, cfg.K))
    return cfg


@dataclass
class TrialRecord:
    sweep_value: float
    trial: int
    seed: int
    solver: str
    se: float = math.nan
    ee: float = math.nan
    total_power: float = math.nan
    bs_power: float = math.nan
    outer_iterations: int = 0
    inner_iterations: int = 0
    feasible: bool = False
    qos_relaxed: bool = False
    converged: bool = False
    channel_hash: str = ""
    error: str = ""
    wall_time: float = 0.0


@dataclass
class AggregateRow:
    sweep_value: float
    solver: str
    n: int
    errors: int
    feasibility_rate: float
    relaxed_rate: float
    se_mean: float
    se_stderr: float
    ee_mean: float
    ee_stderr: float
    total_power_mean: float
    total_power_stderr: float
    bs_power_mean: float
    bs_power_stderr: float
    outer_iterations_mean: float


@dataclass
class ExperimentResult:
    records: list
    aggregates: list = field(default_factory=list)

    @property
    def n_errors(self) -> int:
        return sum(1 for r in self.records if r.error)


TRIAL_COLUMNS = tuple(f.name for f in fields(TrialRecord) if f.name != "wall_time")
TIMING_COLUMNS = ("sweep_value", "trial", "solver", "wall_time")
AGGREGATE_COLUMNS = tuple(f.name for f in fields(AggregateRow))


def _solve(solver: Solver, ch, cfg: SystemConfig, plan: ExperimentPlan):
    if isinstance(solver, SolverSpec):
        return maximize(ch, cfg, solver)
    if solver == "relay":
        return optimize_relay(ch, cfg, plan.relay_grid)
    objective = "ee" if solver == "oracle-ee" else "se"
    return joint_grid_max(ch, cfg, objective, plan.oracle_grid)


def run_trial(plan: ExperimentPlan, value: float, trial: int) -> list[TrialRecord]:
    """All solvers on one channel draw."""
    seed = plan.base_seed + trial
    rows = []
    try:
        cfg = point_config(plan, value)
        ch = generate_channels(cfg, seed)
        digest = ch.digest()
    except Exception as exc:  # recorded, not raised
        return [TrialRecord(value, trial, seed, solver_id(s), error=f"{type(exc).__name__}: {exc}")
                for s in plan.solvers]
    for s in plan.solvers:
        rec = TrialRecord(value, trial, seed, solver_id(s), channel_hash=digest)
        t0 = time.perf_counter()
        try:
            out = _solve(s, ch, cfg, plan)
            rec.se, rec.ee = float(out.se), float(out.ee)
            rec.total_power, rec.bs_power = float(out.total_power), float(out.bs_tx_power)
            rec.outer_iterations, rec.inner_iterations = int(out.outer_iterations), int(out.inner_iterations)
            rec.feasible, rec.qos_relaxed, rec.converged = bool(out.feasible), bool(out.qos_relaxed), bool(out.converged)
        except Exception as exc:
            rec.error = f"{type(exc).__name__}: {exc}"
        rec.wall_time = time.perf_counter() - t0
        rows.append(rec)
    return rows


def _run_task(task):
    return run_trial(*task)


def _mean_stderr(x: np.ndarray) -> tuple[float, float]:
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), math.nan
    return float(np.mean(x)), float(np.std(x, ddof=1) / np.sqrt(x.size))


def aggregate(records: Sequence[TrialRecord]) -> list[AggregateRow]:
    """Mean and standard error per (sweep value, solver), in first-seen order."""
    groups: dict = {}
    for r in records:
        groups.setdefault((r.sweep_value, r.solver), []).append(r)
    rows = []
    for (value, solver), rs in groups.items():
        ok = [r for r in rs if not r.error]
        stats = {}
        for name in ("se", "ee", "total_power", "bs_power"):
            stats[name] = _mean_stderr(np.array([getattr(r, name) for r in ok], dtype=float))
        n_ok = len(ok)
        rows.append(AggregateRow(
            sweep_value=value,
            solver=solver,
            n=len(rs),
            errors=len(rs) - n_ok,
            feasibility_rate=sum(r.feasible and not r.qos_relaxed for r in ok) / n_ok if n_ok else math.nan,
            relaxed_rate=sum(r.qos_relaxed for r in ok) / n_ok if n_ok else math.nan,
            se_mean=stats["se"][0], se_stderr=stats["se"][1],
            ee_mean=stats["ee"][0], ee_stderr=stats["ee"][1],
            total_power_mean=stats["total_power"][0], total_power_stderr=stats["total_power"][1],
            bs_power_mean=stats["bs_power"][0], bs_power_stderr=stats["bs_power"][1],
            outer_iterations_mean=float(np.mean([r.outer_iterations for r in ok])) if ok else math.nan,
        ))
    return rows


def run_experiment(plan: ExperimentPlan, workers: int = 1, progress: bool = False) -> ExperimentResult:
    """Run every sweep point x trial x solver; rows come back in deterministic order."""
    tasks = [(plan, v, t) for v in plan.sweep.values for t in range(plan.trials)]
    records: list[TrialRecord] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = pool.map(_run_task, tasks)
            for i, rows in enumerate(chunks, 1):
                records.extend(rows)
                _progress(progress, i, len(tasks))
    else:
        for i, task in enumerate(tasks, 1):
            records.extend(_run_task(task))
            _progress(progress, i, len(tasks))
    result = ExperimentResult(records, aggregate(records))
    if plan.output_path is not None:
        emit_csv(result, plan.output_path)
    return result


def _progress(on: bool, i: int, n: int):
    if on:
        print(f"\r{i}/{n} trials", end="\n" if i == n else "", file=sys.stderr, flush=True)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "%.17e" % v
    return str(v)


def output_paths(path) -> dict:
    """Per-trial, aggregate and timing files derived from one output stem."""
    p = Path(path)
    stem = p.with_suffix("") if p.suffix == ".csv" else p
    return {kind: stem.with_name(f"{stem.name}.{kind}.csv") for kind in ("trials", "aggregate", "timing")}


def _write(path: Path, columns, rows):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(r[c]) for c in columns])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def emit_csv(result: ExperimentResult, path) -> dict:
    """Write ``<stem>.trials.csv``, ``<stem>.aggregate.csv`` and ``<stem>.timing.csv``.

    Trial and aggregate files are a pure function of the plan; wall-clock
    times live in the timing file so reruns stay byte-identical.
    """
    paths = output_paths(path)
    recs = [asdict(r) for r in result.records]
    _write(paths["trials"], TRIAL_COLUMNS, recs)
    _write(paths["aggregate"], AGGREGATE_COLUMNS, [asdict(a) for a in result.aggregates])
    _write(paths["timing"], TIMING_COLUMNS, recs)
    return paths


def _parse(kind, text: str):
    if kind is bool:
        return text == "1"
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


def read_trials(path) -> list[TrialRecord]:
    types = {"sweep_value": float, "trial": int, "seed": int, "solver": str, "se": float, "ee": float,
             "total_power": float, "bs_power": float, "outer_iterations": int,
             "inner_iterations": int, "feasible": bool, "qos_relaxed": bool, "converged": bool,
             "channel_hash": str, "error": str}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRIAL_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [TrialRecord(**{k: _parse(types[k], v) for k, v in row.items()}) for row in reader]


def read_aggregate(path) -> list[AggregateRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != AGGREGATE_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        out = []
        for row in reader:
            kw = {k: (row[k] if k == "solver" else int(row[k]) if k in ("n", "errors") else float(row[k]))
                  for k in AGGREGATE_COLUMNS}
            out.append(AggregateRow(**kw))
        return out


def plan_from_mapping(data: dict) -> ExperimentPlan:
    """Build a plan from a parsed plan file (see README for the layout)."""
    from .scenario import config_from_mapping, parse_power

    sweep = data.get("sweep")
    if not isinstance(sweep, dict) or "parameter" not in sweep or "values" not in sweep:
        raise ValueError("plan needs sweep: {parameter: ..., values: [...]}")
    values = sweep["values"]
    if sweep["parameter"] == "P_max":
        values = [parse_power(v) for v in values]
    relay = data.get("relay_grid", {})
    oracle = data.get("oracle_grid", {})
    return ExperimentPlan(
        scenario=config_from_mapping(data.get("scenario", {})),
        sweep=Sweep(sweep["parameter"], tuple(values)),
        trials=int(data.get("trials", 100)),
        base_seed=int(data.get("base_seed", 0)),
        solvers=tuple(data.get("solvers", ("sfp-ee",))),
        output_path=data.get("output"),
        qos_fraction=float(data.get("qos_fraction", 0.0)),
        relay_grid=RelayGrid(**relay),
        oracle_grid=GridSpec(**oracle),
    )
