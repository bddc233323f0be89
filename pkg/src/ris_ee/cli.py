"""Command-line front end: ``ris-ee {solve,sweep,oracle,relay}``."""

from __future__ import annotations

import argparse
import json
import sys

from .alternating import Objective, PhaseMethod, SolverSpec, genie_rate, maximize
from .errors import RisEEError
from .experiment import plan_from_mapping, run_experiment
from .model import SolveOutcome, SystemConfig, generate_channels
from .oracle import GridSpec, joint_grid_max
from .relay import RelayGrid, optimize_relay
from .scenario import config_from_mapping, dbm, load_yaml


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _add_scenario_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML scenario (or plan) file")
    p.add_argument("--M", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--sigma2", help="noise power with unit, e.g. '-30 dBm' or '1e-3 W'")
    p.add_argument("--unit-gain", action="store_true",
                   help="unit-variance Rayleigh channels without distance pathloss")
    p.add_argument("--seed", type=int, default=0)


def _scenario(args) -> dict:
    data = {}
    if args.config:
        raw = load_yaml(args.config)
        data = dict(raw.get("scenario", raw))
    for name in ("M", "N", "K"):
        if getattr(args, name) is not None:
            data[name] = getattr(args, name)
    if args.N is not None and args.K is None and not data.get("allow_general"):
        data["K"] = args.N
    if args.sigma2 is not None:
        data["sigma2"] = args.sigma2
    if args.unit_gain:
        data.update(pathloss_ref=1.0, pathloss_exp=0.0)
    return data


def _single_config(args) -> SystemConfig:
    data = _scenario(args)
    if getattr(args, "pmax_dbm", None):
        data["P_max"] = dbm(_float_list(args.pmax_dbm)[0])
    cfg = config_from_mapping(data)
    if getattr(args, "qos_fraction", 0.0):
        cfg = cfg.replace(R_min=args.qos_fraction * genie_rate(cfg.P_max, cfg.sigma2, cfg.K))
    return cfg


def _report(out: SolveOutcome, ch):
    print(json.dumps({
        "label": out.label,
        "se": out.se,
        "ee": out.ee,
        "total_power": out.total_power,
        "bs_tx_power": out.bs_tx_power,
        "feasible": out.feasible,
        "qos_relaxed": out.qos_relaxed,
        "outer_iterations": out.outer_iterations,
        "theta": [float(t) for t in out.phases.theta],
        "powers": [float(p) for p in out.powers.p],
        "channel_hash": ch.digest(),
    }, indent=2))


def _spec(args) -> SolverSpec:
    obj = Objective.EE if args.objective == "ee" else Objective.SUM_RATE
    return SolverSpec(phase_method=PhaseMethod(args.algorithm), objective=obj)


def cmd_solve(args) -> int:
    cfg = _single_config(args)
    ch = generate_channels(cfg, args.seed)
    _report(maximize(ch, cfg, _spec(args)), ch)
    return 0


def cmd_oracle(args) -> int:
    cfg = _single_config(args)
    ch = generate_channels(cfg, args.seed)
    grid = GridSpec(points_per_angle=args.points_per_angle, points_per_power=args.points_per_power)
    _report(joint_grid_max(ch, cfg, args.objective, grid), ch)
    return 0


def cmd_relay(args) -> int:
    cfg = _single_config(args)
    ch = generate_channels(cfg, args.seed)
    _report(optimize_relay(ch, cfg, RelayGrid(), squared=not args.unsquared), ch)
    return 0


def cmd_sweep(args) -> int:
    data = load_yaml(args.config) if args.config else {}
    scen = _scenario(args)
    data["scenario"] = scen
    if args.pmax_dbm:
        data["sweep"] = {"parameter": "P_max", "values": [f"{v} dBm" for v in _float_list(args.pmax_dbm)]}
    if "sweep" not in data:
        data["sweep"] = {"parameter": "P_max", "values": ["20 dBW"]}
    if args.trials is not None:
        data["trials"] = args.trials
    if args.seed:
        data["base_seed"] = args.seed
    if args.out:
        data["output"] = args.out
    if args.qos_fraction:
        data["qos_fraction"] = args.qos_fraction
    if args.solvers:
        data["solvers"] = args.solvers.split(",")
    elif "solvers" not in data:
        data["solvers"] = [f"{args.algorithm}-{args.objective}"]
    plan = plan_from_mapping(data)
    result = run_experiment(plan, workers=args.workers, progress=True)
    if plan.output_path is None:
        for a in result.aggregates:
            print(f"{a.sweep_value:.6g}\t{a.solver}\tSE={a.se_mean:.6g}\tEE={a.ee_mean:.6g}"
                  f"\tfeasible={a.feasibility_rate:.3f}")
    if result.n_errors:
        print(f"{result.n_errors} trial(s) failed", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ris-ee", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def solver_args(p):
        p.add_argument("--algorithm", choices=[m.value for m in PhaseMethod], default="sfp")
        p.add_argument("--objective", choices=["ee", "se"], default="ee")
        p.add_argument("--qos-fraction", type=float, default=0.0,
                       help="R_min as a fraction of the orthogonal-channel uniform-power rate")
        p.add_argument("--pmax-dbm", help="BS power budget in dBm (comma list for sweep)")

    p = sub.add_parser("solve", help="one alternating solve on one channel draw")
    _add_scenario_args(p)
    solver_args(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="Monte-Carlo sweep from a plan file")
    _add_scenario_args(p)
    solver_args(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--out", help="output stem; writes <stem>.trials.csv, .aggregate.csv, .timing.csv")
    p.add_argument("--solvers", help="comma list, e.g. sfp-ee,gradient-ee,relay")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="joint grid search (tiny N, K)")
    _add_scenario_args(p)
    solver_args(p)
    p.add_argument("--points-per-angle", type=int, default=GridSpec.points_per_angle)
    p.add_argument("--points-per-power", type=int, default=GridSpec.points_per_power)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("relay", help="AF relay baseline by gain-grid search")
    _add_scenario_args(p)
    solver_args(p)
    p.add_argument("--unsquared", action="store_true",
                   help="use the unsquared noise-amplification term")
    p.set_defaults(func=cmd_relay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RisEEError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
