import csv
import math

import numpy as np
import pytest

from ris_ee.alternating import genie_rate
from ris_ee.experiment import (
    AGGREGATE_COLUMNS,
    TRIAL_COLUMNS,
    ExperimentPlan,
    ExperimentResult,
    Sweep,
    aggregate,
    emit_csv,
    output_paths,
    parse_solver,
    plan_from_mapping,
    point_config,
    read_aggregate,
    read_trials,
    run_experiment,
)
from ris_ee.errors import IoFailure

from conftest import unit_config


def small_plan(**kw):
    base = dict(scenario=unit_config(2, 4, p_max=1.0, sigma2=1e-2),
                sweep=Sweep("P_max", (0.1, 1.0)), trials=2, base_seed=3,
                solvers=("sfp-ee", "gradient-ee"))
    base.update(kw)
    return ExperimentPlan(**base)


def test_plan_validation():
    with pytest.raises(ValueError):
        small_plan(trials=0)
    with pytest.raises(ValueError):
        Sweep("P_max", ())
    with pytest.raises(ValueError):
        Sweep("bogus", (1,))
    with pytest.raises(ValueError):
        parse_solver("newton-ee")


def test_point_config_sweeps():
    plan = small_plan()
    assert point_config(plan, 2.0).P_max == 2.0
    assert point_config(plan, 2.0).P_R_max == 2.0
    n = point_config(small_plan(sweep=Sweep("N", (3,))), 3)
    assert (n.N, n.K, n.M) == (3, 3, 4)
    snr = point_config(small_plan(sweep=Sweep("snr_db", (20,))), 20)
    assert snr.sigma2 == pytest.approx(1.0 / 100)
    q = point_config(small_plan(sweep=Sweep("qos_fraction", (0.3,))), 0.3)
    np.testing.assert_allclose(q.r_min, 0.3 * genie_rate(1.0, 1e-2, 2))


def test_solvers_share_channels():
    res = run_experiment(small_plan(trials=1))
    by_point = {}
    for r in res.records:
        by_point.setdefault(r.sweep_value, set()).add(r.channel_hash)
        assert r.seed == 3 and not r.error
    assert all(len(h) == 1 for h in by_point.values())


def test_seed_isolation():
    a = run_experiment(small_plan(solvers=("sfp-ee",)))
    b = run_experiment(small_plan(solvers=("gradient-ee", "sfp-ee")))
    ha = [r.channel_hash for r in a.records]
    hb = [r.channel_hash for r in b.records if r.solver == "sfp-ee"]
    assert ha == hb


def test_rerun_bitwise_identical(tmp_path):
    p1, p2 = tmp_path / "a", tmp_path / "b"
    run_experiment(small_plan(output_path=str(p1)))
    run_experiment(small_plan(output_path=str(p2)))
    for kind in ("trials", "aggregate"):
        assert output_paths(p1)[kind].read_bytes() == output_paths(p2)[kind].read_bytes()


def test_workers_same_order(tmp_path):
    a = run_experiment(small_plan())
    b = run_experiment(small_plan(), workers=2)
    key = lambda r: (r.sweep_value, r.trial, r.solver, r.se, r.ee)
    assert [key(r) for r in a.records] == [key(r) for r in b.records]


def test_csv_round_trip_and_schema(tmp_path):
    res = run_experiment(small_plan())
    paths = emit_csv(res, tmp_path / "out.csv")
    with open(paths["trials"], newline="") as fh:
        assert tuple(next(csv.reader(fh))) == TRIAL_COLUMNS
    with open(paths["aggregate"], newline="") as fh:
        assert tuple(next(csv.reader(fh))) == AGGREGATE_COLUMNS
    back = read_trials(paths["trials"])
    for r, s in zip(res.records, back):
        assert (r.se, r.ee, r.bs_power, r.feasible, r.channel_hash) == (s.se, s.ee, s.bs_power, s.feasible, s.channel_hash)
    agg = read_aggregate(paths["aggregate"])
    recomputed = aggregate(back)
    for a, b in zip(agg, recomputed):
        assert a.solver == b.solver and a.n == b.n
        np.testing.assert_array_equal([a.se_mean, a.ee_mean, a.se_stderr], [b.se_mean, b.ee_mean, b.se_stderr])


def test_empty_results_header_only(tmp_path):
    paths = emit_csv(ExperimentResult([], []), tmp_path / "empty")
    assert paths["aggregate"].read_text().strip() == ",".join(AGGREGATE_COLUMNS)
    assert paths["trials"].read_text().strip() == ",".join(TRIAL_COLUMNS)


def test_io_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(IoFailure):
        emit_csv(ExperimentResult([], []), blocker / "sub" / "out")


def test_errors_recorded_not_raised():
    # relay at N=5 exceeds the grid cap; the sweep still completes
    plan = small_plan(scenario=unit_config(5, 6), solvers=("sfp-ee", "relay"), trials=1,
                      sweep=Sweep("P_max", (1.0,)))
    res = run_experiment(plan)
    errs = [r for r in res.records if r.error]
    assert len(errs) == 1 and errs[0].solver == "relay" and "GridCapExceeded" in errs[0].error
    assert res.n_errors == 1
    relay_row = [a for a in res.aggregates if a.solver == "relay"][0]
    assert relay_row.errors == 1 and math.isnan(relay_row.se_mean)


def test_plan_from_mapping():
    plan = plan_from_mapping({
        "scenario": {"M": 4, "N": 2, "K": 2, "sigma2": "0 dBm", "pathloss_ref": 1, "pathloss_exp": 0},
        "sweep": {"parameter": "P_max", "values": ["0 dBm", "10 dBm"]},
        "trials": 3, "solvers": ["sfp-se", "relay", "oracle-ee"], "relay_grid": {"magnitude_levels": 4},
    })
    assert plan.sweep.values == pytest.approx((1e-3, 1e-2))
    assert plan.relay_grid.magnitude_levels == 4
    assert plan.solvers[1] == "relay"
