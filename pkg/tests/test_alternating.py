import numpy as np
import pytest

from ris_ee.alternating import (
    Objective,
    PhaseMethod,
    QosPolicy,
    SolverSpec,
    Stopping,
    genie_rate,
    maximize,
    maximize_ee,
    maximize_se,
)
from ris_ee.model import ChannelRealization, PhaseProfile, PowerAllocation, bs_costs, energy_efficiency
from ris_ee.oracle import GridSpec, joint_grid_max
from ris_ee.power import PowerFeasibleSet, dinkelbach

from conftest import rand_channel, unit_config

METHODS = [PhaseMethod.GRADIENT, PhaseMethod.SFP]


def test_genie_rate():
    assert genie_rate(4 * 0.5, 0.5, 4) == pytest.approx(1.0)
    assert genie_rate(0.0, 1.0, 3) == 0.0
    assert genie_rate(100.0, 1.0, 16) == pytest.approx(np.log2(7.25))
    assert genie_rate(100.0, 1.0, 16) == pytest.approx(2.858, abs=1e-3)
    with pytest.raises(ValueError):
        genie_rate(1.0, 1.0, 0)


def test_spec_validation():
    with pytest.raises(ValueError):
        SolverSpec(epsilon=0.0)
    with pytest.raises(ValueError):
        SolverSpec(max_outer_iters=0)
    assert SolverSpec(phase_method="gradient").phase_method is PhaseMethod.GRADIENT


@pytest.mark.parametrize("method", METHODS)
def test_scalar_case_matches_dinkelbach(method):
    cfg = unit_config(1, 1, p_max=2.0, sigma2=0.1)
    ch = ChannelRealization(np.ones((1, 1)), np.ones((1, 1)))
    out = maximize_ee(ch, cfg, SolverSpec(phase_method=method, epsilon=1e-9))
    ref = dinkelbach(PowerFeasibleSet(np.zeros(1), np.ones(1), 2.0), cfg, epsilon=1e-9)
    np.testing.assert_allclose(out.powers.p, ref.powers, rtol=1e-6)


@pytest.mark.parametrize("method", METHODS)
def test_improves_on_initial_point(rng, method):
    cfg = unit_config(2, 4, p_max=1.0)
    for _ in range(5):
        ch = rand_channel(rng, 2, 2, 4)
        out = maximize_ee(ch, cfg, SolverSpec(phase_method=method))
        p0 = PowerAllocation.uniform(2, cfg.P_max)
        c0 = bs_costs(ch, PhaseProfile.constant(2))
        if c0 @ p0.p <= cfg.P_max:
            assert out.ee >= energy_efficiency(p0, cfg) * (1 - 1e-9)
        assert out.feasible
        assert out.bs_tx_power <= cfg.P_max * (1 + 1e-9)


@pytest.mark.parametrize("method", METHODS)
def test_history_non_decreasing(rng, method):
    for n in (2, 3):
        cfg = unit_config(n, 2 * n, p_max=1.0)
        for _ in range(5):
            ch = rand_channel(rng, n, n, 2 * n)
            out = maximize_ee(ch, cfg, SolverSpec(phase_method=method))
            h = np.array(out.history)
            assert np.all(np.diff(h) >= -1e-9 * h[:-1])
            assert out.outer_iterations <= 50


def test_ee_near_grid_oracle(rng):
    cfg = unit_config(2, 4, p_max=1.0, sigma2=0.01)
    for seed in range(2):
        ch = rand_channel(np.random.default_rng(seed), 2, 2, 4)
        ref = joint_grid_max(ch, cfg, "ee", GridSpec(points_per_angle=181, points_per_power=61))
        for m in METHODS:
            out = maximize_ee(ch, cfg, SolverSpec(phase_method=m))
            assert out.ee >= 0.95 * ref.ee


def test_se_mode_uses_full_budget(rng):
    cfg = unit_config(3, 6, p_max=2.0)
    ch = rand_channel(rng, 3, 3, 6)
    out = maximize_se(ch, cfg)
    assert out.bs_tx_power == pytest.approx(cfg.P_max, rel=1e-6)


def test_se_single_user_full_power():
    cfg = unit_config(1, 1, p_max=3.0, sigma2=0.1)
    ch = ChannelRealization(np.ones((1, 1)), np.ones((1, 1)))
    out = maximize_se(ch, cfg)
    np.testing.assert_allclose(out.powers.p, [3.0], rtol=1e-9)


def test_se_monotone_in_pmax(rng):
    ch = rand_channel(rng, 2, 2, 4)
    ses = [maximize_se(ch, unit_config(2, 4, p_max=p, sigma2=0.01)).se for p in (0.01, 0.1, 1.0, 10.0)]
    assert np.all(np.diff(ses) >= -1e-9)


def test_se_near_grid_oracle():
    cfg = unit_config(2, 4, p_max=1.0, sigma2=0.01)
    ch = rand_channel(np.random.default_rng(5), 2, 2, 4)
    ref = joint_grid_max(ch, cfg, "se", GridSpec(points_per_angle=181, points_per_power=101))
    for m in METHODS:
        assert maximize_se(ch, cfg, SolverSpec(phase_method=m)).se >= 0.95 * ref.se


def test_qos_policies(rng):
    ch = rand_channel(rng, 2, 2, 4)
    cfg = unit_config(2, 4, p_max=0.01, sigma2=0.01, R_min=8.0)
    strict = maximize(ch, cfg, SolverSpec(qos_policy=QosPolicy.STRICT))
    assert not strict.feasible and not strict.qos_relaxed
    relaxed = maximize(ch, cfg, SolverSpec(qos_policy=QosPolicy.RELAX))
    assert relaxed.feasible and relaxed.qos_relaxed


def test_qos_met_when_feasible(rng):
    ch = rand_channel(rng, 2, 2, 4)
    cfg = unit_config(2, 4, p_max=1.0, sigma2=0.01, R_min=2.0)
    out = maximize_ee(ch, cfg)
    assert out.feasible and not out.qos_relaxed
    rates = np.log2(1 + out.powers.p / cfg.sigma2)
    assert np.all(rates >= 2.0 - 1e-9)


def test_squared_stopping_rule_runs(rng):
    ch = rand_channel(rng, 2, 2, 4)
    out = maximize_ee(ch, unit_config(2, 4), SolverSpec(stopping=Stopping.SQUARED))
    assert out.converged


def test_objective_forced_by_wrappers(rng):
    ch = rand_channel(rng, 2, 2, 4)
    cfg = unit_config(2, 4)
    assert maximize_se(ch, cfg, SolverSpec(objective=Objective.EE)).label.endswith("sum_rate")
    assert maximize_ee(ch, cfg, SolverSpec(objective=Objective.SUM_RATE)).label.endswith("ee")
