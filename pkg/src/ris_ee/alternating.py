"""Alternating phase/power maximization of energy efficiency or sum rate."""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass

import numpy as np

from .model import (
    ChannelRealization,
    PhaseProfile,
    PowerAllocation,
    SolveOutcome,
    SystemConfig,
    bs_costs,
    energy_efficiency,
    make_outcome,
    spectral_efficiency,
)
from .phase_gradient import PhaseSearchResult, optimize_phases_gradient
from .phase_sfp import optimize_phases_sfp
from .power import FEAS_RTOL, PowerFeasibleSet, dinkelbach, qos_floor


class PhaseMethod(str, enum.Enum):
    GRADIENT = "gradient"
    SFP = "sfp"


class Objective(str, enum.Enum):
    EE = "ee"
    SUM_RATE = "sum_rate"


class QosPolicy(str, enum.Enum):
    STRICT = "strict"
    RELAX = "relax_on_infeasible"


class Stopping(str, enum.Enum):
    RELATIVE = "relative"
    SQUARED = "squared"


@dataclass(frozen=True)
class SolverSpec:
    """How to run the alternating loop.

    ``epsilon=None`` takes the tolerance from the SystemConfig.  The
    ``squared`` stopping rule compares (EE_new - EE_old)**2 with epsilon;
    the default compares the change relative to max(EE_old, 1).
    """

    phase_method: PhaseMethod = PhaseMethod.SFP
    objective: Objective = Objective.EE
    epsilon: float | None = None
    max_outer_iters: int = 50
    qos_policy: QosPolicy = QosPolicy.RELAX
    stopping: Stopping = Stopping.RELATIVE
    phase_epsilon: float = 1e-10
    phase_max_iters: int | None = None

    def __post_init__(self):
        for name, kind in (("phase_method", PhaseMethod), ("objective", Objective),
                           ("qos_policy", QosPolicy), ("stopping", Stopping)):
            object.__setattr__(self, name, kind(getattr(self, name)))
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")

    @property
    def label(self) -> str:
        return f"{self.phase_method.value}-{self.objective.value}"


def genie_rate(p_max: float, sigma2: float, k: int) -> float:
    """Per-user rate with orthogonal channels and uniform power."""
    if k <= 0:
        raise ValueError("k must be positive")
    return float(np.log2(1.0 + p_max / (k * sigma2)))


def _optimize_phases(spec: SolverSpec, theta, powers, ch) -> PhaseSearchResult:
    kwargs = {"epsilon": spec.phase_epsilon}
    if spec.phase_max_iters is not None:
        kwargs["max_iters"] = spec.phase_max_iters
    if spec.phase_method is PhaseMethod.GRADIENT:
        return optimize_phases_gradient(theta, powers, ch, **kwargs)
    return optimize_phases_sfp(theta, powers, ch, **kwargs)


def _stop(spec: SolverSpec, old: float, new: float, eps: float) -> bool:
    if spec.stopping is Stopping.SQUARED:
        return (new - old) ** 2 <= eps
    return abs(new - old) / max(abs(old), 1.0) < eps


def _alternate(ch: ChannelRealization, config: SystemConfig, spec: SolverSpec,
               floors: np.ndarray) -> SolveOutcome:
    eps = config.epsilon if spec.epsilon is None else spec.epsilon
    sum_rate = spec.objective is Objective.SUM_RATE
    xi = 0.0 if sum_rate else config.xi

    def metric(p):
        return spectral_efficiency(p, config.sigma2) if sum_rate else energy_efficiency(p, config)

    theta0 = PhaseProfile.constant(config.N)
    theta = theta0
    p = PowerAllocation.uniform(config.K, config.P_max).p
    history: list[float] = []
    inner = 0
    converged = False
    budget = config.P_max * (1 + FEAS_RTOL)

    for ell in range(1, spec.max_outer_iters + 1):
        res = _optimize_phases(spec, theta, p, ch)
        theta, inner = res.phases, inner + res.iterations
        costs = bs_costs(ch, theta)
        if costs @ floors > budget:
            if ell == 1 and np.any(floors > 0):
                # phases tuned for the floors themselves decide feasibility
                alt = _optimize_phases(spec, theta0, floors, ch)
                inner += alt.iterations
                alt_costs = bs_costs(ch, alt.phases)
                if alt_costs @ floors <= budget:
                    theta, costs = alt.phases, alt_costs
            if costs @ floors > budget:
                return make_outcome(theta, floors, ch, config, outer_iterations=ell - 1,
                                    feasible=False, converged=False, history=tuple(history),
                                    inner_iterations=inner, label=spec.label)
        fset = PowerFeasibleSet(floors, costs, config.P_max)
        p_new = dinkelbach(fset, config, epsilon=eps, xi=xi).powers
        if history and metric(p_new) < metric(p) and costs @ p <= budget:
            p_new = p
        p = p_new
        history.append(metric(p))
        if len(history) >= 2 and _stop(spec, history[-2], history[-1], eps):
            converged = True
            break

    return make_outcome(theta, p, ch, config, outer_iterations=len(history), feasible=True,
                        converged=converged, history=tuple(history), inner_iterations=inner,
                        label=spec.label)


def maximize(ch: ChannelRealization, config: SystemConfig, spec: SolverSpec | None = None) -> SolveOutcome:
    """Run the alternating loop for ``spec.objective`` with QoS handling."""
    spec = spec or SolverSpec()
    out = _alternate(ch, config, spec, qos_floor(config.r_min, config.sigma2))
    if out.feasible or spec.qos_policy is QosPolicy.STRICT:
        return out
    relaxed = _alternate(ch, config, spec, np.zeros(config.K))
    return make_outcome(relaxed.phases, relaxed.powers, ch, config,
                        outer_iterations=relaxed.outer_iterations, feasible=relaxed.feasible,
                        qos_relaxed=True, converged=relaxed.converged, history=relaxed.history,
                        inner_iterations=out.inner_iterations + relaxed.inner_iterations,
                        label=spec.label)


def maximize_ee(ch: ChannelRealization, config: SystemConfig, spec: SolverSpec | None = None) -> SolveOutcome:
    spec = spec or SolverSpec()
    if spec.objective is not Objective.EE:
        spec = _with(spec, objective=Objective.EE)
    return maximize(ch, config, spec)


def maximize_se(ch: ChannelRealization, config: SystemConfig, spec: SolverSpec | None = None) -> SolveOutcome:
    """Sum-rate maximization: the same loop with xi = 0 in the power step."""
    spec = spec or SolverSpec(objective=Objective.SUM_RATE)
    if spec.objective is not Objective.SUM_RATE:
        spec = _with(spec, objective=Objective.SUM_RATE)
    return maximize(ch, config, spec)


def _with(spec: SolverSpec, **changes) -> SolverSpec:
    return dataclasses.replace(spec, **changes)

