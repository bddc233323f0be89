"""Phase optimization by majorization-minimization (sequential fractional programming).

At anchor x_t the objective x^H A x is majorized by

    f(x | x_t) = lam*N - 2 Re(x^H c) + (lam*N - x_t^H A x_t),   c = (lam I - A) x_t,

valid on the unit-modulus set with lam the largest eigenvalue of the full
N^2 x N^2 matrix A.  Its minimizer over unit-modulus x is x_n = exp(1j*arg c_n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ChannelRealization, PhaseProfile, PhasesLike, PowersLike, as_theta
from .phase_gradient import PhaseSearchResult
from .quadratic import compact_vector, lambda_max, quadratic_value, reduced_matrix

# |c_n| below this fraction of lam is treated as zero (any phase optimal)
DEGENERATE_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class SurrogateModel:
    lambda_max: float
    c: np.ndarray
    anchor: PhaseProfile
    a_red: np.ndarray

    @property
    def anchor_value(self) -> float:
        return quadratic_value(self.a_red, compact_vector(self.anchor))


def build_surrogate(anchor: PhasesLike, a_red: np.ndarray, lam: float) -> SurrogateModel:
    anchor = anchor if isinstance(anchor, PhaseProfile) else PhaseProfile(anchor)
    x = compact_vector(anchor)
    c = lam * x - a_red @ x
    return SurrogateModel(lam, c, anchor, a_red)


def surrogate_value(phases: PhasesLike, model: SurrogateModel) -> float:
    """f(x | anchor) for unit-modulus x = exp(-1j*theta)."""
    x = compact_vector(phases)
    n = x.size
    lam = model.lambda_max
    return float(lam * n - 2.0 * np.real(np.vdot(x, model.c)) + lam * n - model.anchor_value)


def sfp_update(model: SurrogateModel) -> PhaseProfile:
    """Closed-form minimizer of the surrogate: align x_n with c_n.

    Where c_n vanishes the anchor's phase is kept.
    """
    theta = as_theta(model.anchor).copy()
    mag = np.abs(model.c)
    live = mag > DEGENERATE_TOL * max(model.lambda_max, np.finfo(float).tiny)
    # x_n = exp(-1j*theta_n) = exp(1j*arg c_n)
    theta[live] = -np.angle(model.c[live])
    return PhaseProfile(theta)


def optimize_phases_sfp(
    theta0: PhasesLike,
    powers: PowersLike,
    ch: ChannelRealization,
    epsilon: float = 1e-10,
    max_iters: int = 2000,
) -> PhaseSearchResult:
    """Iterate surrogate minimization until sum |Phi_new - Phi|^2 < epsilon."""
    a_red = reduced_matrix(ch, powers)
    lam = lambda_max(ch, powers)
    phases = theta0 if isinstance(theta0, PhaseProfile) else PhaseProfile(theta0)
    value = quadratic_value(a_red, compact_vector(phases))
    history = [value]
    t = 0
    while t < max_iters:
        new = sfp_update(build_surrogate(phases, a_red, lam))
        t += 1
        change = float(np.sum(np.abs(new.coefficients - phases.coefficients) ** 2))
        new_value = quadratic_value(a_red, compact_vector(new))
        if new_value > value:
            # only reachable through rounding; keep the better point
            break
        phases, value = new, new_value
        history.append(value)
        if change < epsilon:
            break
    return PhaseSearchResult(phases, value, t, tuple(history))
