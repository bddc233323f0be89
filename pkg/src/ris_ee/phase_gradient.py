"""Phase optimization by Polak-Ribiere-Polyak conjugate gradient.

Minimizes the BS transmit power F(theta) = x^H A x (x = exp(-1j*theta))
for fixed user powers.  The phases are unconstrained reals, so the
unit-modulus constraint never has to be projected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    ChannelRealization,
    PhaseProfile,
    PhasesLike,
    PowersLike,
    as_theta,
    bs_transmit_power,
)
from .quadratic import compact_vector, quadratic_value, reduced_matrix

ARMIJO_C = 1e-4
MAX_HALVINGS = 60
# gradients below this fraction of F are rounding noise
GRAD_RTOL = 1e-13


@dataclass(frozen=True)
class GradientState:
    theta: PhaseProfile
    x: np.ndarray
    q: np.ndarray
    d: np.ndarray
    objective: float


@dataclass(frozen=True)
class PhaseSearchResult:
    """Output of a phase optimizer: the phases plus its convergence trace."""

    phases: PhaseProfile
    objective: float
    iterations: int
    history: tuple
    stalled: bool = False


def objective_F(theta: PhasesLike, powers: PowersLike, ch: ChannelRealization) -> float:
    """BS power needed to serve ``powers`` with ZF through the given phases.

    Uses the reduced quadratic form when K == N <= M and the direct trace
    otherwise.
    """
    if ch.K == ch.N <= ch.M:
        return quadratic_value(reduced_matrix(ch, powers), compact_vector(theta))
    return bs_transmit_power(powers, ch, theta)


def _grad(a_red: np.ndarray, x: np.ndarray) -> np.ndarray:
    return 2.0 * np.real(1j * x.conj() * (a_red @ x))


def gradient_F(theta: PhasesLike, powers: PowersLike, ch: ChannelRealization) -> np.ndarray:
    """dF/dtheta, length N."""
    return _grad(reduced_matrix(ch, powers), compact_vector(theta))


def taylor_coefficients(a_red: np.ndarray, x: np.ndarray, d: np.ndarray) -> tuple[float, float, float]:
    """Second-order model of h(mu) = F(theta + mu*d) around mu = 0.

    Returns (z0, z1, z2) with h(mu) ~ z0 - z1*mu + z2*mu**2, so z1 is the
    rate of decrease and z2 the half-curvature.
    """
    ax = a_red @ x
    u = x * d
    v = x * d * d
    z0 = float(np.real(np.vdot(x, ax)))
    slope = float(np.sum(2.0 * np.real(1j * x.conj() * ax) * d))
    curvature = 2.0 * float(np.real(np.vdot(u, a_red @ u))) - 2.0 * float(np.real(np.vdot(v, ax)))
    return z0, -slope, 0.5 * curvature


def model_step(z1: float, z2: float) -> float | None:
    """Minimizer z1/(2*z2) of the quadratic model, or None if the model is unusable."""
    if z1 >= 0 and z2 > 0:
        return z1 / (2.0 * z2)
    return None


def step_size(state: GradientState, a_red: np.ndarray) -> tuple[float, bool]:
    """Step along ``state.d``: quadratic-model minimizer, then Armijo backtracking.

    Returns (mu, stalled).  Any accepted mu satisfies h(mu) < h(0).  The
    step never moves any phase by more than pi.
    """
    d = state.d
    amax = float(np.max(np.abs(d))) if d.size else 0.0
    slope = float(state.q @ d)
    if amax == 0.0 or slope >= 0.0:
        return 0.0, True
    _, z1, z2 = taylor_coefficients(a_red, state.x, d)
    mu_cap = np.pi / amax
    mu = model_step(z1, z2)
    mu = mu_cap if mu is None else min(mu, mu_cap)
    for _ in range(MAX_HALVINGS):
        h = quadratic_value(a_red, state.x * np.exp(-1j * mu * d))
        if h <= state.objective + ARMIJO_C * mu * slope and h < state.objective:
            return mu, False
        mu *= 0.5
    return 0.0, True


def prp_direction(q_new: np.ndarray, q_old: np.ndarray, d_old: np.ndarray) -> np.ndarray:
    """Polak-Ribiere-Polyak update, reset to steepest descent if not a descent direction.

    A zero previous gradient means the previous iterate was stationary; the
    zero direction is returned.
    """
    nq = float(q_old @ q_old)
    if nq == 0.0:
        return np.zeros_like(q_new)
    beta = float((q_new - q_old) @ q_new) / nq
    d = -q_new + beta * d_old
    if float(q_new @ d) >= 0.0:
        d = -q_new
    return d


def optimize_phases_gradient(
    theta0: PhasesLike,
    powers: PowersLike,
    ch: ChannelRealization,
    epsilon: float = 1e-10,
    max_iters: int = 500,
) -> PhaseSearchResult:
    """Minimize F over the phases by safeguarded PRP conjugate gradient.

    Stops when sum |exp(1j*theta_new) - exp(1j*theta)|^2 < epsilon, after
    ``max_iters`` iterations, or when no descent step can be found along
    the steepest-descent direction either (stall).
    """
    a_red = reduced_matrix(ch, powers)
    theta = as_theta(theta0).astype(float).copy()
    x = compact_vector(theta)
    q = _grad(a_red, x)
    state = GradientState(PhaseProfile(theta), x, q, -q, quadratic_value(a_red, x))
    history = [state.objective]
    stalled = False
    t = 0
    while t < max_iters:
        if np.max(np.abs(state.q)) <= GRAD_RTOL * abs(state.objective):
            break
        mu, stuck = step_size(state, a_red)
        if stuck and not np.array_equal(state.d, -state.q):
            # conjugate direction failed; retry once along the gradient
            state = GradientState(state.theta, state.x, state.q, -state.q, state.objective)
            mu, stuck = step_size(state, a_red)
        if stuck:
            stalled = bool(np.any(state.q))
            break
        t += 1
        theta = theta + mu * state.d
        x_new = compact_vector(theta)
        q_new = _grad(a_red, x_new)
        d_new = prp_direction(q_new, state.q, state.d)
        change = float(np.sum(np.abs(x_new - state.x) ** 2))
        state = GradientState(PhaseProfile(theta), x_new, q_new, d_new, quadratic_value(a_red, x_new))
        history.append(state.objective)
        if change < epsilon:
            break
    return PhaseSearchResult(PhaseProfile(theta), state.objective, t, tuple(history), stalled)
