"""Power allocation for fixed phases via Dinkelbach's algorithm.

The ratio  sum_k log2(1 + p_k/n_k) / (w . p + P_static)  is maximized over
p >= p_min and a small number of linear budget rows A p <= b.  Each
Dinkelbach step solves the parametric concave problem in closed form:

    p_k = max(p_min_k, 1/(ln2 * (lam*w_k + sum_j nu_j*A_jk)) - n_k)

with the multipliers nu found by bisection (nested for two rows).  All
routines broadcast over leading axes so a whole grid of instances can be
solved at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Infeasible
from .model import PowerAllocation, SystemConfig

LN2 = np.log(2.0)
BISECT_ITERS = 200
BISECT_RTOL = 4e-16
FEAS_RTOL = 1e-9


def qos_floor(r_min, sigma2: float):
    """Smallest power that delivers rate ``r_min`` under interference-free ZF."""
    return sigma2 * (np.exp2(r_min) - 1.0)


@dataclass(frozen=True, eq=False)
class PowerFeasibleSet:
    """{p : p >= p_min, sum_k c_k p_k <= P_max}."""

    p_min: np.ndarray
    c: np.ndarray
    P_max: float

    @property
    def feasible(self) -> bool:
        return float(self.c @ self.p_min) <= self.P_max * (1 + FEAS_RTOL)

    def rows(self) -> tuple[np.ndarray, np.ndarray]:
        return self.c[None, :], np.array([self.P_max])


def feasible_set(config: SystemConfig, costs: np.ndarray, r_min=None) -> PowerFeasibleSet:
    r = config.r_min if r_min is None else np.broadcast_to(r_min, (config.K,))
    return PowerFeasibleSet(qos_floor(r, config.sigma2), np.asarray(costs, dtype=float), config.P_max)


def _powers(s, noise, p_min):
    with np.errstate(divide="ignore"):
        return np.maximum(p_min, 1.0 / (LN2 * s) - noise)


def _upper_multiplier(a, noise, p_min):
    """Multiplier at which every user constrained by row ``a`` sits at its floor."""
    with np.errstate(divide="ignore"):
        bound = np.where(a > 0, 1.0 / (LN2 * a * (p_min + noise)), 0.0)
    return np.max(bound, axis=-1)


def _solve_one_row(base, a, b, noise, p_min):
    """Smallest nu >= 0 with a . p(base + nu*a) <= b; returns p on the feasible side."""
    p0 = _powers(base, noise, p_min)
    slack_at_zero = np.all(base > 0, axis=-1) & (np.sum(a * p0, axis=-1) <= b)
    lo = np.zeros(np.shape(b))
    hi = _upper_multiplier(a, noise, p_min)
    for _ in range(BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        over = np.sum(a * _powers(base + mid[..., None] * a, noise, p_min), axis=-1) > b
        lo = np.where(over, mid, lo)
        hi = np.where(over, hi, mid)
        if np.all(hi - lo <= BISECT_RTOL * hi):
            break
    nu = np.where(slack_at_zero, 0.0, hi)
    return _powers(base + nu[..., None] * a, noise, p_min), nu


def kkt_powers(lam, weights, noise, p_min, A, b):
    """Maximizer of sum log2(1 + p/n) - lam*(w . p) over {p >= p_min, A p <= b}.

    Shapes: lam (...), weights/noise/p_min (..., K), A (..., J, K), b (..., J)
    with J in {1, 2}.  Every row of A must put positive weight on any user
    whose lam*w_k is zero, otherwise the problem is unbounded.
    """
    lam = np.asarray(lam, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    base = lam[..., None] * weights
    base = np.broadcast_to(base, np.broadcast_shapes(base.shape, np.shape(noise), np.shape(p_min)))
    if A.shape[-2] == 1:
        p, _ = _solve_one_row(base, A[..., 0, :], b[..., 0], noise, p_min)
        return p
    if A.shape[-2] != 2:
        raise ValueError("at most two budget rows are supported")
    a1, a2 = A[..., 0, :], A[..., 1, :]
    b1, b2 = b[..., 0], b[..., 1]
    p, _ = _solve_one_row(base, a1, b1, noise, p_min)
    done = np.sum(a2 * p, axis=-1) <= b2
    # row-2 usage is non-increasing in nu2 once row 1 is re-solved
    lo = np.zeros(np.shape(b2))
    hi = _upper_multiplier(a2, noise, p_min)
    for _ in range(BISECT_ITERS // 2):
        mid = 0.5 * (lo + hi)
        pm, _ = _solve_one_row(base + mid[..., None] * a2, a1, b1, noise, p_min)
        over = np.sum(a2 * pm, axis=-1) > b2
        lo = np.where(over, mid, lo)
        hi = np.where(over, hi, mid)
        if np.all(hi - lo <= BISECT_RTOL * hi):
            break
    p_hi, _ = _solve_one_row(base + hi[..., None] * a2, a1, b1, noise, p_min)
    return np.where(done[..., None], p, p_hi)


@dataclass(frozen=True, eq=False)
class DinkelbachResult:
    powers: np.ndarray
    lam: np.ndarray
    aux: np.ndarray
    lambdas: list
    iterations: int
    converged: bool


def rate_sum(p, noise):
    return np.sum(np.log2(1.0 + p / noise), axis=-1)


def dinkelbach_batch(weights, noise, p_min, A, b, static, epsilon, max_iters=100):
    """Dinkelbach over a batch of independent single-ratio problems.

    Terminates an instance once |lam_i - lam_{i-1}| < epsilon and the
    auxiliary value N(p_i) - lam_{i-1} D(p_i) < epsilon.  When every weight
    is zero the denominator is constant and one parametric solve is exact.
    Infeasible instances (A p_min > b) come back as NaN.
    """
    weights = np.asarray(weights, dtype=float)
    noise = np.asarray(noise, dtype=float)
    p_min = np.asarray(p_min, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    static = np.asarray(static, dtype=float)
    batch = np.broadcast_shapes(np.shape(b)[:-1], np.shape(static), p_min.shape[:-1],
                                noise.shape[:-1], weights.shape[:-1])
    feas = np.all(np.einsum("...jk,...k->...j", A, p_min) <= b * (1 + FEAS_RTOL), axis=-1)
    feas = np.broadcast_to(feas, batch)
    lam = np.zeros(batch)
    aux = np.full(batch, np.inf)
    active = feas.copy()
    p = np.broadcast_to(p_min, batch + p_min.shape[-1:]).astype(float).copy()
    lambdas = [lam.copy()]
    constant_denominator = not np.any(weights)
    it = 0
    converged = False
    while it < max_iters and np.any(active):
        it += 1
        p_new = kkt_powers(lam, weights, noise, p_min, A, b)
        num = rate_sum(p_new, noise)
        den = np.sum(weights * p_new, axis=-1) + static
        lam_new = num / den
        aux_new = num - lam * den
        p = np.where(active[..., None], p_new, p)
        step = np.abs(lam_new - lam)
        aux = np.where(active, aux_new, aux)
        lam = np.where(active, lam_new, lam)
        lambdas.append(lam.copy())
        if constant_denominator:
            active[...] = False
        else:
            active &= ~((step < epsilon) & (aux_new < epsilon))
        converged = not np.any(active)
    nan = ~feas
    p = np.where(nan[..., None], np.nan, p)
    lam = np.where(nan, np.nan, lam)
    return DinkelbachResult(p, lam, aux, lambdas, it, converged)


def inner_concave_solve(lam: float, fset: PowerFeasibleSet, config: SystemConfig) -> PowerAllocation:
    """One parametric step: argmax sum log2(1+p/sigma2) - lam*(xi*sum p + static)."""
    if not fset.feasible:
        raise Infeasible("QoS floors exceed the BS power budget")
    A, b = fset.rows()
    p = kkt_powers(lam, np.full(config.K, config.xi), config.sigma2, fset.p_min, A, b)
    return PowerAllocation(p)


def dinkelbach(fset: PowerFeasibleSet, config: SystemConfig, epsilon: float | None = None,
               max_iters: int = 100, xi: float | None = None) -> DinkelbachResult:
    """Globally optimal powers for the energy-efficiency ratio on ``fset``.

    ``xi`` overrides the amplifier coefficient (0 turns the ratio into a
    sum-rate objective).  Raises Infeasible if the floors do not fit.
    """
    if not fset.feasible:
        raise Infeasible("QoS floors exceed the BS power budget")
    xi = config.xi if xi is None else xi
    A, b = fset.rows()
    res = dinkelbach_batch(np.full(config.K, xi), np.full(config.K, config.sigma2), fset.p_min,
                           A, b, config.static_power,
                           config.epsilon if epsilon is None else epsilon, max_iters)
    return DinkelbachResult(res.powers, float(res.lam), float(res.aux),
                            [float(v) for v in res.lambdas], res.iterations, res.converged)
