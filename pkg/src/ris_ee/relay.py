"""Amplify-and-forward relay baseline.

The RIS is replaced by an N-antenna AF relay with a diagonal complex gain
matrix V.  Unlike the RIS, V amplifies the relay's own receiver noise and
draws RF power from the relay budget.  The gains are searched exhaustively
on a magnitude x phase grid; for every grid V the power subproblem is a
single-ratio problem with two linear budgets (BS and relay) and is solved
globally by Dinkelbach, all grid points at once.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import GridCapExceeded, Infeasible
from .model import (
    ChannelRealization,
    PhaseProfile,
    PowerAllocation,
    PowersLike,
    SolveOutcome,
    SystemConfig,
    as_powers,
    right_inverse,
)
from .oracle import angle_grid
from .power import FEAS_RTOL, dinkelbach_batch, qos_floor


@dataclass(frozen=True, eq=False)
class RelayGains:
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v", np.asarray(self.v, dtype=complex).reshape(-1))


@dataclass(frozen=True)
class RelayGrid:
    """Per-element magnitudes linspace(0, v_max, magnitude_levels) x phase_levels angles."""

    magnitude_levels: int = 8
    phase_levels: int = 16
    max_elements: int = 4
    budget: float = 2e6

    def refined(self) -> "RelayGrid":
        """Twice the resolution; contains every point of this grid."""
        return RelayGrid(2 * self.magnitude_levels - 1, 2 * self.phase_levels,
                         self.max_elements, self.budget)


def noise_amplification(gains: RelayGains, ch: ChannelRealization, squared: bool = True) -> np.ndarray:
    """Per-user |h_k V V^H h_k^H|^2 (or the unsquared quadratic form)."""
    s = np.abs(ch.H2) ** 2 @ np.abs(gains.v) ** 2
    return s ** 2 if squared else s


def relay_rate(powers: PowersLike, gains: RelayGains, ch: ChannelRealization, sigma2: float,
               squared: bool = True) -> float:
    amp = noise_amplification(gains, ch, squared)
    return float(np.sum(np.log2(1.0 + as_powers(powers) / (amp + sigma2))))


def relay_power(powers: PowersLike, gains: RelayGains, ch: ChannelRealization, sigma2: float) -> float:
    """tr(H2^+ P H2^+H + V V^H sigma2)."""
    H2p = right_inverse(ch.H2)
    p = as_powers(powers)
    return float(np.real(np.trace((H2p * p[None, :]) @ H2p.conj().T))
                 + sigma2 * np.sum(np.abs(gains.v) ** 2))


def relay_bs_power(powers: PowersLike, gains: RelayGains, ch: ChannelRealization) -> float:
    """tr((H2 V H1)^+ P (H2 V H1)^+H)."""
    G = right_inverse((ch.H2 * gains.v[None, :]) @ ch.H1)
    p = as_powers(powers)
    return float(np.real(np.trace((G * p[None, :]) @ G.conj().T)))


def relay_total_power(powers: PowersLike, gains: RelayGains, ch: ChannelRealization,
                      config: SystemConfig) -> float:
    p = as_powers(powers)
    return float(config.xi * p.sum() + config.P_BS + config.K * config.P_UE
                 + config.xi_AF * relay_power(p, gains, ch, config.relay_noise)
                 + config.N * config.P_R)


def relay_ee(powers: PowersLike, gains: RelayGains, ch: ChannelRealization, config: SystemConfig,
             squared: bool = True) -> float:
    rate = relay_rate(powers, gains, ch, config.sigma2, squared)
    return config.BW * rate / relay_total_power(powers, gains, ch, config)


def gain_candidates(ch: ChannelRealization, config: SystemConfig, grid: RelayGrid,
                    r_min=None) -> np.ndarray:
    """All grid gain vectors, first element's phase pinned to zero.

    A common phase on V leaves rates and both budgets unchanged.
    """
    n = ch.N
    if n > grid.max_elements:
        raise GridCapExceeded(f"N={n} exceeds the exhaustive-search cap {grid.max_elements}")
    total = grid.magnitude_levels ** n * grid.phase_levels ** (n - 1)
    if total > grid.budget:
        raise GridCapExceeded(f"{total} grid points exceed budget {grid.budget:.3g}")
    r = config.r_min if r_min is None else np.broadcast_to(r_min, (ch.K,))
    floors = qos_floor(r, config.sigma2)
    H2p = right_inverse(ch.H2)
    used = float(np.sum(np.abs(H2p) ** 2, axis=0) @ floors)
    v_max = np.sqrt(max(config.P_R_max - used, 0.0) / config.relay_noise)
    mags = np.linspace(0.0, v_max, grid.magnitude_levels)
    phases = angle_grid(grid.phase_levels)
    m = np.array(list(itertools.product(mags, repeat=n)))
    a = np.array(list(itertools.product(phases, repeat=n - 1))) if n > 1 else np.zeros((1, 0))
    a = np.column_stack([np.zeros(len(a)), a])
    return (m[:, None, :] * np.exp(1j * a)[None, :, :]).reshape(-1, n)


def _bs_costs(v: np.ndarray, ch: ChannelRealization) -> np.ndarray:
    H = np.einsum("kn,gn,nm->gkm", ch.H2, v, ch.H1)
    gram = H @ np.conj(np.swapaxes(H, -1, -2))
    ev = np.linalg.eigvalsh(gram)
    ok = ev[:, 0] > 1e-12 * np.maximum(ev[:, -1], np.finfo(float).tiny)
    inv = np.linalg.inv(np.where(ok[:, None, None], gram, np.eye(ch.K)))
    c = np.real(np.diagonal(inv, axis1=-2, axis2=-1)).copy()
    c[~ok] = np.inf
    return c


def optimize_relay(ch: ChannelRealization, config: SystemConfig, grid: RelayGrid = RelayGrid(),
                   squared: bool = True, r_min=None) -> SolveOutcome:
    """Best (V, P) over the gain grid with globally optimal powers per V.

    Ties go to the first grid point in enumeration order.  Raises
    Infeasible when no grid V admits the QoS floors under both budgets.
    """
    v = gain_candidates(ch, config, grid, r_min)
    r = config.r_min if r_min is None else np.broadcast_to(r_min, (ch.K,))
    c = _bs_costs(v, ch)
    finite = np.all(np.isfinite(c), axis=1)
    v, c = v[finite], c[finite]
    if len(v) == 0:
        raise Infeasible("no relay gain on the grid gives an invertible channel")

    s = np.abs(ch.H2)[None, :, :] ** 2 @ (np.abs(v) ** 2)[:, :, None]
    s = s[..., 0]
    amp = s ** 2 if squared else s
    noise = amp + config.sigma2
    floors = noise * (np.exp2(r) - 1.0)
    d = np.sum(np.abs(right_inverse(ch.H2)) ** 2, axis=0)
    vv = np.sum(np.abs(v) ** 2, axis=1)
    A = np.stack([c, np.broadcast_to(d, c.shape)], axis=1)
    b = np.stack([np.full(len(v), config.P_max), config.P_R_max - config.relay_noise * vv], axis=1)
    weights = config.xi + config.xi_AF * d
    static = (config.P_BS + config.K * config.P_UE + config.N * config.P_R
              + config.xi_AF * config.relay_noise * vv)
    res = dinkelbach_batch(weights, noise, floors, A, b, static, config.epsilon)

    ee = np.where(np.isnan(res.lam), -np.inf, res.lam)
    if not np.any(np.isfinite(ee)):
        raise Infeasible("QoS floors violate a budget for every grid gain")
    i = int(np.argmax(ee))
    gains = RelayGains(v[i])
    p = PowerAllocation(np.maximum(res.powers[i], 0.0))
    rate = relay_rate(p, gains, ch, config.sigma2, squared)
    tot = relay_total_power(p, gains, ch, config)
    bs = relay_bs_power(p, gains, ch)
    relay_used = relay_power(p, gains, ch, config.relay_noise)
    feasible = bs <= config.P_max * (1 + FEAS_RTOL) and relay_used <= config.P_R_max * (1 + FEAS_RTOL)
    return SolveOutcome(
        phases=PhaseProfile(np.angle(gains.v)),
        powers=p,
        se=rate,
        ee=config.BW * rate / tot,
        total_power=tot,
        bs_tx_power=bs,
        outer_iterations=1,
        feasible=bool(feasible),
        converged=bool(res.converged),
        history=(config.BW * rate / tot,),
        inner_iterations=int(res.iterations),
        label="relay",
        gains=gains.v,
        relay_power=relay_used,
    )
