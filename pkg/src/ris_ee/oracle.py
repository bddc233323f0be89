"""Brute-force reference optimizers for tiny dimensions.

Costs are computed as diag((H H^H)^-1) for the effective channel H, which
equals the squared column norms of its right pseudo-inverse.  This path
shares nothing with the quadratic-form machinery the iterative solvers use.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded
from .model import (
    ChannelRealization,
    PhaseProfile,
    PowersLike,
    SolveOutcome,
    SystemConfig,
    as_powers,
    make_outcome,
)
from .power import qos_floor

CHUNK = 1 << 15


@dataclass(frozen=True)
class GridSpec:
    points_per_angle: int = 721
    points_per_power: int = 101
    max_dim: int = 4
    max_users: int = 3
    budget: float = 1e8


def angle_grid(points: int) -> np.ndarray:
    return np.linspace(0.0, 2.0 * np.pi, points, endpoint=False)


def phase_points(n: int, points: int) -> np.ndarray:
    """All grid phase vectors with theta_0 = 0.

    A common phase rotation leaves every ZF cost unchanged and the grid is
    closed under rotation by its own step, so pinning the first angle loses
    nothing.
    """
    if n == 1:
        return np.zeros((1, 1))
    rest = np.array(list(itertools.product(angle_grid(points), repeat=n - 1)))
    return np.column_stack([np.zeros(len(rest)), rest])


def batch_costs(thetas: np.ndarray, ch: ChannelRealization) -> np.ndarray:
    """ZF costs c_k for each row of ``thetas``; inf where the channel is singular."""
    thetas = np.atleast_2d(thetas)
    out = np.empty((len(thetas), ch.K))
    for s in range(0, len(thetas), CHUNK):
        phi = np.exp(1j * thetas[s:s + CHUNK])
        H = np.einsum("kn,gn,nm->gkm", ch.H2, phi, ch.H1)
        gram = H @ np.conj(np.swapaxes(H, -1, -2))
        ev = np.linalg.eigvalsh(gram)
        ok = ev[:, 0] > 1e-20 * ev[:, -1]
        inv = np.linalg.inv(np.where(ok[:, None, None], gram, np.eye(ch.K)))
        c = np.real(np.diagonal(inv, axis1=-2, axis2=-1)).copy()
        c[~ok] = np.inf
        out[s:s + CHUNK] = c
    return out


def _check(n_points: float, grid: GridSpec, n: int):
    if n > grid.max_dim:
        raise BudgetExceeded(f"N={n} exceeds max_dim={grid.max_dim}")
    if n_points > grid.budget:
        raise BudgetExceeded(f"{n_points:.3g} evaluations exceed budget {grid.budget:.3g}")


def phase_grid_min_F(powers: PowersLike, ch: ChannelRealization,
                     grid: GridSpec = GridSpec()) -> tuple[PhaseProfile, float]:
    """Minimize the ZF transmit power sum_k c_k p_k over the angle grid."""
    n_pts = grid.points_per_angle ** max(ch.N - 1, 0)
    _check(n_pts, grid, ch.N)
    thetas = phase_points(ch.N, grid.points_per_angle)
    f = batch_costs(thetas, ch) @ as_powers(powers)
    i = int(np.argmin(f))
    return PhaseProfile(thetas[i]), float(f[i])


def power_fractions(points: int, boundary_only: bool, k: int) -> np.ndarray:
    """Per-user shares f_k of the BS budget (p_k = f_k * P_max / c_k).

    ``boundary_only`` keeps the lattice sum f = 1 (enough for rate-type
    objectives, which never leave budget unused).  Otherwise shares mix a
    uniform and a geometric ladder so interior optima at small power are
    resolved too, and any sum f <= 1 is allowed.
    """
    if boundary_only:
        steps = points - 1
        combos = [c for c in itertools.product(range(steps + 1), repeat=k - 1) if sum(c) <= steps]
        f = np.array([list(c) + [steps - sum(c)] for c in combos], dtype=float) / steps
        return f
    ladder = np.unique(np.concatenate([[0.0], np.linspace(0, 1, points), np.geomspace(1e-6, 1, points)]))
    f = np.array(list(itertools.product(ladder, repeat=k)))
    return f[f.sum(axis=1) <= 1.0 + 1e-12]


def joint_grid_max(ch: ChannelRealization, config: SystemConfig, objective: str = "ee",
                   grid: GridSpec = GridSpec(), r_min=None) -> SolveOutcome:
    """Global maximum of EE or sum rate over the product of angle and power grids.

    ``objective`` is "ee" or "se" / "sum_rate".  Grid points that violate
    the QoS floors are discarded.
    """
    if objective not in ("ee", "se", "sum_rate"):
        raise ValueError(f"unknown objective {objective!r}")
    rate_only = objective != "ee"
    if ch.K > grid.max_users:
        raise BudgetExceeded(f"K={ch.K} exceeds max_users={grid.max_users}")
    fr = power_fractions(grid.points_per_power, rate_only, ch.K)
    thetas = phase_points(ch.N, grid.points_per_angle)
    _check(len(thetas) * len(fr), grid, ch.N)

    r = config.r_min if r_min is None else np.broadcast_to(r_min, (ch.K,))
    floors = qos_floor(r, config.sigma2)
    best = (-np.inf, 0, 0)
    costs = batch_costs(thetas, ch)
    step = max(1, CHUNK // max(len(fr), 1))
    for s in range(0, len(thetas), step):
        c = costs[s:s + step]
        with np.errstate(divide="ignore", invalid="ignore"):
            p = fr[None, :, :] * config.P_max / c[:, None, :]
        p = np.where(np.isfinite(p), p, 0.0)
        ok = np.all(p >= floors * (1 - 1e-12), axis=-1) & np.all(np.isfinite(c), axis=-1)[:, None]
        se = np.sum(np.log2(1.0 + p / config.sigma2), axis=-1)
        if rate_only:
            val = se
        else:
            val = config.BW * se / (config.xi * p.sum(axis=-1) + config.static_power)
        val = np.where(ok, val, -np.inf)
        i = int(np.argmax(val))
        if val.flat[i] > best[0]:
            gi, fi = np.unravel_index(i, val.shape)
            best = (float(val.flat[i]), s + gi, fi)
    _, gi, fi = best
    if best[0] == -np.inf:
        return make_outcome(thetas[0], floors, ch, config, feasible=False, label="grid")
    p = fr[fi] * config.P_max / costs[gi]
    return make_outcome(thetas[gi], p, ch, config, label="grid")
