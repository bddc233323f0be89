"""System model for the RIS-assisted multi-user MISO downlink.

Channel generation, zero-forcing precoding and the spectral-efficiency,
power and energy-efficiency metrics shared by every solver live here.
Powers are in watts throughout; rates in bits/s/Hz; EE in bits/Joule.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import RankDeficient

TWO_PI = 2.0 * np.pi
RANK_TOL = 1e-10


def thermal_noise_watts(bandwidth: float) -> float:
    """Noise floor of -174 dBm/Hz integrated over ``bandwidth`` Hz, in watts."""
    dbm = -174.0 + 10.0 * np.log10(bandwidth)
    return 10.0 ** (dbm / 10.0) * 1e-3


@dataclass(frozen=True)
class SystemConfig:
    """Scenario scalars.

    Defaults are the standard simulation values (P_max = 20 dBW,
    P_BS = 9 dBW, P_UE = P_n = 10 dBm, xi = 1.2, BW = 180 kHz) at the
    desk-scale dimensions M=8, K=N=4.  ``sigma2=None`` means the thermal
    noise floor over ``BW``.

    ``allow_general`` opts out of the K = N <= M requirement; solvers that
    rely on the factorized pseudo-inverse then refuse the config, while
    metrics and the grid oracle keep working with a runtime rank check.
    """

    M: int = 8
    K: int = 4
    N: int = 4
    P_max: float = 100.0
    sigma2: float | None = None
    xi: float = 1.2
    P_BS: float = 10.0 ** 0.9
    P_UE: float = 0.01
    P_n: float = 0.01
    b: int = 4
    BW: float = 180e3
    R_min: Union[float, Sequence[float]] = 0.0
    bs_pos: tuple[float, float] = (0.0, 0.0)
    ris_pos: tuple[float, float] = (100.0, 100.0)
    user_region: tuple[float, float, float, float] = (100.0, 200.0, 0.0, 100.0)
    pathloss_ref: float = 10.0 ** -3.53
    pathloss_exp: float = 3.76
    epsilon: float = 1e-3
    allow_general: bool = False
    # AF relay benchmark
    xi_AF: float = 1.2
    P_R: float = 0.01
    P_R_max: float | None = None
    relay_noise: float | None = None

    def __post_init__(self):
        if self.sigma2 is None:
            object.__setattr__(self, "sigma2", thermal_noise_watts(self.BW))
        if self.P_R_max is None:
            object.__setattr__(self, "P_R_max", self.P_max)
        if self.relay_noise is None:
            object.__setattr__(self, "relay_noise", self.sigma2)
        if not isinstance(self.R_min, (int, float)):
            object.__setattr__(self, "R_min", tuple(float(r) for r in self.R_min))
        for name in ("bs_pos", "ris_pos", "user_region"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        self._validate()

    def _validate(self):
        if min(self.M, self.K, self.N) < 1:
            raise ValueError("M, K and N must be positive")
        if self.allow_general:
            if self.K > self.M or self.K > self.N:
                raise ValueError("general regime needs K <= M and K <= N")
        elif not (self.K == self.N and self.M >= self.N):
            raise ValueError(
                f"need K == N <= M (got M={self.M}, K={self.K}, N={self.N}); "
                "set allow_general=True for other shapes"
            )
        for name in ("P_max", "sigma2", "P_BS", "P_UE", "P_n", "BW", "epsilon",
                     "P_R_max", "relay_noise"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.xi < 0 or self.xi_AF < 0 or self.P_R < 0:
            raise ValueError("xi, xi_AF and P_R must be >= 0")
        if self.pathloss_ref <= 0:
            raise ValueError("pathloss_ref must be > 0")
        r = self.r_min
        if r.shape != (self.K,) or np.any(r < 0):
            raise ValueError("R_min must be a scalar or K nonnegative rates")

    @property
    def r_min(self) -> np.ndarray:
        """Per-user minimum rates as a length-K array."""
        r = np.asarray(self.R_min, dtype=float)
        return np.full(self.K, float(r)) if r.ndim == 0 else r.copy()

    @property
    def static_power(self) -> float:
        """Everything in the power budget that does not scale with p."""
        return self.K * self.P_UE + self.P_BS + self.N * self.P_n

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


def _frozen(a) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One Monte-Carlo draw: H1 (N x M, BS->RIS), H2 (K x N, RIS->users)."""

    H1: np.ndarray
    H2: np.ndarray
    user_positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        H1 = _frozen(np.asarray(self.H1, dtype=complex))
        H2 = _frozen(np.asarray(self.H2, dtype=complex))
        if H1.ndim != 2 or H2.ndim != 2 or H2.shape[1] != H1.shape[0]:
            raise ValueError(f"incompatible shapes H1{H1.shape}, H2{H2.shape}")
        if not (np.all(np.isfinite(H1)) and np.all(np.isfinite(H2))):
            raise ValueError("channel entries must be finite")
        object.__setattr__(self, "H1", H1)
        object.__setattr__(self, "H2", H2)
        object.__setattr__(self, "user_positions",
                           _frozen(np.asarray(self.user_positions, dtype=float)))

    @property
    def N(self) -> int:
        return self.H1.shape[0]

    @property
    def M(self) -> int:
        return self.H1.shape[1]

    @property
    def K(self) -> int:
        return self.H2.shape[0]

    def digest(self) -> str:
        """Short content hash, used to check that solvers saw the same draw."""
        h = hashlib.sha256()
        for a in (self.H1, self.H2, self.user_positions):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class PhaseProfile:
    """RIS phases in radians, stored modulo 2*pi."""

    theta: np.ndarray

    def __post_init__(self):
        t = np.mod(np.asarray(self.theta, dtype=float).reshape(-1), TWO_PI)
        t[t >= TWO_PI] = 0.0  # mod of a tiny negative rounds up to 2*pi
        object.__setattr__(self, "theta", _frozen(t))

    @classmethod
    def constant(cls, n: int, angle: float = np.pi / 2) -> "PhaseProfile":
        return cls(np.full(n, angle))

    @property
    def coefficients(self) -> np.ndarray:
        """Reflection coefficients exp(j*theta), unit modulus by construction."""
        return np.exp(1j * self.theta)

    def __len__(self):
        return self.theta.size


@dataclass(frozen=True, eq=False)
class PowerAllocation:
    """Per-user transmit powers in watts."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(-1)
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("powers must be finite and nonnegative")
        object.__setattr__(self, "p", _frozen(p))

    @classmethod
    def uniform(cls, k: int, total: float) -> "PowerAllocation":
        return cls(np.full(k, total / k))

    def __len__(self):
        return self.p.size


@dataclass(frozen=True, eq=False)
class SolveOutcome:
    """Result of one joint phase/power solve."""

    phases: PhaseProfile
    powers: PowerAllocation
    se: float
    ee: float
    total_power: float
    bs_tx_power: float
    outer_iterations: int
    feasible: bool
    qos_relaxed: bool = False
    converged: bool = True
    history: tuple = ()
    inner_iterations: int = 0
    label: str = ""
    gains: np.ndarray | None = None
    relay_power: float | None = None


PowersLike = Union[PowerAllocation, np.ndarray, Sequence[float]]
PhasesLike = Union[PhaseProfile, np.ndarray, Sequence[float]]


def as_powers(powers: PowersLike) -> np.ndarray:
    return powers.p if isinstance(powers, PowerAllocation) else np.asarray(powers, dtype=float)


def as_theta(phases: PhasesLike) -> np.ndarray:
    if isinstance(phases, PhaseProfile):
        return phases.theta
    return np.asarray(phases, dtype=float)


# --- channels ---------------------------------------------------------------

def pathloss(d, ref: float = 10.0 ** -3.53, exponent: float = 3.76):
    """Large-scale power gain ``ref / d**exponent`` (distance in meters)."""
    return ref / np.asarray(d, dtype=float) ** exponent


def _cn(rng: np.random.Generator, *shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def generate_channels(config: SystemConfig, seed: int) -> ChannelRealization:
    """Draw users uniformly in the service rectangle and Rayleigh-faded channels.

    Distances are clipped below at 1 m so a user dropped on top of the RIS
    does not produce an unbounded gain.
    """
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = config.user_region
    users = np.column_stack([rng.uniform(x0, x1, config.K), rng.uniform(y0, y1, config.K)])
    ris = np.asarray(config.ris_pos)
    d1 = max(float(np.hypot(*(ris - np.asarray(config.bs_pos)))), 1.0)
    d2 = np.maximum(np.hypot(*(users - ris).T), 1.0)
    g1 = pathloss(d1, config.pathloss_ref, config.pathloss_exp)
    g2 = pathloss(d2, config.pathloss_ref, config.pathloss_exp)
    H1 = np.sqrt(g1) * _cn(rng, config.N, config.M)
    H2 = np.sqrt(g2)[:, None] * _cn(rng, config.K, config.N)
    return ChannelRealization(H1, H2, users)


# --- precoding --------------------------------------------------------------

def effective_channel(ch: ChannelRealization, phases: PhasesLike) -> np.ndarray:
    """H2 Phi H1 (K x M)."""
    phi = np.exp(1j * as_theta(phases))
    return (ch.H2 * phi[None, :]) @ ch.H1


def right_inverse(H: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Pseudo-inverse of a wide matrix, refusing rank-deficient input."""
    k, m = H.shape
    if k > m:
        raise RankDeficient(f"{k}x{m} matrix cannot have a right inverse")
    u, s, vh = np.linalg.svd(H, full_matrices=False)
    if s[0] == 0 or s[-1] < rank_tol * s[0]:
        raise RankDeficient(f"smallest singular value {s[-1]:.3e} vs largest {s[0]:.3e}")
    return (vh.conj().T / s) @ u.conj().T


def zf_precoder(ch: ChannelRealization, phases: PhasesLike) -> np.ndarray:
    """ZF precoder G = (H2 Phi H1)^+, an M x K right inverse."""
    return right_inverse(effective_channel(ch, phases))


def bs_costs(ch: ChannelRealization, phases: PhasesLike) -> np.ndarray:
    """Squared column norms of the ZF precoder: BS watts per unit p_k."""
    G = zf_precoder(ch, phases)
    return np.sum(np.abs(G) ** 2, axis=0)


def bs_transmit_power(powers: PowersLike, ch: ChannelRealization, phases: PhasesLike) -> float:
    """tr(G P G^H) with G the ZF precoder."""
    G = zf_precoder(ch, phases)
    p = as_powers(powers)
    return float(np.real(np.trace((G * p[None, :]) @ G.conj().T)))


# --- metrics ----------------------------------------------------------------

def sinr_zf(p_k, sigma2: float):
    """Per-user SINR once ZF has removed all interference."""
    return np.asarray(p_k, dtype=float) / sigma2 if np.ndim(p_k) else float(p_k) / sigma2


def sinr(powers: PowersLike, G: np.ndarray, ch: ChannelRealization,
         phases: PhasesLike, sigma2: float) -> np.ndarray:
    """General SINR for an arbitrary precoder G (interference included)."""
    p = as_powers(powers)
    gains = np.abs(effective_channel(ch, phases) @ G) ** 2  # [k, i] = |h_k G_i|^2
    signal = p * np.diag(gains)
    interference = gains @ p - signal
    return signal / (interference + sigma2)


def spectral_efficiency(powers: PowersLike, sigma2: float) -> float:
    return float(np.sum(np.log2(1.0 + as_powers(powers) / sigma2)))


def total_power(powers: PowersLike, config: SystemConfig) -> float:
    return float(config.xi * np.sum(as_powers(powers)) + config.static_power)


def energy_efficiency(powers: PowersLike, config: SystemConfig) -> float:
    return config.BW * spectral_efficiency(powers, config.sigma2) / total_power(powers, config)


def make_outcome(phases: PhasesLike, powers: PowersLike, ch: ChannelRealization,
                 config: SystemConfig, **extra) -> SolveOutcome:
    """Assemble a SolveOutcome with every metric recomputed from (phases, powers)."""
    ph = phases if isinstance(phases, PhaseProfile) else PhaseProfile(phases)
    pw = powers if isinstance(powers, PowerAllocation) else PowerAllocation(powers)
    try:
        bs = bs_transmit_power(pw, ch, ph)
    except RankDeficient:
        bs = float("inf")
    extra.setdefault("outer_iterations", 0)
    extra.setdefault("feasible", bool(bs <= config.P_max * (1 + 1e-9)))
    return SolveOutcome(
        phases=ph,
        powers=pw,
        se=spectral_efficiency(pw, config.sigma2),
        ee=energy_efficiency(pw, config),
        total_power=total_power(pw, config),
        bs_tx_power=bs,
        **extra,
    )
