"""Energy-efficiency maximization for RIS-assisted multi-user MISO downlinks."""

from .alternating import Objective, PhaseMethod, QosPolicy, SolverSpec, Stopping, maximize, maximize_ee, maximize_se
from .errors import BudgetExceeded, GridCapExceeded, Infeasible, IoFailure, RankDeficient, RisEEError
from .model import (
    ChannelRealization,
    PhaseProfile,
    PowerAllocation,
    SolveOutcome,
    SystemConfig,
    energy_efficiency,
    generate_channels,
    spectral_efficiency,
)

__version__ = "0.1.0"
