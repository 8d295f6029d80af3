"""Independent certification of equilibria: regrets, oracles and simulation."""

from .nash import brute_force_nash
from .regret import (
    AuxClassification,
    Discounted,
    RegretReport,
    Undiscounted,
    best_pure_deviation,
    check_aux_absorbing_equilibrium,
    check_epsilon_equilibrium,
    grid_deviation_max,
    stationary_value,
)
from .simulate import (
    HistoryStrategy,
    LiftedStrategy,
    SignalThresholdStrategy,
    SimulationEstimate,
    StationaryStrategy,
    horizon_for,
    monte_carlo_payoff,
    stationary_strategies,
)

__all__ = [
    "AuxClassification",
    "Discounted",
    "HistoryStrategy",
    "LiftedStrategy",
    "RegretReport",
    "SignalThresholdStrategy",
    "SimulationEstimate",
    "StationaryStrategy",
    "Undiscounted",
    "a2_diagnostic",
    "best_pure_deviation",
    "brute_force_nash",
    "check_aux_absorbing_equilibrium",
    "check_epsilon_equilibrium",
    "grid_deviation_max",
    "horizon_for",
    "monte_carlo_payoff",
    "stationary_strategies",
    "stationary_value",
]


def a2_diagnostic(*args, **kwargs):
    # Imported lazily: the diagnostics use the path solvers, which import this package.
    from .diagnostics import a2_diagnostic as impl

    return impl(*args, **kwargs)
