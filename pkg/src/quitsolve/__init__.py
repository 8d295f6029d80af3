"""Equilibria of general quitting games: auxiliary reductions, logit paths and verification."""

from .errors import (
    AbsorptionCollapse,
    ConvergenceFailure,
    DegenerateSupport,
    IndifferenceRootNotBracketed,
    InvalidGame,
    InvalidProfile,
    MalformedHistory,
    NonAbsorbingProfile,
    PathStalled,
    QuitSolveError,
)
from .game import (
    GeneralQuittingGame,
    MixedProfile,
    SplitProfile,
    absorption_probability,
    compose_profile,
    discounted_stationary_value,
    expected_absorbing_payoff,
    game_from_arrays,
    game_from_dict,
    game_to_dict,
    load_game,
    split_profile,
    undiscounted_stationary_value,
)

__version__ = "0.1.0"

__all__ = [
    "AbsorptionCollapse",
    "ConvergenceFailure",
    "DegenerateSupport",
    "GeneralQuittingGame",
    "IndifferenceRootNotBracketed",
    "InvalidGame",
    "InvalidProfile",
    "MalformedHistory",
    "MixedProfile",
    "NonAbsorbingProfile",
    "PathStalled",
    "QuitSolveError",
    "SplitProfile",
    "absorption_probability",
    "compose_profile",
    "discounted_stationary_value",
    "expected_absorbing_payoff",
    "game_from_arrays",
    "game_from_dict",
    "game_to_dict",
    "load_game",
    "split_profile",
    "undiscounted_stationary_value",
]
