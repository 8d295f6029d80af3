"""Regret of stationary profiles against stationary unilateral deviations.

Against stationary opponents a deviator's value, in both the discounted
and the undiscounted evaluation, is a ratio of two functions that are
affine in the deviator's mixed action.  Such a ratio is maximised at a
vertex, so checking pure actions is enough; :func:`grid_deviation_max`
is the brute-force cross-check of that claim.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..auxiliary import binary_profile, build_auxiliary
from ..game import (
    GeneralQuittingGame,
    MixedProfile,
    SplitProfile,
    absorption_probability,
    compose_profile,
    discounted_stationary_value,
    undiscounted_stationary_value,
)

EQ_TOL = 1e-9


@dataclass(frozen=True)
class Discounted:
    lam: float
    q: np.ndarray | None = None

    def __str__(self):
        return f"discounted(lambda={self.lam})"


@dataclass(frozen=True)
class Undiscounted:
    q: np.ndarray | None = None

    def __str__(self):
        return "undiscounted"


def stationary_value(g: GeneralQuittingGame, x: MixedProfile, mode) -> np.ndarray:
    if isinstance(mode, Discounted):
        return discounted_stationary_value(g, x, mode.lam, mode.q)
    return undiscounted_stationary_value(g, x, mode.q)


@dataclass
class RegretReport:
    values: np.ndarray
    best_values: np.ndarray
    best_actions: list[int]
    raw_regrets: np.ndarray
    mode: object

    @property
    def regrets(self) -> np.ndarray:
        return np.maximum(self.raw_regrets, 0.0)

    @property
    def max_regret(self) -> float:
        return float(np.max(self.regrets))

    def to_dict(self, g: GeneralQuittingGame | None = None) -> dict:
        names = g.players if g is not None else [str(i) for i in range(len(self.values))]
        rows = {}
        for i, p in enumerate(names):
            act = self.best_actions[i]
            rows[p] = {
                "value": float(self.values[i]),
                "best_deviation_value": float(self.best_values[i]),
                "best_deviation": g.actions(i)[act] if g is not None else act,
                "regret": float(self.regrets[i]),
            }
        return {"mode": str(self.mode), "players": rows, "max_regret": self.max_regret}


def best_pure_deviation(g: GeneralQuittingGame, x, mode=None) -> RegretReport:
    if mode is None:
        mode = Undiscounted()
    if isinstance(x, SplitProfile):
        x = compose_profile(x)
    x.check_game(g)
    values = stationary_value(g, x, mode)
    best, acts = [], []
    for i in range(g.num_players):
        vals = []
        for a in range(g.action_counts[i]):
            e = np.zeros(g.action_counts[i])
            e[a] = 1.0
            vals.append(stationary_value(g, x.replace(i, e), mode)[i])
        k = int(np.argmax(vals))
        best.append(vals[k])
        acts.append(k)
    best = np.array(best)
    return RegretReport(values, best, acts, best - values, mode)


def check_epsilon_equilibrium(g: GeneralQuittingGame, x, mode=None, epsilon: float = 0.0):
    rep = best_pure_deviation(g, x, mode)
    return bool(np.all(rep.regrets <= epsilon)), rep


def simplex_grid(k: int, min_points: int = 101) -> np.ndarray:
    """Lattice points of the (k-1)-simplex at the coarsest resolution giving >= min_points."""
    if k == 1:
        return np.ones((1, 1))
    if k == 2:
        t = np.linspace(0.0, 1.0, min_points)
        return np.stack([t, 1.0 - t], axis=1)
    r = 1
    while True:
        pts = [c for c in itertools.product(range(r + 1), repeat=k - 1) if sum(c) <= r]
        if len(pts) >= min_points:
            break
        r += 1
    out = np.array([list(c) + [r - sum(c)] for c in pts], dtype=float) / r
    return out


def grid_deviation_max(g: GeneralQuittingGame, x: MixedProfile, mode, i: int, min_points: int = 101) -> float:
    """Best value player i reaches over a grid of mixed stationary deviations."""
    best = -np.inf
    for y in simplex_grid(g.action_counts[i], min_points):
        best = max(best, stationary_value(g, x.replace(i, y), mode)[i])
    return float(best)


@dataclass
class AuxClassification:
    is_equilibrium: bool
    regrets: np.ndarray
    p: float
    category: str


def check_aux_absorbing_equilibrium(g: GeneralQuittingGame, alpha, q, xhat, epsilon: float) -> AuxClassification:
    """Is xhat a stationary 0-equilibrium of the auxiliary game, and how absorbing is it?

    Categories: ``"not equilibrium"``, ``"p = 0"``, ``"p in (0, eps^2)"``
    (the small-absorption case that already yields an equilibrium of the
    base game) and ``"p >= eps^2"``.
    """
    aux = build_auxiliary(g, alpha, q)
    xb = binary_profile(xhat)
    rep = best_pure_deviation(aux.as_game(), xb, Undiscounted(aux.q))
    p = absorption_probability(aux.as_game(), xb)
    eq = bool(np.all(rep.regrets <= EQ_TOL))
    if not eq:
        cat = "not equilibrium"
    elif p == 0.0:
        cat = "p = 0"
    elif p < epsilon**2:
        cat = "p in (0, eps^2)"
    else:
        cat = "p >= eps^2"
    return AuxClassification(eq, rep.regrets, p, cat)
