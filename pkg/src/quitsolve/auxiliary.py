"""Auxiliary binary quitting games obtained by freezing continue behaviour.

In the auxiliary game each player only chooses between quitting and
continuing; continuing means playing the fixed mix ``alpha_i`` over the
original continue actions, and the nonabsorbing stage payoff is ``q``.
Binary action index 0 is ``Q`` and index 1 is ``C``, matching the base
game's convention that index 0 is the quit action.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import MalformedHistory
from .game import (
    GeneralQuittingGame,
    MixedProfile,
    SplitProfile,
    compose_profile,
    contract,
    discounted_stationary_value,
    undiscounted_stationary_value,
)


def _alpha_tuple(g: GeneralQuittingGame, alpha) -> tuple[np.ndarray, ...]:
    # SplitProfile validates each mix.
    s = SplitProfile(tuple(alpha), np.zeros(g.num_players))
    for i, (a, k) in enumerate(zip(s.alpha, g.action_counts)):
        if a.size != k - 1:
            raise ValueError(f"alpha[{i}] has {a.size} entries, player has {k - 1} continue actions")
    return s.alpha


def binary_absorbing_table(g: GeneralQuittingGame, alpha) -> np.ndarray:
    """Table of u(alpha_J, Q_{I\\J}) over binary profiles; the all-continue entry is left at 0."""
    return _absorbing_table(g, _alpha_tuple(g, alpha))


def _absorbing_table(g: GeneralQuittingGame, alpha) -> np.ndarray:
    # alpha is already validated; normalizing it again could move it by an ulp.
    n = g.num_players
    table = np.zeros((2,) * n + (n,))
    for b in itertools.product((0, 1), repeat=n):
        if all(b):
            continue
        vecs = []
        for i, bi in enumerate(b):
            v = np.zeros(g.action_counts[i])
            if bi == 0:
                v[0] = 1.0
            else:
                v[1:] = alpha[i]
            vecs.append(v)
        table[b] = contract(g.payoff, vecs)
    return table


@dataclass(frozen=True, eq=False)
class AuxiliaryQuittingGame:
    base: GeneralQuittingGame
    alpha: tuple[np.ndarray, ...]
    q: np.ndarray
    payoff: np.ndarray = field(repr=False)

    @property
    def num_players(self) -> int:
        return self.base.num_players

    def as_game(self) -> GeneralQuittingGame:
        """The auxiliary game as a quitting game with one continue action each.

        Its stored nonabsorbing entry is 0; pass ``self.q`` explicitly to the
        value functions.
        """
        table = np.array(self.payoff)
        table[(1,) * self.num_players] = 0.0
        return GeneralQuittingGame(
            self.base.players, tuple(("C",) for _ in self.base.players), table
        )

    def to_dict(self) -> dict:
        entries = []
        for b in itertools.product((0, 1), repeat=self.num_players):
            entries.append(
                {
                    "profile": {p: ("C" if bi else "Q") for p, bi in zip(self.base.players, b)},
                    "u": {p: float(self.payoff[b + (i,)]) for i, p in enumerate(self.base.players)},
                }
            )
        return {
            "players": list(self.base.players),
            "alpha": {p: a.tolist() for p, a in zip(self.base.players, self.alpha)},
            "q": self.q.tolist(),
            "payoffs": entries,
        }


def build_auxiliary(g: GeneralQuittingGame, alpha, q) -> AuxiliaryQuittingGame:
    alpha = _alpha_tuple(g, alpha)
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.size != g.num_players:
        raise ValueError(f"q has {q.size} entries for {g.num_players} players")
    table = _absorbing_table(g, alpha)
    table[(1,) * g.num_players] = q
    table.setflags(write=False)
    q = q.copy()
    q.setflags(write=False)
    return AuxiliaryQuittingGame(g, alpha, q, table)


def lift_stationary(aux: AuxiliaryQuittingGame, xhat) -> MixedProfile:
    return compose_profile(SplitProfile(aux.alpha, np.asarray(xhat, dtype=float)))


def binary_profile(xhat) -> MixedProfile:
    """Mixed profile (Q: xhat_i, C: 1 - xhat_i) in a binary game."""
    return MixedProfile(tuple(np.array([z, 1.0 - z]) for z in np.asarray(xhat, dtype=float)))


def project_history(h: Sequence, num_players: int | None = None) -> tuple:
    """Relabel every continue action as the auxiliary ``C`` (index 1).

    A history is the flat sequence ``(y^1, a^1, y^2, ..., a^{t-1}, y^t)``
    with signals in [0, 1] and action profiles as tuples of action indices
    (0 is quit); it may also end with the absorbing profile.  Signals pass
    through unchanged.
    """
    out = []
    for pos, item in enumerate(h):
        if pos % 2 == 0:
            try:
                y = float(item)
            except (TypeError, ValueError):
                raise MalformedHistory(f"position {pos}: expected a signal, got {item!r}") from None
            if not (0.0 <= y <= 1.0):
                raise MalformedHistory(f"position {pos}: signal {y} outside [0, 1]")
            out.append(item)
        else:
            try:
                prof = tuple(int(a) for a in item)
            except TypeError:
                raise MalformedHistory(f"position {pos}: expected an action profile, got {item!r}") from None
            if num_players is not None and len(prof) != num_players:
                raise MalformedHistory(f"position {pos}: profile has {len(prof)} actions, expected {num_players}")
            if any(a < 0 for a in prof):
                raise MalformedHistory(f"position {pos}: negative action index")
            if pos != len(h) - 1 and any(a == 0 for a in prof):
                raise MalformedHistory(f"position {pos}: play continues after an absorbing profile")
            out.append(tuple(0 if a == 0 else 1 for a in prof))
    return tuple(out)


@dataclass
class EquivalenceReport:
    base_value: np.ndarray
    aux_value: np.ndarray
    gap: float
    mode: str


def payoff_equivalence_check(g: GeneralQuittingGame, alpha, q, xhat, lam: float | None = None) -> EquivalenceReport:
    """Compare the lifted profile's value in the base game with xhat's value in the auxiliary game.

    The base side contracts the full payoff table with the composed mixed
    profile; the auxiliary side contracts the 2^I binary table with xhat.
    """
    aux = build_auxiliary(g, alpha, q)
    x = lift_stationary(aux, xhat)
    xb = binary_profile(xhat)
    ag = aux.as_game()
    if lam is None:
        base = undiscounted_stationary_value(g, x, aux.q)
        other = undiscounted_stationary_value(ag, xb, aux.q)
        mode = "undiscounted"
    else:
        base = discounted_stationary_value(g, x, lam, aux.q)
        other = discounted_stationary_value(ag, xb, lam, aux.q)
        mode = f"discounted({lam})"
    return EquivalenceReport(base, other, float(np.max(np.abs(base - other))), mode)
