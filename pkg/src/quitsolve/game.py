"""General quitting games and exact evaluation of stationary profiles.

Action index 0 of every player is the quit action ``Q``; indices
``1..k_i`` are the continue actions in declared order.  Payoffs live in a
dense array of shape ``(|A_1|, ..., |A_I|, I)``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidGame, InvalidProfile, NonAbsorbingProfile

QUIT = "Q"
PROB_TOL = 1e-12


def contract(table: np.ndarray, probs: Sequence[np.ndarray], skip: int | None = None) -> np.ndarray:
    """Multilinear extension of a payoff table.

    Contracts player axis ``j`` of ``table`` with ``probs[j]`` for every
    ``j != skip``.  With ``skip=None`` the result is the trailing payoff
    axis; with ``skip=i`` the result has shape ``(|A_i|, ...)``.
    """
    t = table
    for j in reversed(range(len(probs))):
        if j == skip:
            continue
        t = np.moveaxis(t, j, -1) @ probs[j]
    return t


@dataclass(frozen=True, eq=False)
class GeneralQuittingGame:
    players: tuple[str, ...]
    continue_actions: tuple[tuple[str, ...], ...]
    payoff: np.ndarray

    def __post_init__(self):
        players = tuple(str(p) for p in self.players)
        cont = tuple(tuple(str(a) for a in acts) for acts in self.continue_actions)
        object.__setattr__(self, "players", players)
        object.__setattr__(self, "continue_actions", cont)
        if len(players) == 0:
            raise InvalidGame("a game needs at least one player")
        if len(set(players)) != len(players):
            raise InvalidGame("duplicate player identifiers")
        if len(cont) != len(players):
            raise InvalidGame("one continue-action list per player is required")
        for p, acts in zip(players, cont):
            if not acts:
                raise InvalidGame(f"player {p!r} has no continue action")
            if QUIT in acts:
                raise InvalidGame(f"player {p!r}: {QUIT!r} is reserved for the quit action")
            if len(set(acts)) != len(acts):
                raise InvalidGame(f"player {p!r} has duplicate continue actions")
        u = np.array(self.payoff, dtype=float)
        shape = tuple(len(a) + 1 for a in cont) + (len(players),)
        if u.shape != shape:
            raise InvalidGame(f"payoff array has shape {u.shape}, expected {shape}")
        if not np.all(np.isfinite(u)):
            raise InvalidGame("payoffs must be finite")
        if np.any(np.abs(u) > 1.0):
            bad = np.argwhere(np.abs(u) > 1.0)[0]
            raise InvalidGame(f"payoff {u[tuple(bad)]} at {self.label_profile(bad[:-1])} outside [-1, 1]")
        u.setflags(write=False)
        object.__setattr__(self, "payoff", u)

    @property
    def num_players(self) -> int:
        return len(self.players)

    @property
    def action_counts(self) -> tuple[int, ...]:
        return tuple(len(a) + 1 for a in self.continue_actions)

    def actions(self, i: int) -> tuple[str, ...]:
        return (QUIT,) + self.continue_actions[i]

    def label_profile(self, profile: Iterable[int]) -> dict[str, str]:
        return {p: self.actions(i)[int(a)] for i, (p, a) in enumerate(zip(self.players, profile))}

    def nonabsorbing_block(self) -> np.ndarray:
        return self.payoff[(slice(1, None),) * self.num_players]

    @property
    def absorbing_payoff(self) -> np.ndarray:
        """Payoff table with nonabsorbing entries set to zero."""
        t = np.array(self.payoff)
        t[(slice(1, None),) * self.num_players] = 0.0
        return t

    @property
    def is_recursive(self) -> bool:
        return bool(np.all(self.nonabsorbing_block() == 0.0))

    @property
    def is_positive(self) -> bool:
        return bool(np.all(self.payoff >= 0.0))

    def is_absorbing(self, profile: Sequence[int]) -> bool:
        return any(a == 0 for a in profile)

    def pure_profiles(self):
        return itertools.product(*(range(k) for k in self.action_counts))


@dataclass(frozen=True, eq=False)
class MixedProfile:
    """Per-player probability vectors over ``(Q, C^1, ..., C^k)``."""

    probs: tuple[np.ndarray, ...]

    def __post_init__(self):
        out = []
        for i, v in enumerate(self.probs):
            v = np.array(v, dtype=float).reshape(-1)
            s = v.sum() if v.size else np.nan
            # min() >= 0 rules out NaN and -inf; a finite sum rules out +inf
            if not (np.isfinite(s) and v.min() >= 0.0):
                raise InvalidProfile(f"player {i}: entries must be finite and nonnegative")
            if abs(s - 1.0) > PROB_TOL:
                raise InvalidProfile(f"player {i}: probabilities sum to {s!r}")
            if s != 1.0:
                v = v / s
            v.setflags(write=False)
            out.append(v)
        object.__setattr__(self, "probs", tuple(out))

    def __len__(self):
        return len(self.probs)

    def __getitem__(self, i):
        return self.probs[i]

    def __iter__(self):
        return iter(self.probs)

    @property
    def quit_probs(self) -> np.ndarray:
        return np.array([v[0] for v in self.probs])

    def replace(self, i: int, v) -> "MixedProfile":
        probs = list(self.probs)
        probs[i] = v
        return MixedProfile(tuple(probs))

    def check_game(self, g: GeneralQuittingGame):
        if tuple(len(v) for v in self.probs) != g.action_counts:
            raise InvalidProfile(
                f"profile sizes {[len(v) for v in self.probs]} do not match game actions {list(g.action_counts)}"
            )

    def to_list(self) -> list[list[float]]:
        return [v.tolist() for v in self.probs]


@dataclass(frozen=True, eq=False)
class SplitProfile:
    """A profile written as continue mixes ``alpha`` and quit probabilities ``z``."""

    alpha: tuple[np.ndarray, ...]
    z: np.ndarray

    def __post_init__(self):
        alpha = []
        for i, a in enumerate(self.alpha):
            a = np.array(a, dtype=float).reshape(-1)
            if a.size == 0 or np.any(~np.isfinite(a)) or np.any(a < 0.0):
                raise InvalidProfile(f"alpha[{i}] must be finite and nonnegative")
            s = a.sum()
            if abs(s - 1.0) > PROB_TOL:
                raise InvalidProfile(f"alpha[{i}] sums to {s!r}")
            if s != 1.0:
                a = a / s
            a.setflags(write=False)
            alpha.append(a)
        z = np.array(self.z, dtype=float).reshape(-1)
        if z.size != len(alpha):
            raise InvalidProfile("alpha and z must have one entry per player")
        if np.any(~np.isfinite(z)) or np.any(z < 0.0) or np.any(z > 1.0):
            raise InvalidProfile(f"quit probabilities must lie in [0, 1], got {z}")
        z.setflags(write=False)
        object.__setattr__(self, "alpha", tuple(alpha))
        object.__setattr__(self, "z", z)


def compose_profile(s: SplitProfile) -> MixedProfile:
    """x_i(Q) = z_i and x_i(C^k) = (1 - z_i) alpha_i^k."""
    probs = []
    for a, zi in zip(s.alpha, s.z):
        v = np.empty(a.size + 1)
        v[0] = zi
        v[1:] = (1.0 - zi) * a
        probs.append(v)
    return MixedProfile(tuple(probs))


def split_profile(x: MixedProfile) -> SplitProfile:
    """Inverse of :func:`compose_profile` for players with x_i(Q) < 1.

    A player who quits for sure gets the uniform continue mix.
    """
    alpha = []
    for v in x:
        c = v[1:]
        mass = c.sum()
        alpha.append(c / mass if mass > 0 else np.full(c.size, 1.0 / c.size))
    return SplitProfile(tuple(alpha), x.quit_probs)


def _as_profile(g: GeneralQuittingGame, x) -> MixedProfile:
    if isinstance(x, SplitProfile):
        x = compose_profile(x)
    elif not isinstance(x, MixedProfile):
        x = MixedProfile(tuple(x))
    x.check_game(g)
    return x


def absorption_probability_from_quits(z) -> float:
    """1 - prod(1 - z_i), evaluated without cancellation for tiny z."""
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        return float(-np.expm1(np.sum(np.log1p(-z))))


def absorption_probability(g: GeneralQuittingGame, x) -> float:
    x = _as_profile(g, x)
    return absorption_probability_from_quits(x.quit_probs)


def absorbing_mass(g: GeneralQuittingGame, x) -> np.ndarray:
    """Sum over absorbing pure profiles of prob(a) u(a), i.e. p(x) * ubar(x)."""
    x = _as_profile(g, x)
    return contract(g.absorbing_payoff, x.probs)


def expected_absorbing_payoff(g: GeneralQuittingGame, x) -> np.ndarray:
    x = _as_profile(g, x)
    p = absorption_probability_from_quits(x.quit_probs)
    if p <= 0.0:
        raise NonAbsorbingProfile("p(x) = 0: the expected absorbing payoff is undefined")
    return contract(g.absorbing_payoff, x.probs) / p


def nonabsorbing_stage_payoff(g: GeneralQuittingGame, x) -> np.ndarray:
    """Expected stage payoff given that nobody quits (zero vector if someone quits surely)."""
    x = _as_profile(g, x)
    cond = []
    for v in x:
        mass = v[1:].sum()
        if mass <= 0.0:
            return np.zeros(g.num_players)
        cond.append(v[1:] / mass)
    return contract(g.nonabsorbing_block(), cond)


def _resolve_q(g, x, q):
    if q is None:
        return nonabsorbing_stage_payoff(g, x)
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.size != g.num_players:
        raise InvalidProfile(f"nonabsorbing payoff has {q.size} entries for {g.num_players} players")
    return q


def discounted_stationary_value(g: GeneralQuittingGame, x, lam: float, q=None) -> np.ndarray:
    """λ-discounted value of a stationary profile.

    ``q`` is the stage payoff while play is not absorbed; ``None`` uses the
    game's own nonabsorbing payoffs under ``x``.  Solves
    ``v = p ubar + (1-p)(λ q + (1-λ) v)`` in closed form.
    """
    if not (0.0 < lam <= 1.0):
        raise ValueError(f"discount must lie in (0, 1], got {lam}")
    x = _as_profile(g, x)
    q = _resolve_q(g, x, q)
    p = absorption_probability_from_quits(x.quit_probs)
    mass = contract(g.absorbing_payoff, x.probs)
    return (mass + (1.0 - p) * lam * q) / (lam + p * (1.0 - lam))


def undiscounted_stationary_value(g: GeneralQuittingGame, x, q=None) -> np.ndarray:
    x = _as_profile(g, x)
    p = absorption_probability_from_quits(x.quit_probs)
    if p > 0.0:
        return contract(g.absorbing_payoff, x.probs) / p
    return _resolve_q(g, x, q)


# ---------------------------------------------------------------- JSON I/O


def game_from_dict(data: Mapping) -> GeneralQuittingGame:
    try:
        players = [str(p) for p in data["players"]]
        cont_map = data["continue_actions"]
        entries = data["payoffs"]
    except KeyError as exc:
        raise InvalidGame(f"missing top-level key {exc.args[0]!r}") from None
    recursive = bool(data.get("recursive", False))
    missing = [p for p in players if p not in cont_map]
    if missing:
        raise InvalidGame(f"no continue actions listed for player(s) {missing}")
    cont = [tuple(str(a) for a in cont_map[p]) for p in players]
    shape = tuple(len(c) + 1 for c in cont) + (len(players),)
    u = np.zeros(shape)
    seen = np.zeros(shape[:-1], dtype=bool)
    index = [{a: k for k, a in enumerate((QUIT,) + c)} for c in cont]
    for n, entry in enumerate(entries):
        prof = entry.get("profile")
        vals = entry.get("u")
        if not isinstance(prof, Mapping) or not isinstance(vals, Mapping):
            raise InvalidGame(f"payoff entry {n} needs 'profile' and 'u' objects")
        if set(prof) != set(players) or set(vals) != set(players):
            raise InvalidGame(f"payoff entry {n} ({dict(prof)}) must name every player exactly once")
        key = []
        for i, p in enumerate(players):
            a = str(prof[p])
            if a not in index[i]:
                raise InvalidGame(f"payoff entry {n}: unknown action {a!r} for player {p!r}")
            key.append(index[i][a])
        key = tuple(key)
        if seen[key]:
            raise InvalidGame(f"duplicate payoff entry for profile {dict(prof)}")
        seen[key] = True
        u[key] = [float(vals[p]) for p in players]
    for key in itertools.product(*(range(k) for k in shape[:-1])):
        if seen[key]:
            continue
        absorbing = any(a == 0 for a in key)
        if absorbing or not recursive:
            label = {p: ((QUIT,) + cont[i])[a] for i, (p, a) in enumerate(zip(players, key))}
            kind = "absorbing" if absorbing else "nonabsorbing (set \"recursive\": true to default to 0)"
            raise InvalidGame(f"missing {kind} payoff entry for profile {label}")
    if recursive and np.any(u[(slice(1, None),) * len(players)] != 0.0):
        raise InvalidGame("game is flagged recursive but has a nonzero nonabsorbing payoff")
    return GeneralQuittingGame(tuple(players), tuple(cont), u)


def game_to_dict(g: GeneralQuittingGame) -> dict:
    entries = []
    for prof in g.pure_profiles():
        entries.append(
            {
                "profile": g.label_profile(prof),
                "u": {p: float(g.payoff[prof + (i,)]) for i, p in enumerate(g.players)},
            }
        )
    return {
        "players": list(g.players),
        "continue_actions": {p: list(c) for p, c in zip(g.players, g.continue_actions)},
        "payoffs": entries,
    }


def load_game(path) -> GeneralQuittingGame:
    with open(path) as fh:
        return game_from_dict(json.load(fh))


def profile_from_dict(g: GeneralQuittingGame, data: Mapping) -> MixedProfile:
    """Read ``{player: {action: prob}}``; unlisted actions get probability 0."""
    probs = []
    for i, p in enumerate(g.players):
        if p not in data:
            raise InvalidProfile(f"profile has no entry for player {p!r}")
        row = data[p]
        acts = g.actions(i)
        unknown = set(row) - set(acts)
        if unknown:
            raise InvalidProfile(f"player {p!r}: unknown action(s) {sorted(unknown)}")
        probs.append(np.array([float(row.get(a, 0.0)) for a in acts]))
    return MixedProfile(tuple(probs))


def profile_to_dict(g: GeneralQuittingGame, x: MixedProfile) -> dict:
    return {p: {a: float(v) for a, v in zip(g.actions(i), x[i])} for i, p in enumerate(g.players)}


def game_from_arrays(payoff, players=None, continue_actions=None) -> GeneralQuittingGame:
    """Convenience constructor with default labels ``P1..``, ``C1..``."""
    u = np.asarray(payoff, dtype=float)
    n = u.ndim - 1
    if players is None:
        players = tuple(f"P{i + 1}" for i in range(n))
    if continue_actions is None:
        continue_actions = tuple(tuple(f"C{k + 1}" for k in range(u.shape[i] - 1)) for i in range(n))
    return GeneralQuittingGame(tuple(players), tuple(continue_actions), u)
