"""Instance generators: random games and the curated suites used by the acceptance tests.

The curated three-player suites have the first player choosing between
two continue actions and the others with one.  Each template fixes the
payoffs that decide which branch of the path procedure applies and fills
the remaining entries with seeded noise.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidGame
from .game import GeneralQuittingGame, game_from_arrays

MAX_PLAYERS = 4
MAX_CONTINUE = 4


def _zero_nonabsorbing(u):
    u[(slice(1, None),) * (u.ndim - 1)] = 0.0
    return u


def random_game(continue_counts, positive: bool = True, recursive: bool = True, seed: int = 0) -> GeneralQuittingGame:
    """Payoffs uniform on [0,1] (positive) or [-1,1]; nonabsorbing entries zeroed when recursive."""
    counts = [int(k) for k in continue_counts]
    if not (1 <= len(counts) <= MAX_PLAYERS) or any(not (1 <= k <= MAX_CONTINUE) for k in counts):
        raise InvalidGame(f"shape {counts} outside 1..{MAX_PLAYERS} players with 1..{MAX_CONTINUE} continue actions")
    rng = np.random.default_rng(seed)
    shape = tuple(k + 1 for k in counts) + (len(counts),)
    u = rng.uniform(0.0, 1.0, shape) if positive else rng.uniform(-1.0, 1.0, shape)
    if recursive:
        _zero_nonabsorbing(u)
    return game_from_arrays(u)


# ------------------------------------------------------------ section 3

_S3_BRANCHES = ("root", "end", "start", "opponents never quit")


def _s3_base(rng):
    u = rng.uniform(0.2, 0.8, (3, 2, 2, 3))
    # Player 2 quits whenever it can: Q is worth about 0.9, continuing into someone else's quit 0.1.
    u[:, 0, :, 1] = rng.uniform(0.85, 0.95, (3, 2))
    u[:, 1, :, 1] = rng.uniform(0.05, 0.15, (3, 2))
    # Player 1 never wants to quit.
    u[0, :, :, 0] = rng.uniform(0.0, 0.1, (2, 2))
    return u


def section3_instance(branch: str, seed: int) -> GeneralQuittingGame:
    """Positive recursive game of shape (2, 1, 1) continue actions aimed at one branch.

    ``"root"``: with player 2 quitting, player 3 prefers Q when player 1
    uses C^2 and C when it uses C^1, and player 1 prefers C^1 exactly
    when player 3 is likely to quit, so the continue-payoff gap changes
    sign along the path.  ``"end"`` and ``"start"``: C^1 (resp. C^2)
    dominates for player 1.  ``"opponents never quit"``: players 2 and 3
    strongly prefer to continue while player 1 gains by quitting.
    """
    rng = np.random.default_rng(seed)
    d = lambda: rng.uniform(-0.05, 0.05)  # noqa: E731
    if branch == "root":
        u = _s3_base(rng)
        u[1, 0, 0, 0], u[2, 0, 0, 0] = 0.8 + d(), 0.2 + d()
        u[1, 0, 1, 0], u[2, 0, 1, 0] = 0.2 + d(), 0.8 + d()
        u[1, 0, 0, 2], u[1, 0, 1, 2] = 0.2 + d(), 0.8 + d()
        u[2, 0, 0, 2], u[2, 0, 1, 2] = 0.8 + d(), 0.2 + d()
    elif branch in ("end", "start"):
        u = _s3_base(rng)
        hi, lo = (1, 2) if branch == "end" else (2, 1)
        u[hi, 0, :, 0] = rng.uniform(0.7, 0.9, 2)
        u[lo, 0, :, 0] = rng.uniform(0.1, 0.3, 2)
    elif branch == "opponents never quit":
        u = rng.uniform(0.0, 0.2, (3, 2, 2, 3))
        # Players 2 and 3: quitting pays little, continuing while someone quits pays a lot.
        for j in (1, 2):
            idx = [slice(None)] * 3
            idx[j] = 0
            u[tuple(idx) + (j,)] = rng.uniform(0.0, 0.1)
        u[0, 1, 1, 1:] = rng.uniform(0.85, 0.95, 2)
        u[0, 1, 1, 0] = 0.5 + d()
        u[0, 0, :, 0] = rng.uniform(0.2, 0.4, 2)
        u[0, :, 0, 0] = rng.uniform(0.2, 0.4, 2)
        u[1:, :, :, 0] = rng.uniform(0.0, 0.1, (2, 2, 2))
    else:
        raise ValueError(f"unknown branch {branch!r}; expected one of {_S3_BRANCHES}")
    _zero_nonabsorbing(u)
    return game_from_arrays(
        np.clip(u, 0.0, 1.0),
        players=["1", "2", "3"],
        continue_actions=[["C1", "C2"], ["C"], ["C"]],
    )


def section3_suite(seed: int = 0, per_branch: int = 5) -> list[tuple[str, GeneralQuittingGame]]:
    out = []
    for b, branch in enumerate(_S3_BRANCHES):
        for k in range(per_branch):
            out.append((branch, section3_instance(branch, seed * 1000 + 100 * b + k)))
    return out


# ------------------------------------------------------ joint fixed point


def joint_instance(seed: int) -> GeneralQuittingGame:
    """Positive recursive game with a strict absorbing equilibrium and several continue actions.

    Player 1 gains about 0.9 or more whenever it quits; every other player
    has one continue action worth about 0.8 against player 1 quitting,
    while its other continue actions and quitting are worth at most 0.5.
    """
    rng = np.random.default_rng(seed)
    nplayers = 2 + seed % 2
    counts = [int(rng.integers(2, 4)) for _ in range(nplayers)]
    shape = tuple(k + 1 for k in counts)
    u = rng.uniform(0.0, 1.0, shape + (nplayers,))
    u[(0,) + (slice(None),) * (nplayers - 1) + (0,)] = rng.uniform(0.9, 1.0, shape[1:])
    u[(slice(1, None),) + (slice(None),) * (nplayers - 1) + (0,)] *= 0.3
    for j in range(1, nplayers):
        best = int(rng.integers(1, counts[j] + 1))
        for a in range(shape[j]):
            idx = [0] + [slice(None)] * (nplayers - 1)
            idx[j] = a
            sub = tuple(idx) + (j,)
            if a == 0:
                u[sub] = 0.3 * rng.uniform(0.0, 1.0, u[sub].shape)
            elif a == best:
                u[sub] = rng.uniform(0.8, 0.9, u[sub].shape)
            else:
                u[sub] = 0.5 * rng.uniform(0.0, 1.0, u[sub].shape)
    _zero_nonabsorbing(u)
    return game_from_arrays(u)


def joint_suite(seed: int = 0, count: int = 10) -> list[GeneralQuittingGame]:
    return [joint_instance(seed * 1000 + k) for k in range(count)]
