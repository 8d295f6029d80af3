"""Support-enumeration Nash oracle for desk-scale strategic-form games.

Two-player games are solved exactly: for each pair of equal-size
supports the indifference equations form a square linear system.  With
three players the indifference equations are multilinear; each support
triple is solved by root finding from several deterministic starts and
every candidate is certified by its regret.
"""

from __future__ import annotations

import itertools
import logging

import numpy as np
from scipy.optimize import root

from ..errors import DegenerateSupport
from ..game import MixedProfile
from ..logit import action_values, regrets

log = logging.getLogger(__name__)

NASH_TOL = 1e-9
_SUPPORT_TOL = 1e-12


def _subsets(k: int):
    for r in range(1, k + 1):
        yield from itertools.combinations(range(k), r)


def _indifference_mix(a: np.ndarray) -> tuple[np.ndarray, float]:
    """Mix y over columns with a @ y constant and sum(y) = 1; a is square."""
    m = a.shape[0]
    mat = np.zeros((m + 1, m + 1))
    mat[:m, :m] = a
    mat[:m, m] = -1.0
    mat[m, :m] = 1.0
    rhs = np.zeros(m + 1)
    rhs[m] = 1.0
    if np.linalg.cond(mat) > 1e12:
        raise DegenerateSupport("singular indifference system")
    sol = np.linalg.solve(mat, rhs)
    return sol[:m], sol[m]


def _is_new(found, x, tol=1e-7):
    return all(max(np.max(np.abs(a - b)) for a, b in zip(x, y)) > tol for y in found)


def _finish(u, cand, found):
    cand = [np.clip(v, 0.0, None) for v in cand]
    cand = [v / v.sum() for v in cand]
    if np.max(regrets(u, cand)) <= NASH_TOL and _is_new(found, cand):
        found.append(cand)


def _two_player(u, notes):
    k1, k2 = u.shape[:2]
    found: list = []
    for s1 in _subsets(k1):
        for s2 in _subsets(k2):
            if len(s1) != len(s2):
                continue
            try:
                # Player 2's mix makes player 1 indifferent on s1, and vice versa.
                y, _ = _indifference_mix(u[np.ix_(s1, s2)][..., 0])
                x, _ = _indifference_mix(u[np.ix_(s1, s2)][..., 1].T)
            except DegenerateSupport as exc:
                notes.append(f"supports {s1}, {s2}: {exc}")
                continue
            if np.min(x) < -_SUPPORT_TOL or np.min(y) < -_SUPPORT_TOL:
                continue
            xf = np.zeros(k1)
            yf = np.zeros(k2)
            xf[list(s1)] = x
            yf[list(s2)] = y
            _finish(u, [xf, yf], found)
    return found


def _n_player(u, notes, starts):
    sizes = u.shape[:-1]
    nplayers = len(sizes)
    found: list = []
    rng = np.random.default_rng(0)
    for supports in itertools.product(*(list(_subsets(k)) for k in sizes)):
        if all(len(s) == 1 for s in supports):
            _finish(u, [np.eye(k)[s[0]] for k, s in zip(sizes, supports)], found)
            continue
        dims = [len(s) for s in supports]

        def unpack(w):
            xs, pos = [], 0
            for k, s, d in zip(sizes, supports, dims):
                v = np.zeros(k)
                v[list(s)] = w[pos:pos + d]
                xs.append(v)
                pos += d
            return xs, w[pos:]

        def eqs(w):
            xs, vals = unpack(w)
            out = []
            for i, s in enumerate(supports):
                av = action_values(u, xs, i)
                out.extend(av[list(s)] - vals[i])
                out.append(xs[i].sum() - 1.0)
            return np.array(out)

        # Square system: sum(dims) + I unknowns (mixes, values) and equations.
        seeds = [np.concatenate([np.full(d, 1.0 / d) for d in dims])]
        seeds += [np.concatenate([rng.dirichlet(np.ones(d)) for d in dims]) for _ in range(starts - 1)]
        hit = False
        for w0 in seeds:
            xs0, _ = unpack(np.concatenate([w0, np.zeros(nplayers)]))
            v0 = [action_values(u, xs0, i)[list(s)].mean() for i, s in enumerate(supports)]
            sol = root(eqs, np.concatenate([w0, v0]), method="hybr", options={"xtol": 1e-14})
            if not sol.success or np.max(np.abs(eqs(sol.x))) > 1e-11:
                continue
            xs, _ = unpack(sol.x)
            if any(np.min(v[list(s)]) < -_SUPPORT_TOL for v, s in zip(xs, supports)):
                continue
            hit = True
            _finish(u, xs, found)
        if not hit:
            log.debug("supports %s: no nonnegative indifference solution", supports)
    return found


def brute_force_nash(u, notes: list | None = None, starts: int = 4) -> list[MixedProfile]:
    """All equilibria found by support enumeration, each with regret <= 1e-9.

    ``u`` is the payoff tensor of shape (|A_1|, ..., |A_I|, I).  Supports
    whose indifference system is singular are skipped and described in
    ``notes`` when a list is supplied.  For two players the enumeration is
    exhaustive on nondegenerate games; for three players it is as complete
    as the multi-start root finder.
    """
    u = np.asarray(u, dtype=float)
    nplayers = u.ndim - 1
    if nplayers != u.shape[-1]:
        raise ValueError("payoff tensor must have shape (|A_1|, ..., |A_I|, I)")
    if nplayers > 3 or max(u.shape[:-1]) > 3:
        raise ValueError("brute_force_nash is limited to 3 players with 3 actions each")
    notes = [] if notes is None else notes
    if nplayers == 1:
        best = np.flatnonzero(u[:, 0] >= u[:, 0].max() - NASH_TOL)
        found = [[np.eye(u.shape[0])[a]] for a in best]
    elif nplayers == 2:
        found = _two_player(u, notes)
    else:
        found = _n_player(u, notes, starts)
    return [MixedProfile(tuple(x)) for x in found]
