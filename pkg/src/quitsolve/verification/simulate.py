"""Monte Carlo play of the game extended by uniform public signals.

Every stage draws ``1 + 2I`` uniforms from the run's own substream: the
public signal, one quit draw per player and one continue-action draw per
player.  A player quits when its quit draw falls below its quit
probability; otherwise the continue-action draw picks from the
conditional continue mix.  Runs use ``default_rng([seed, run])`` so any
subset of runs, in any order or process, reproduces the serial result.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..auxiliary import project_history
from ..game import GeneralQuittingGame, MixedProfile, contract


class StationaryStrategy:
    uses_history = False

    def __init__(self, probs):
        self.probs = np.asarray(probs, dtype=float)

    def __call__(self, history) -> np.ndarray:
        return self.probs

    def to_dict(self):
        return {"type": "stationary", "probs": self.probs.tolist()}


class SignalThresholdStrategy:
    """Mixed action chosen by the interval containing the current signal.

    ``rules`` is an ordered list of ``(lo, hi, probs)``; the first rule with
    ``lo <= y < hi`` applies (``hi = 1`` also admits ``y = 1``).
    """

    uses_history = True

    def __init__(self, rules, default=None):
        self.rules = [(float(lo), float(hi), np.asarray(p, dtype=float)) for lo, hi, p in rules]
        self.default = None if default is None else np.asarray(default, dtype=float)

    def __call__(self, history) -> np.ndarray:
        y = float(history[-1])
        for lo, hi, p in self.rules:
            if lo <= y < hi or (hi >= 1.0 and y == 1.0):
                return p
        if self.default is None:
            raise ValueError(f"no rule covers signal {y}")
        return self.default

    def to_dict(self):
        out = {"type": "threshold", "rules": [[lo, hi, p.tolist()] for lo, hi, p in self.rules]}
        if self.default is not None:
            out["default"] = self.default.tolist()
        return out


class HistoryStrategy:
    """Wraps ``fn(history) -> probs`` for arbitrary history dependence."""

    uses_history = True

    def __init__(self, fn):
        self.fn = fn

    def __call__(self, history) -> np.ndarray:
        return np.asarray(self.fn(history), dtype=float)


class LiftedStrategy:
    """Base-game strategy induced by an auxiliary-game strategy and a continue mix.

    The auxiliary strategy sees the projected history and returns (Q, C)
    probabilities; continuing is spread over the continue actions by alpha.
    """

    def __init__(self, aux_strategy, alpha):
        self.aux = aux_strategy
        self.alpha = np.asarray(alpha, dtype=float)
        self.uses_history = getattr(aux_strategy, "uses_history", True)

    def __call__(self, history) -> np.ndarray:
        b = self.aux(project_history(history) if self.uses_history else history)
        out = np.empty(self.alpha.size + 1)
        out[0] = b[0]
        out[1:] = (1.0 - b[0]) * self.alpha
        return out

    def continue_mix(self, history) -> np.ndarray:
        return self.alpha


def stationary_strategies(x: MixedProfile) -> list[StationaryStrategy]:
    return [StationaryStrategy(v) for v in x]


@dataclass
class SimulationEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    runs: int
    horizon: int
    seed: int
    absorbed_fraction: float
    per_run: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "stderr": self.stderr.tolist(),
            "runs": self.runs,
            "horizon": self.horizon,
            "seed": self.seed,
            "absorbed_fraction": self.absorbed_fraction,
        }


def horizon_for(p: float, miss: float = 1e-6) -> int:
    """Smallest T with (1 - p)^T <= miss."""
    if not (0.0 < p <= 1.0):
        raise ValueError("absorption probability must lie in (0, 1]")
    if p == 1.0:
        return 1
    return max(1, math.ceil(math.log(miss) / math.log1p(-p)))


def _one_run(g, strategies, q, horizon, rng, lam, conditional):
    nplayers = g.num_players
    track = any(s.uses_history for s in strategies)
    history: list = []
    total = np.zeros(nplayers)
    weight = 1.0  # (1 - lam)^(t-1) in discounted mode
    wsum = 0.0
    for t in range(horizon):
        draws = rng.random(1 + 2 * nplayers)
        if track:
            history.append(draws[0])
        probs = [s(history) for s in strategies]
        prof = []
        for i, pr in enumerate(probs):
            if draws[1 + i] < pr[0]:
                prof.append(0)
            else:
                cdf = np.cumsum(pr[1:])
                cdf /= cdf[-1]
                k = int(np.searchsorted(cdf, draws[1 + nplayers + i], side="right"))
                prof.append(1 + min(k, cdf.size - 1))
        prof = tuple(prof)
        if 0 in prof:
            if conditional:
                vecs = []
                for a, pr, s in zip(prof, probs, strategies):
                    v = np.zeros(pr.size)
                    if a == 0:
                        v[0] = 1.0
                    elif hasattr(s, "continue_mix"):
                        v[1:] = s.continue_mix(history)
                    else:
                        v[1:] = pr[1:] / pr[1:].sum()
                    vecs.append(v)
                absorbed = contract(g.payoff, vecs)
            else:
                absorbed = g.payoff[prof]
            if lam is None:
                return absorbed, True
            return total + weight * absorbed, True
        stage = g.payoff[prof] if q is None else q
        if lam is None:
            total = total + stage
        else:
            total = total + lam * weight * stage
            wsum += lam * weight
            weight *= 1.0 - lam
        if track:
            history.append(prof)
    if lam is None:
        return total / horizon, False
    # Renormalise the truncated weights so a constant stage payoff is exact.
    return total / wsum, False


def _run_chunk(args):
    g, strategies, q, horizon, seed, runs, lam, conditional = args
    out = np.empty((len(runs), g.num_players))
    hits = 0
    for k, r in enumerate(runs):
        val, absorbed = _one_run(g, strategies, q, horizon, np.random.default_rng([seed, r]), lam, conditional)
        out[k] = val
        hits += absorbed
    return out, hits


def _worker_count(workers):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("QUITSOLVE_THREADS")
    return max(1, int(env)) if env else 1


def monte_carlo_payoff(
    g: GeneralQuittingGame,
    strategies: Sequence,
    q=None,
    horizon: int = 1000,
    runs: int = 1000,
    seed: int = 0,
    discount: float | None = None,
    conditional: bool = False,
    workers: int | None = None,
) -> SimulationEstimate:
    """Estimate the payoff of a strategy profile by simulation.

    A run pays the absorbing payoff when absorbed by ``horizon`` and the
    time average of the nonabsorbing stage payoff otherwise (``q`` if
    given, else the realised stage payoffs).  With ``discount`` set the
    run payoff is the normalised discounted sum instead.
    ``conditional=True`` scores absorption by its expectation given which
    players quit, averaging over the continuing players' mixes; this is
    what makes a lifted profile and its auxiliary profile agree run by run.
    """
    if horizon < 1 or runs < 1:
        raise ValueError("horizon and runs must be at least 1")
    if len(strategies) != g.num_players:
        raise ValueError(f"{len(strategies)} strategies for {g.num_players} players")
    if discount is not None and not (0.0 < discount <= 1.0):
        raise ValueError("discount must lie in (0, 1]")
    qv = None if q is None else np.asarray(q, dtype=float).reshape(-1)
    nworkers = min(_worker_count(workers), runs)
    chunks = np.array_split(np.arange(runs), nworkers)
    jobs = [(g, list(strategies), qv, horizon, seed, c, discount, conditional) for c in chunks]
    if nworkers == 1:
        results = [_run_chunk(jobs[0])]
    else:
        with ProcessPoolExecutor(nworkers) as ex:
            results = list(ex.map(_run_chunk, jobs))
    per_run = np.concatenate([r[0] for r in results])
    hits = sum(r[1] for r in results)
    # Mean as first run plus mean deviation: identical runs give an exact mean.
    dev = per_run - per_run[0]
    mean = per_run[0] + dev.mean(axis=0)
    se = dev.std(axis=0, ddof=1) / math.sqrt(runs) if runs > 1 else np.zeros(g.num_players)
    return SimulationEstimate(mean, se, runs, horizon, seed, hits / runs, per_run)
