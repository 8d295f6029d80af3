"""Absorption diagnostics for discounted equilibria as the discount vanishes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceFailure
from ..path import PathPoint, _Family, discounted_stationary_equilibrium


@dataclass
class A2Report:
    lambdas: list[float]
    points: list[PathPoint | None]
    errors: list[str | None]
    p: list[float | None]
    eta: float
    verdict: str
    indifferent: bool

    def to_dict(self) -> dict:
        return {
            "lambda": self.lambdas,
            "p": self.p,
            "errors": self.errors,
            "eta": self.eta,
            "verdict": self.verdict,
            "non_unique": self.indifferent,
        }


def _all_indifferent(g, alpha, q, lam, samples=16, tol=1e-12) -> bool:
    fam = _Family.build(g, alpha, q, lam)
    rng = np.random.default_rng(0)
    return all(np.max(np.abs(fam.advantage(z))) <= tol for z in rng.uniform(0, 1, (samples, g.num_players)))


def a2_diagnostic(g, alpha, q, lambdas, n: float | None = None, eta: float = 0.05) -> A2Report:
    """Absorption probability of discounted equilibria along a decreasing discount schedule.

    Each solve is warm-started at the previous one.  The verdict is
    ``"A.2-consistent"`` when every solved p stays at or above ``eta``,
    ``"A.1-suggestive"`` when the last solved p is below ``eta`` and the
    sequence does not increase, and ``"inconclusive"`` otherwise.  When
    every player is indifferent between quitting and continuing at every
    z the equilibrium set is not a point and ``indifferent`` is set.
    """
    lambdas = [float(v) for v in lambdas]
    if any(b >= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambda schedule must be decreasing")
    q = np.asarray(q, dtype=float).reshape(-1)
    points, errors, ps = [], [], []
    z0 = None
    for lam in lambdas:
        try:
            pt = discounted_stationary_equilibrium(g, alpha, q, lam, n, z0)
        except ConvergenceFailure as exc:
            points.append(None)
            errors.append(str(exc))
            ps.append(None)
            continue
        points.append(pt)
        errors.append(None)
        ps.append(pt.p)
        z0 = pt.z
    solved = [p for p in ps if p is not None]
    if not solved:
        verdict = "inconclusive"
    elif min(solved) >= eta:
        verdict = "A.2-consistent"
    elif solved[-1] < eta and all(b <= a + 1e-12 for a, b in zip(solved, solved[1:])):
        verdict = "A.1-suggestive"
    else:
        verdict = "inconclusive"
    indiff = _all_indifferent(g, alpha, q, lambdas[-1])
    return A2Report(lambdas, points, errors, ps, eta, verdict, indiff)
