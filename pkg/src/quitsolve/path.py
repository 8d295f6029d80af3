"""Discounted equilibria of auxiliary games and the continuation procedures built on them.

The binary one-shot game at (alpha, z) has the absorbing entries of the
auxiliary game and, in its all-continue cell, the continuation payoff
``lam q + (1 - lam) v`` where ``v`` is the discounted value of the
composed profile.  A stationary discounted equilibrium is a z that is an
equilibrium (exact or logit at sharpness n) of the game it induces.

Internally each player's incentive is summarised by the quit advantage
``D_i(z)``: the one-shot payoff of Q minus that of C.  The logit
equilibrium is ``z = expit(n D(z))`` and is solved in logit coordinates.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import root
from scipy.special import expit

from .auxiliary import binary_absorbing_table, _alpha_tuple
from .errors import (
    AbsorptionCollapse,
    ConvergenceFailure,
    IndifferenceRootNotBracketed,
    InvalidGame,
    PathStalled,
)
from .game import (
    GeneralQuittingGame,
    MixedProfile,
    SplitProfile,
    absorption_probability_from_quits,
    compose_profile,
    discounted_stationary_value,
    undiscounted_stationary_value,
)
from .logit import action_values, softmax
from .verification.regret import Undiscounted, check_epsilon_equilibrium

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8
DEGENERATE_TOL = 1e-10
MIN_STEP = 1e-6


def _logit(z):
    z = np.clip(np.asarray(z, dtype=float), 1e-300, 1.0)
    with np.errstate(divide="ignore"):
        return np.log(z) - np.log1p(-np.minimum(z, 1.0 - 1e-16))


# ------------------------------------------------------------ one-shot game


@dataclass
class BinaryGameForm:
    """Binary strategic-form game; index 0 is Q and 1 is C for every player."""

    payoff: np.ndarray
    continuation: np.ndarray  # discounted value of the composed profile

    def quit_advantage(self, z) -> np.ndarray:
        return _quit_advantage(self.payoff.reshape(-1, self.payoff.shape[-1]), np.asarray(z, dtype=float))


def one_shot_payoffs(g: GeneralQuittingGame, alpha, q, z, lam: float) -> BinaryGameForm:
    if not (0.0 < lam <= 1.0):
        raise ValueError(f"discount must lie in (0, 1], got {lam}")
    alpha = _alpha_tuple(g, alpha)
    q = np.asarray(q, dtype=float).reshape(-1)
    table = binary_absorbing_table(g, alpha)
    v = discounted_stationary_value(g, compose_profile(SplitProfile(alpha, np.asarray(z, dtype=float))), lam, q)
    table[(1,) * g.num_players] = lam * q + (1.0 - lam) * v
    return BinaryGameForm(table, v)


def _bits(nplayers):
    return np.array(list(itertools.product((0, 1), repeat=nplayers)), dtype=float)


def _quit_advantage(table_flat, z):
    nplayers = z.size
    bits = _bits(nplayers)
    probs = np.where(bits == 0, z, 1.0 - z)
    sign = 1.0 - 2.0 * bits
    out = np.empty(nplayers)
    for i in range(nplayers):
        w = np.prod(np.delete(probs, i, axis=1), axis=1)
        out[i] = np.sum(w * table_flat[:, i] * sign[:, i])
    return out


class _Family:
    """Fast evaluation of the one-shot game from a flat binary absorbing table."""

    def __init__(self, absorbing_flat, q, lam):
        self.a = absorbing_flat
        self.q = q
        self.lam = lam
        self.nplayers = q.size
        self.bits = _bits(self.nplayers)
        self.sign = 1.0 - 2.0 * self.bits

    @classmethod
    def build(cls, g, alpha, q, lam):
        flat = binary_absorbing_table(g, alpha).reshape(-1, g.num_players)
        return cls(flat, np.asarray(q, dtype=float).reshape(-1), lam)

    def value(self, z):
        probs = np.where(self.bits == 0, z, 1.0 - z)
        mass = np.prod(probs[:-1], axis=1) @ self.a[:-1]
        if np.all((z >= 0.0) & (z <= 1.0)):
            p = absorption_probability_from_quits(z)
        else:
            # Root finders may probe outside the cube; use the polynomial extension there.
            p = 1.0 - np.prod(1.0 - z)
        return (mass + (1.0 - p) * self.lam * self.q) / (self.lam + p * (1.0 - self.lam))

    def advantage(self, z):
        table = self.a.copy()
        table[-1] = self.lam * self.q + (1.0 - self.lam) * self.value(z)
        probs = np.where(self.bits == 0, z, 1.0 - z)
        out = np.empty(self.nplayers)
        for i in range(self.nplayers):
            w = np.prod(np.delete(probs, i, axis=1), axis=1)
            out[i] = np.sum(w * table[:, i] * self.sign[:, i])
        return out

    def logit_residual(self, z, n):
        return float(np.max(np.abs(z - expit(n * self.advantage(z)))))

    def exact_residual(self, z):
        d = self.advantage(z)
        # One-shot regret of mixing z_i between Q (advantage d) and C.
        return float(np.max(z * np.maximum(-d, 0.0) + (1.0 - z) * np.maximum(d, 0.0)))


# ---------------------------------------------------------- small solvers


def _fd_jacobian(fun, w, h=1e-6):
    m = w.size
    f0 = fun(w)
    jac = np.empty((f0.size, m))
    for k in range(m):
        step = h * max(1.0, abs(w[k]))
        e = np.zeros(m)
        e[k] = step
        jac[:, k] = (fun(w + e) - fun(w - e)) / (2.0 * step)
    return jac


def _newton(fun, w, tol, max_iter=50):
    """Damped Newton with central-difference Jacobian; returns (w, converged)."""
    f = fun(w)
    norm = np.max(np.abs(f))
    for _ in range(max_iter):
        if norm <= tol:
            return w, True
        if not np.all(np.isfinite(f)):
            return w, False
        try:
            step = np.linalg.solve(_fd_jacobian(fun, w), -f)
        except np.linalg.LinAlgError:
            return w, False
        t = 1.0
        while t > 1e-8:
            cand = w + t * step
            fc = fun(cand)
            nc = np.max(np.abs(fc))
            if np.isfinite(nc) and nc < norm:
                break
            t *= 0.5
        else:
            return w, False
        w, f, norm = cand, fc, nc
    return w, norm <= tol


# ------------------------------------------------- discounted equilibrium


@dataclass
class PathPoint:
    alpha: tuple
    z: np.ndarray
    lam: float
    n: float | None
    value: np.ndarray
    residual: float
    p: float
    s: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def profile(self) -> MixedProfile:
        return compose_profile(SplitProfile(self.alpha, self.z))

    def to_dict(self) -> dict:
        out = {
            "alpha": [a.tolist() for a in self.alpha],
            "z": self.z.tolist(),
            "lambda": self.lam,
            "n": self.n,
            "value": self.value.tolist(),
            "residual": self.residual,
            "p": self.p,
        }
        if self.s is not None:
            out["s"] = self.s
        out.update({k: v for k, v in self.diagnostics.items() if isinstance(v, (int, float, str, bool, list))})
        return out


def _solve_logit_z(fam: _Family, n: float, z0, tol=1e-12):
    """z = expit(n D(z)): Newton in logit coordinates, damped iteration as fallback."""
    if n == 0:
        return np.full(fam.nplayers, 0.5)

    def fun(theta):
        return theta - n * fam.advantage(expit(theta))

    theta0 = _logit(np.clip(z0, 1e-12, 1.0 - 1e-12))
    theta, ok = _newton(fun, theta0, tol)
    if not ok:
        z = np.full(fam.nplayers, 0.5)
        tau = 0.5
        res = fam.logit_residual(z, n)
        for _ in range(2000):
            cand = (1.0 - tau) * z + tau * expit(n * fam.advantage(z))
            rc = fam.logit_residual(cand, n)
            if rc < res:
                z, res = cand, rc
                tau = min(1.0, 1.5 * tau)
            else:
                tau *= 0.5
                if tau < 1e-8:
                    break
        theta, ok = _newton(fun, _logit(np.clip(z, 1e-300, 1.0 - 1e-16)), tol)
    z = expit(n * fam.advantage(expit(theta)))
    res = fam.logit_residual(z, n)
    if not ok and res > RESIDUAL_TOL:
        raise ConvergenceFailure(f"logit equilibrium of the one-shot game failed (residual {res:.3e})", z=z, residual=res)
    return z


def _solve_exact_z(fam: _Family, z0, tol=1e-10):
    """Enumerate quit statuses (0, 1 or interior) and solve indifference for the interior players."""
    nplayers = fam.nplayers
    found = []
    for status in itertools.product((0, 1, 2), repeat=nplayers):
        inner = [i for i, st in enumerate(status) if st == 2]
        base = np.array([0.0 if st == 0 else 1.0 if st == 1 else 0.5 for st in status])
        cands = []
        if not inner:
            cands.append(base)
        else:
            starts = [np.clip(np.asarray(z0, dtype=float)[inner], 0.05, 0.95), np.full(len(inner), 0.5)]
            starts += [np.full(len(inner), v) for v in (0.1, 0.9)]
            for st in starts:

                def fun(w):
                    z = base.copy()
                    z[inner] = w
                    return fam.advantage(z)[inner]

                sol = root(fun, st, method="hybr", options={"xtol": 1e-14})
                if sol.success and np.all(sol.x >= -1e-12) and np.all(sol.x <= 1 + 1e-12):
                    z = base.copy()
                    z[inner] = np.clip(sol.x, 0.0, 1.0)
                    cands.append(z)
        for z in cands:
            if fam.exact_residual(z) <= tol:
                found.append(z)
    if not found:
        raise ConvergenceFailure("no exact equilibrium of the one-shot game found")
    z0 = np.asarray(z0, dtype=float)
    return min(found, key=lambda z: float(np.max(np.abs(z - z0))))


def _make_point(fam, alpha, z, lam, n, s=None, **diag):
    res = fam.logit_residual(z, n) if n is not None else fam.exact_residual(z)
    return PathPoint(
        tuple(np.array(a) for a in alpha),
        np.array(z),
        lam,
        n,
        fam.value(z),
        res,
        absorption_probability_from_quits(z),
        s,
        dict(diag),
    )


def discounted_stationary_equilibrium(g: GeneralQuittingGame, alpha, q, lam: float, n: float | None = None, z0=None) -> PathPoint:
    """A stationary lam-discounted equilibrium z of the auxiliary game at alpha.

    With ``n`` set, z is a logit equilibrium at sharpness n of the one-shot
    game it induces; otherwise an exact one, chosen closest to ``z0`` among
    those found.  Value iteration on the continuation payoff is used as a
    warm start before the fixed point is solved directly.
    """
    if not (0.0 < lam <= 1.0):
        raise ValueError(f"discount must lie in (0, 1], got {lam}")
    alpha = _alpha_tuple(g, alpha)
    q = np.asarray(q, dtype=float).reshape(-1)
    fam = _Family.build(g, alpha, q, lam)
    z = np.full(g.num_players, 0.5) if z0 is None else np.asarray(z0, dtype=float)
    if n is None:
        z = _solve_exact_z(fam, z)
        return _make_point(fam, alpha, z, lam, None, mode="exact")
    if n < 0:
        raise ValueError("n must be nonnegative")
    if z0 is None and n > 0:
        # Value iteration: freeze the continuation value, take the logit response.
        for _ in range(20):
            z = expit(n * fam.advantage(z))
    z = _solve_logit_z(fam, n, z)
    return _make_point(fam, alpha, z, lam, float(n), mode="logit")


# ---------------------------------------------------------- alpha path


@dataclass
class EquilibriumPath:
    points: list[PathPoint]
    player: int
    alpha_start: tuple
    alpha_end: tuple
    start_reached: bool
    end_reached: bool
    failure: str | None = None

    @property
    def parameterization(self) -> str:
        return f"alpha[{self.player}] = (1 - s) * start + s * end, adaptive in arclength"

    @property
    def max_gap(self) -> float:
        if len(self.points) < 2:
            return 0.0
        return max(float(np.max(np.abs(b.z - a.z))) for a, b in zip(self.points, self.points[1:]))

    def __len__(self):
        return len(self.points)

    def __getitem__(self, k):
        return self.points[k]

    def __iter__(self):
        return iter(self.points)


class _Segment:
    """One-shot family along alpha_player = (1 - s) a0 + s a1; the table is affine in s."""

    def __init__(self, g, a_start, a_end, q, lam):
        self.t0 = binary_absorbing_table(g, a_start).reshape(-1, g.num_players)
        self.t1 = binary_absorbing_table(g, a_end).reshape(-1, g.num_players)
        self.q = np.asarray(q, dtype=float).reshape(-1)
        self.lam = lam
        self.a_start = a_start
        self.a_end = a_end

    def family(self, s):
        return _Family((1.0 - s) * self.t0 + s * self.t1, self.q, self.lam)

    def alpha(self, s):
        return tuple((1.0 - s) * a + s * b for a, b in zip(self.a_start, self.a_end))


def _varying_player(a_start, a_end):
    diff = [i for i, (a, b) in enumerate(zip(a_start, a_end)) if not np.array_equal(a, b)]
    if len(diff) > 1:
        raise ValueError("only one player's continue mix may vary along the path")
    return diff[0] if diff else 0


def trace_alpha_path(
    g: GeneralQuittingGame,
    q,
    lam: float,
    n: float,
    alpha_start,
    alpha_end,
    h0: float = 0.02,
    h_max: float = 0.25,
    min_step: float = MIN_STEP,
    max_steps: int = 20000,
    max_jump: float = 0.05,
) -> EquilibriumPath:
    """Follow logit discounted equilibria as one player's continue mix moves from start to end.

    Pseudo-arclength continuation in (logit z, s) with a secant predictor
    and a Newton corrector.  The step halves when the corrector fails or a
    point moves more than ``max_jump`` in z, and doubles after three
    successes.  Passing a fold in s is allowed.  If the step falls below
    ``min_step`` the prefix is returned with ``failure`` set.
    """
    a0 = _alpha_tuple(g, alpha_start)
    a1 = _alpha_tuple(g, alpha_end)
    player = _varying_player(a0, a1)
    seg = _Segment(g, a0, a1, q, lam)
    nplayers = g.num_players
    n = float(n)

    def h_res(w):
        theta, s = w[:nplayers], w[nplayers]
        return theta - n * seg.family(s).advantage(expit(theta))

    def point_at(theta, s):
        fam = seg.family(s)
        z = expit(n * fam.advantage(expit(theta)))
        return _make_point(fam, seg.alpha(s), z, lam, n, s)

    def solve_fixed_s(s, theta0):
        theta, ok = _newton(lambda t: h_res(np.append(t, s)), theta0, 1e-12)
        return theta, ok

    fam0 = seg.family(0.0)
    z = np.full(nplayers, 0.5)
    for _ in range(20):
        z = expit(n * fam0.advantage(z))
    z = _solve_logit_z(fam0, n, z)
    theta = _logit(np.clip(z, 1e-300, 1.0 - 1e-16))
    theta, _ = solve_fixed_s(0.0, theta)
    w = np.append(theta, 0.0)
    points = [point_at(theta, 0.0)]

    # Initial tangent: d theta / ds from the fixed-s Jacobian.
    jac = _fd_jacobian(h_res, w)
    try:
        dtheta = np.linalg.solve(jac[:, :nplayers], -jac[:, nplayers])
    except np.linalg.LinAlgError:
        dtheta = np.zeros(nplayers)
    tau = np.append(dtheta, 1.0)
    tau /= np.linalg.norm(tau)

    h = h0
    wins = 0
    failure = None
    end_reached = False
    for _ in range(max_steps):
        if h < min_step:
            failure = f"step fell below {min_step:g} at s={w[-1]:.6g}"
            break
        wp = w + h * tau

        def aug(v, wp=wp, tau=tau):
            return np.append(h_res(v), tau @ (v - wp))

        wc, ok = _newton(aug, wp, 1e-11, max_iter=8)
        jump = np.max(np.abs(expit(wc[:nplayers]) - expit(w[:nplayers]))) if ok else np.inf
        if not ok or jump > max_jump or np.linalg.norm(wc - wp) > 0.5 * h + 1e-3:
            h *= 0.5
            wins = 0
            continue
        if wc[-1] >= 1.0:
            frac = (1.0 - w[-1]) / (wc[-1] - w[-1])
            theta, ok = solve_fixed_s(1.0, w[:nplayers] + frac * (wc[:nplayers] - w[:nplayers]))
            if not ok:
                h *= 0.5
                wins = 0
                continue
            points.append(point_at(theta, 1.0))
            end_reached = True
            break
        if wc[-1] < 0.0:
            failure = "path turned back to s = 0"
            break
        points.append(point_at(wc[:nplayers], wc[-1]))
        # Secant predictor for the next step.
        sec = wc - w
        tau = sec / np.linalg.norm(sec)
        w = wc
        wins += 1
        if wins >= 3:
            h = min(2.0 * h, h_max)
            wins = 0
    else:
        failure = f"no end point after {max_steps} steps"
    return EquilibriumPath(points, player, a0, a1, True, end_reached, failure)


def absorption_floor(path) -> tuple[float, int]:
    """Minimum per-stage absorption probability along the path and its index."""
    pts = list(path)
    if not pts:
        raise ValueError("empty path")
    ps = [pt.p for pt in pts]
    k = int(np.argmin(ps))
    return ps[k], k


# ------------------------------------------------------------ section 3


@dataclass
class Section3Report:
    branch: str
    path: EquilibriumPath
    point: PathPoint
    s0: float | None
    gap: float | None
    passed: bool
    regret: object
    stages: list = field(default_factory=list)

    def to_dict(self, g=None) -> dict:
        return {
            "branch": self.branch,
            "s0": self.s0,
            "indifference_gap": self.gap,
            "passed": self.passed,
            "path_points": len(self.path),
            "absorption_floor": absorption_floor(self.path)[0],
            "point": self.point.to_dict(),
            "check": self.regret.to_dict(g),
            "stages": self.stages,
        }


def _continue_gap(g: GeneralQuittingGame, pt: PathPoint) -> float:
    """u_1(C^1, x_{-1}) - u_1(C^2, x_{-1}) with undiscounted values of pure continue deviations."""
    x = pt.profile()
    vals = []
    for k in (1, 2):
        e = np.zeros(3)
        e[k] = 1.0
        vals.append(undiscounted_stationary_value(g, x.replace(0, e), np.zeros(g.num_players))[0])
    return float(vals[0] - vals[1])


def _check_section3_shape(g: GeneralQuittingGame):
    counts = g.action_counts
    if counts[0] != 3 or any(k != 2 for k in counts[1:]):
        raise InvalidGame("the path procedure needs 2 continue actions for the first player and 1 for the others")
    if not (g.is_positive and g.is_recursive):
        raise InvalidGame("the path procedure needs a positive recursive game")


def _section3_once(g, q, lam, n, eps):
    nplayers = g.num_players
    a_start = (np.array([0.0, 1.0]),) + tuple(np.ones(1) for _ in range(nplayers - 1))
    a_end = (np.array([1.0, 0.0]),) + a_start[1:]
    path = trace_alpha_path(g, q, lam, n, a_start, a_end)
    if not path.end_reached:
        raise PathStalled(f"path tracing stopped: {path.failure}", path=path)

    seg = _Segment(g, path.alpha_start, path.alpha_end, q, lam)
    s0 = gap = None
    degenerate = [pt for pt in path if np.sum(pt.z[1:]) <= DEGENERATE_TOL]
    if degenerate:
        pt = degenerate[0]
        z = pt.z.copy()
        z[1:][z[1:] < DEGENERATE_TOL] = 0.0
        pt = PathPoint(pt.alpha, z, lam, n, pt.value, pt.residual, absorption_probability_from_quits(z), pt.s,
                       {"snapped": True})
        branch = "opponents never quit"
    else:
        f_end = _continue_gap(g, path[-1])
        f_start = _continue_gap(g, path[0])
        if f_end >= 0.0:
            branch, pt = "end", path[-1]
        elif f_start <= 0.0:
            branch, pt = "start", path[0]
        else:
            branch = "root"
            pt, s0, gap = _indifference_root(g, seg, path, n)
    passed, rep = check_epsilon_equilibrium(g, pt.profile(), Undiscounted(np.zeros(nplayers)), eps)
    return Section3Report(branch, path, pt, s0, gap, passed, rep)


def _indifference_root(g, seg, path, n, tol=1e-10, max_iter=200):
    gaps = [_continue_gap(g, pt) for pt in path]
    k = next((k for k in range(len(gaps) - 1) if gaps[k] > 0.0 >= gaps[k + 1]), None)
    if k is None:
        raise IndifferenceRootNotBracketed("no sign change of the continue-payoff gap along the path",
                                           signs=[int(np.sign(v)) for v in gaps])
    if gaps[k + 1] == 0.0:
        return path[k + 1], path[k + 1].s, 0.0
    lo, hi = path[k], path[k + 1]
    th_lo, th_hi = _logit(np.clip(lo.z, 1e-300, 1 - 1e-16)), _logit(np.clip(hi.z, 1e-300, 1 - 1e-16))
    a, b = 0.0, 1.0
    best = None
    for _ in range(max_iter):
        t = 0.5 * (a + b)
        s = lo.s + t * (hi.s - lo.s)
        fam = seg.family(s)
        theta, ok = _newton(lambda th: th - n * fam.advantage(expit(th)), th_lo + t * (th_hi - th_lo), 1e-12)
        if not ok:
            raise ConvergenceFailure(f"re-solve failed at s={s:.6g} during bisection")
        z = expit(n * fam.advantage(expit(theta)))
        pt = _make_point(fam, seg.alpha(s), z, seg.lam, n, s)
        f = _continue_gap(g, pt)
        best = (pt, s, f)
        if abs(f) <= tol or b - a < 1e-16:
            break
        if f > 0.0:
            a = t
        else:
            b = t
    pt, s, f = best
    return pt, s, abs(f)


def section3_solve(g: GeneralQuittingGame, q=None, lambdas=(1e-3,), ns=(100.0,), eps: float = 1e-2):
    """Equilibrium of a three-type positive recursive game by tracing over the first player's continue mix.

    For every (n, lam) pair (n outer, lam inner) the logit discounted
    equilibrium is traced from the first player continuing with C^2 (s=0)
    to continuing with C^1 (s=1).  A point where the opponents' quit
    probabilities vanish is returned as is; otherwise an endpoint where the
    played continue action is optimal, or else the point where the first
    player is indifferent between C^1 and C^2.  Returns the composed
    profile of the last pair and a report with the equilibrium check.
    """
    _check_section3_shape(g)
    q = np.zeros(g.num_players) if q is None else np.asarray(q, dtype=float).reshape(-1)
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
    ns = np.atleast_1d(np.asarray(ns, dtype=float))
    if np.any(np.diff(lambdas) >= 0) or np.any(np.diff(ns) <= 0):
        raise ValueError("lambda schedule must decrease and n schedule must increase")
    stages = []
    rep = None
    for n in ns:
        for lam in lambdas:
            rep = _section3_once(g, q, float(lam), float(n), eps)
            stages.append({"n": float(n), "lambda": float(lam), "branch": rep.branch,
                           "max_regret": rep.regret.max_regret})
    rep.stages = stages
    return rep.point.profile(), rep


# ------------------------------------------------------ joint fixed point


class _Joint:
    """Residual of the joint system in (log alpha, logit z) coordinates."""

    def __init__(self, g, q, lam, n):
        self.g = g
        self.q = np.asarray(q, dtype=float).reshape(-1)
        self.lam = lam
        self.n = n
        self.counts = [k - 1 for k in g.action_counts]

    def unpack(self, w):
        alpha, pos = [], 0
        for k in self.counts:
            alpha.append(softmax(w[pos:pos + k]))
            pos += k
        return tuple(alpha), expit(w[pos:])

    def pack(self, alpha, z):
        parts = [np.log(np.maximum(a, 1e-300)) for a in alpha]
        return np.concatenate(parts + [_logit(np.clip(z, 1e-300, 1 - 1e-16))])

    def alpha_target(self, alpha, z):
        x = compose_profile(SplitProfile(alpha, z))
        return tuple(softmax(self.n * action_values(self.g.payoff, x.probs, i)[1:]) for i in range(len(alpha)))

    def residual(self, w):
        alpha, z = self.unpack(w)
        pos = 0
        out = []
        tgt = self.alpha_target(alpha, z)
        for k, t in zip(self.counts, tgt):
            out.append(w[pos:pos + k] - np.log(t))
            pos += k
        fam = _Family(binary_absorbing_table(self.g, alpha).reshape(-1, self.g.num_players), self.q, self.lam)
        out.append(w[pos:] - self.n * fam.advantage(z))
        return np.concatenate(out)

    def residuals(self, alpha, z):
        tgt = self.alpha_target(alpha, z)
        ra = max(float(np.max(np.abs(a - t))) for a, t in zip(alpha, tgt))
        fam = _Family(binary_absorbing_table(self.g, alpha).reshape(-1, self.g.num_players), self.q, self.lam)
        return ra, fam.logit_residual(z, self.n), fam


def _joint_newton(jt, alpha, z, tol=1e-12):
    w, ok = _newton(jt.residual, jt.pack(alpha, z), tol)
    if not ok:
        # Alternate: continue mixes by logit response, then the z equilibrium.
        for _ in range(200):
            alpha = jt.alpha_target(alpha, z)
            fam = _Family(binary_absorbing_table(jt.g, alpha).reshape(-1, jt.g.num_players), jt.q, jt.lam)
            z = _solve_logit_z(fam, jt.n, z)
        w, ok = _newton(jt.residual, jt.pack(alpha, z), tol)
    return jt.unpack(w), ok


def joint_fixed_point(g: GeneralQuittingGame, q, lam: float, n: float, start=None, floor: float = 1e-3,
                      tol: float = RESIDUAL_TOL) -> PathPoint:
    """Joint solve of alpha = logit continue response and z = logit discounted equilibrium at alpha.

    ``start`` is an optional (alpha, z) pair; by default uniform mixes and
    z = 1/2.  If Newton from the start fails, n is approached by
    continuation from a small sharpness.  Raises AbsorptionCollapse when
    the result has sum(z) below ``floor``.
    """
    if not (0.0 < lam <= 1.0):
        raise ValueError(f"discount must lie in (0, 1], got {lam}")
    q = np.asarray(q, dtype=float).reshape(-1)
    jt = _Joint(g, q, lam, float(n))
    if start is None:
        alpha = tuple(np.full(k, 1.0 / k) for k in jt.counts)
        z = np.full(g.num_players, 0.5)
    else:
        alpha = _alpha_tuple(g, start[0])
        z = np.asarray(start[1], dtype=float)
    if n == 0:
        alpha = tuple(np.full(k, 1.0 / k) for k in jt.counts)
        z = np.full(g.num_players, 0.5)
    else:
        (a1, z1), ok = _joint_newton(jt, alpha, z)
        if not ok:
            sched = np.geomspace(min(1.0, n), n, 12)
            for nk in sched:
                jk = _Joint(g, q, lam, float(nk))
                (alpha, z), ok = _joint_newton(jk, alpha, z)
                if not ok:
                    break
            a1, z1 = alpha, z
        alpha, z = a1, z1
    ra, rz, fam = jt.residuals(alpha, z)
    if max(ra, rz) > tol:
        raise ConvergenceFailure(
            f"joint fixed point at lambda={lam}, n={n} has residuals alpha {ra:.3e}, z {rz:.3e}",
            alpha=alpha, z=z, alpha_residual=ra, z_residual=rz,
        )
    total = float(np.sum(z))
    if total < floor:
        raise AbsorptionCollapse(f"sum of quit probabilities {total:.3e} fell below the floor {floor:g}",
                                 alpha=alpha, z=z, sum_z=total)
    return _make_point(fam, alpha, z, lam, float(n), alpha_residual=ra, z_residual=rz, sum_z=total,
                       perturbation="not applicable")


@dataclass
class GridCell:
    n: float
    lam: float
    point: PathPoint | None
    error: str | None
    regret: float | None
    perturbation: str = "not applicable"

    def to_dict(self) -> dict:
        out = {"n": self.n, "lambda": self.lam, "error": self.error, "regret": self.regret,
               "perturbation": self.perturbation}
        if self.point is not None:
            out["point"] = self.point.to_dict()
        return out


@dataclass
class Cluster:
    members: list[tuple[float, float]]
    representative: PathPoint
    sum_z: float
    above_floor: bool
    regret: float

    def to_dict(self) -> dict:
        return {"members": [list(m) for m in self.members], "sum_z": self.sum_z, "above_floor": self.above_floor,
                "regret": self.regret, "representative": self.representative.to_dict()}


@dataclass
class LimitReport:
    cells: list[GridCell]
    clusters: list[Cluster]

    @property
    def final(self) -> GridCell:
        return self.cells[-1]

    def to_dict(self) -> dict:
        return {"cells": [c.to_dict() for c in self.cells], "clusters": [c.to_dict() for c in self.clusters]}


def limit_schedule(g: GeneralQuittingGame, q, lambdas, ns, start=None, floor: float = 1e-3,
                   threshold: float | None = None, cluster_tol: float = 1e-3) -> LimitReport:
    """Sweep the joint fixed point over n (outer, increasing) and lam (inner, decreasing).

    Each cell is warm-started from the previous one; the first cell of a
    row starts from the first cell of the previous row.  Failed cells are
    recorded and the sweep continues.  Converged points are clustered by
    the max-norm distance of their composed profiles; each cluster reports
    its absorption sum against ``threshold`` (default ``floor``) and the
    undiscounted regret of its most refined member.
    """
    lambdas = [float(v) for v in lambdas]
    ns = [float(v) for v in ns]
    if any(b >= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambda schedule must be decreasing")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n schedule must be increasing")
    threshold = floor if threshold is None else threshold
    q = np.asarray(q, dtype=float).reshape(-1)
    cells = []
    row_start = start
    for n in ns:
        warm = row_start
        for k, lam in enumerate(lambdas):
            try:
                pt = joint_fixed_point(g, q, lam, n, warm, floor)
            except ConvergenceFailure as exc:
                cells.append(GridCell(n, lam, None, str(exc), None))
                continue
            _, rep = check_epsilon_equilibrium(g, pt.profile(), Undiscounted(q), 0.0)
            cells.append(GridCell(n, lam, pt, None, rep.max_regret))
            warm = (pt.alpha, pt.z)
            if k == 0:
                row_start = warm
    clusters: list[Cluster] = []
    groups: list[list[GridCell]] = []
    for cell in cells:
        if cell.point is None:
            continue
        x = cell.point.profile()
        for grp in groups:
            y = grp[0].point.profile()
            if max(float(np.max(np.abs(a - b))) for a, b in zip(x, y)) <= cluster_tol:
                grp.append(cell)
                break
        else:
            groups.append([cell])
    for grp in groups:
        rep_cell = grp[-1]
        s = float(np.sum(rep_cell.point.z))
        clusters.append(Cluster([(c.n, c.lam) for c in grp], rep_cell.point, s, s >= threshold, rep_cell.regret))
    return LimitReport(cells, clusters)
