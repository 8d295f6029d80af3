"""Logit (O_n) equilibria of finite strategic-form games.

A profile x is an O_n-equilibrium when every player's mixed action is the
softmax of n times its unilateral action values.  Payoff tensors have
shape ``(|A_1|, ..., |A_I|, I)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceFailure
from .game import MixedProfile

log = logging.getLogger(__name__)

FP_TOL = 1e-10


def softmax(v):
    e = np.exp(v - v.max())
    return e / e.sum()


def logsumexp(v):
    m = v.max()
    return m + np.log(np.exp(v - m).sum())


def action_values(u, x, i: int) -> np.ndarray:
    """u_i(a_i, x_{-i}) for every action a_i of player i."""
    t = u[..., i]
    for j in range(len(x) - 1, i, -1):
        t = t @ x[j]
    if i == 0:
        return t
    w = x[0]
    for j in range(1, i):
        w = np.outer(w, x[j]).ravel()
    return w @ t.reshape(w.size, -1)


def cross_values(u, x, i: int, j: int) -> np.ndarray:
    """Matrix of u_i(a_i, b_j, x_{-ij}) over (a_i, b_j)."""
    ops = [u[..., i], list(range(len(x)))]
    for k in range(len(x)):
        if k not in (i, j):
            ops += [x[k], [k]]
    return np.einsum(*ops, [i, j])


def logit_response(u, x, n: float) -> list[np.ndarray]:
    return [softmax(n * action_values(u, x, i)) for i in range(len(x))]


def fixed_point_residual(u, x, n: float) -> float:
    return max(float(np.max(np.abs(xi - ti))) for xi, ti in zip(x, logit_response(u, x, n)))


def regrets(u, x) -> np.ndarray:
    """Per-player best-response regret max_a u_i(a, x_{-i}) - u_i(x)."""
    out = []
    for i in range(len(x)):
        v = action_values(u, x, i)
        out.append(max(0.0, float(v.max() - x[i] @ v)))
    return np.array(out)


@dataclass
class LogitPoint:
    n: float
    x: MixedProfile
    residual: float
    game: np.ndarray = field(repr=False, default=None)


def _split(theta, sizes):
    return np.split(theta, np.cumsum(sizes)[:-1])


def _probs(theta, sizes):
    return [softmax(t) for t in _split(theta, sizes)]


def _residual_vec(u, theta, n, sizes):
    """Residual theta_i - log softmax(n v_i) and the x-space max residual.

    theta_i is not re-normalized, so the own-player block of the Jacobian
    is the identity and there is no gauge direction.
    """
    x = _probs(theta, sizes)
    parts = []
    xres = 0.0
    for i, t in enumerate(_split(theta, sizes)):
        v = n * action_values(u, x, i)
        lv = v - logsumexp(v)
        parts.append(t - lv)
        xres = max(xres, float(np.max(np.abs(x[i] - np.exp(lv)))))
    return np.concatenate(parts), xres


def _jacobian(u, theta, n, sizes):
    x = _probs(theta, sizes)
    m = len(theta)
    offs = np.concatenate([[0], np.cumsum(sizes)])
    jac = np.zeros((m, m))
    targets = [softmax(n * action_values(u, x, i)) for i in range(len(sizes))]
    for i in range(len(sizes)):
        si = slice(offs[i], offs[i + 1])
        jac[si, si] = np.eye(sizes[i])
        for j in range(len(sizes)):
            if j == i:
                continue
            sj = slice(offs[j], offs[j + 1])
            w = cross_values(u, x, i, j)  # (|A_i|, |A_j|)
            dv = n * (w - targets[i] @ w)  # d(n v_i - lse)/dx_j
            # dv @ (diag x_j - x_j x_j^T)
            jac[si, sj] = -(dv - (dv @ x[j])[:, None]) * x[j]
    return jac


def _newton(u, theta, n, sizes, tol, max_iter=100):
    theta = np.array(theta, dtype=float)
    r, xres = _residual_vec(u, theta, n, sizes)
    nr = float(np.linalg.norm(r))
    for _ in range(max_iter):
        if xres <= tol:
            return theta, True
        jac = _jacobian(u, theta, n, sizes)
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        t = 1.0
        while t > 1e-10:
            cand = theta + t * step
            rc, xc = _residual_vec(u, cand, n, sizes)
            nc = float(np.linalg.norm(rc))
            if np.isfinite(nc) and nc < (1.0 - 1e-4 * t) * nr:
                break
            t *= 0.5
        else:
            return theta, False
        theta, r, xres, nr = cand, rc, xc, nc
    return theta, xres <= tol


def _damped_iteration(u, x, n, iters=500):
    tau = 0.5
    res = fixed_point_residual(u, x, n)
    for _ in range(iters):
        tgt = logit_response(u, x, n)
        cand = [(1 - tau) * a + tau * b for a, b in zip(x, tgt)]
        rc = fixed_point_residual(u, cand, n)
        if rc < res:
            x, res = cand, rc
            tau = min(1.0, tau * 1.5)
        else:
            tau *= 0.5
            if tau < 1e-6:
                break
    return x


def logit_fixed_point(u, n: float, x0=None, tol: float = FP_TOL) -> LogitPoint:
    """Solve x_i = softmax(n u_i(., x_{-i})) for every player.

    Newton in log-probability coordinates from ``x0`` (uniform by default);
    if that stalls, damped fixed-point iteration followed by Newton again.
    The returned profile is one final application of the logit response,
    so every probability is exactly a softmax value.
    """
    u = np.asarray(u, dtype=float)
    sizes = u.shape[:-1]
    if n < 0:
        raise ValueError("n must be nonnegative")
    if x0 is None:
        x = [np.full(k, 1.0 / k) for k in sizes]
    else:
        x = [np.asarray(v, dtype=float) for v in x0]
    if n == 0:
        x = [np.full(k, 1.0 / k) for k in sizes]
        return LogitPoint(0.0, MixedProfile(tuple(x)), 0.0, u)
    with np.errstate(divide="ignore"):
        theta = np.concatenate([np.log(np.maximum(v, 1e-300)) for v in x])
    theta, ok = _newton(u, theta, n, sizes, tol)
    if not ok:
        x = _damped_iteration(u, _probs(theta, sizes), n)
        theta = np.concatenate([np.log(np.maximum(v, 1e-300)) for v in x])
        theta, ok = _newton(u, theta, n, sizes, tol)
    x = logit_response(u, _probs(theta, sizes), n)
    res = fixed_point_residual(u, x, n)
    if not (ok and res <= tol):
        raise ConvergenceFailure(
            f"logit fixed point at n={n} stopped with residual {res:.3e}", x=x, residual=res, n=n
        )
    return LogitPoint(float(n), MixedProfile(tuple(x)), res, u)


@dataclass
class LogitPath:
    points: list[LogitPoint]
    steps: list[float]
    failure: str | None = None

    def __len__(self):
        return len(self.points)

    def __getitem__(self, k):
        return self.points[k]

    def __iter__(self):
        return iter(self.points)

    @property
    def completed(self) -> bool:
        return self.failure is None


def _dH_dn(u, theta, n, sizes):
    x = _probs(theta, sizes)
    parts = []
    for i in range(len(sizes)):
        v = action_values(u, x, i)
        parts.append(-(v - softmax(n * v) @ v))
    return np.concatenate(parts)


def _tangent(u, theta, n, sizes, prev=None):
    a = np.hstack([_jacobian(u, theta, n, sizes), _dH_dn(u, theta, n, sizes)[:, None]])
    # Null vector of the m x (m+1) Jacobian.
    tau = np.linalg.svd(a)[2][-1]
    if prev is not None and tau @ prev < 0:
        tau = -tau
    elif prev is None and tau[-1] < 0:
        tau = -tau
    return tau


def arclength_to(u, start: LogitPoint, n_target: float, tol: float = FP_TOL,
                 h0: float = 0.05, h_min: float = 1e-9, max_steps: int = 20000) -> LogitPoint:
    """Follow the O_n branch through ``start`` by pseudo-arclength until n reaches ``n_target``.

    Unlike plain stepping in n this passes folds where the branch turns
    back before continuing to larger n.
    """
    u = np.asarray(u, dtype=float)
    sizes = u.shape[:-1]
    m = sum(sizes)
    w = np.concatenate([np.log(np.concatenate(start.x.probs)), [start.n]])
    tau = _tangent(u, w[:m], w[m], sizes)
    h = h0
    for _ in range(max_steps):
        if h < h_min:
            break
        wp = w + h * tau
        wc = wp.copy()
        ok = False
        for it in range(8):
            if wc[m] <= 0:
                break
            r, xres = _residual_vec(u, wc[:m], wc[m], sizes)
            g = np.concatenate([r, [tau @ (wc - wp)]])
            if xres <= 1e-11 and abs(g[-1]) < 1e-12:
                ok = True
                break
            jac = np.vstack([
                np.hstack([_jacobian(u, wc[:m], wc[m], sizes), _dH_dn(u, wc[:m], wc[m], sizes)[:, None]]),
                tau[None, :],
            ])
            try:
                wc = wc - np.linalg.solve(jac, g)
            except np.linalg.LinAlgError:
                break
        if not ok or np.linalg.norm(wc - wp) > 0.5 * max(h, 1e-3) + 0.1:
            h *= 0.5
            continue
        if wc[m] >= n_target:
            # Interpolate onto n_target and polish at fixed n.
            frac = (n_target - w[m]) / (wc[m] - w[m]) if wc[m] != w[m] else 1.0
            guess = w[:m] + frac * (wc[:m] - w[:m])
            theta, conv = _newton(u, guess, n_target, sizes, tol)
            if conv:
                x = logit_response(u, _probs(theta, sizes), n_target)
                return LogitPoint(float(n_target), MixedProfile(tuple(x)), fixed_point_residual(u, x, n_target), u)
            h *= 0.5
            continue
        tau = _tangent(u, wc[:m], wc[m], sizes, tau)
        w = wc
        if it <= 3:
            h = min(h * 1.5, 5.0)
    raise ConvergenceFailure(f"arclength continuation stalled at n={w[m]:.6g}", n=float(w[m]))


def _solve_between(u, prev: LogitPoint, n_target, tol, depth):
    try:
        return logit_fixed_point(u, n_target, prev.x.probs, tol)
    except ConvergenceFailure:
        if depth == 0:
            return arclength_to(u, prev, n_target, tol)
    mid = 0.5 * (prev.n + n_target)
    half = _solve_between(u, prev, mid, tol, depth - 1)
    return _solve_between(u, half, n_target, tol, depth - 1)


def logit_path(u, n_schedule, tol: float = FP_TOL, x0=None, max_halvings: int = 3) -> LogitPath:
    """Warm-started continuation of O_n-equilibria along an increasing schedule.

    A failed step is retried through intermediate values of n and then by
    pseudo-arclength continuation around a fold; if that also fails the
    prefix is returned with ``failure`` set.
    """
    sched = [float(v) for v in n_schedule]
    if not sched:
        raise ValueError("empty schedule")
    if sched[0] > 1.0:
        raise ValueError("schedule must start at n <= 1")
    if any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValueError("schedule must be strictly increasing")
    u = np.asarray(u, dtype=float)
    try:
        pts = [logit_fixed_point(u, sched[0], x0, tol)]
    except ConvergenceFailure as exc:
        return LogitPath([], [], f"n={sched[0]}: {exc}")
    dists = [0.0]
    for n in sched[1:]:
        try:
            p = _solve_between(u, pts[-1], n, tol, max_halvings)
        except ConvergenceFailure as exc:
            log.debug("logit path stopped at n=%g: %s", n, exc)
            return LogitPath(pts, dists, f"n={n}: {exc}")
        dists.append(max(float(np.max(np.abs(a - b))) for a, b in zip(p.x, pts[-1].x)))
        pts.append(p)
    return LogitPath(pts, dists)


def default_schedule(n_max: float, steps: int = 40, n_min: float = 0.5) -> np.ndarray:
    return np.geomspace(n_min, n_max, steps)


def nash_from_logit_limit(u, n_max: float = 200.0, tol: float | None = None, steps: int = 40,
                          n_cap: float = 1e5):
    """Approximate Nash equilibrium as the end of the logit path.

    Traces the path to ``n_max`` and returns the terminal profile with its
    per-player regret.  With ``tol`` set, n keeps doubling past ``n_max``
    until two successive points differ by at most ``tol`` in max norm (or
    n exceeds ``n_cap``); this is how the n -> infinity limit is extracted
    for games whose equilibria have small payoff gaps.  A failed solve at
    very large n ends the extraction at the last converged point.
    """
    u = np.asarray(u, dtype=float)
    path = logit_path(u, default_schedule(n_max, steps), FP_TOL)
    if not path.completed:
        raise ConvergenceFailure(f"logit path did not reach n={n_max}: {path.failure}", path=path)
    pt = path[-1]
    if tol is not None:
        while 2.0 * pt.n <= n_cap:
            try:
                nxt = _solve_between(u, pt, 2.0 * pt.n, FP_TOL, 3)
            except ConvergenceFailure as exc:
                log.debug("limit extraction stopped at n=%g: %s", pt.n, exc)
                break
            change = max(float(np.max(np.abs(a - b))) for a, b in zip(nxt.x, pt.x))
            pt = nxt
            if change <= tol:
                break
    return pt.x, regrets(u, pt.x.probs)
