"""Kohlberg-Mertens structure maps.

``g_map(n, x) = x + softmax(n x)`` is a diffeomorphism of R^d; its
inverse ``h_n_inverse`` converges uniformly to the water-filling map
``h_limit`` as n grows.  The per-game maps ``phi`` and ``phi_n`` send a
(payoff, profile) pair to the (residual payoff, z) coordinates.

Array functions accept a single vector or a batch with the coordinate on
the last axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .errors import ConvergenceFailure

H_TOL = 1e-9


def g_map(n: float, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x + softmax(n * x, axis=-1)


def g_jacobian(n: float, x) -> np.ndarray:
    """Jacobian I + n (diag(s) - s s^T), s = softmax(n x)."""
    x = np.asarray(x, dtype=float)
    s = softmax(n * x, axis=-1)
    d = x.shape[-1]
    jac = n * (-s[..., :, None] * s[..., None, :])
    idx = np.arange(d)
    jac[..., idx, idx] += 1.0 + n * s
    return jac


def _newton_step(n, s, r):
    # Solve (D - n s s^T) dx = r with D = I + n diag(s) by Sherman-Morrison;
    # the denominator equals sum s_i / (1 + n s_i) > 0.
    dinv = 1.0 / (1.0 + n * s)
    dr = dinv * r
    ds = dinv * s
    denom = np.sum(s * dinv, axis=-1, keepdims=True)
    return dr + n * ds * np.sum(s * dr, axis=-1, keepdims=True) / denom


def h_n_inverse(n: float, y, x0=None, tol: float = H_TOL, max_iter: int = 200) -> np.ndarray:
    """Solve g_map(n, x) = y by damped Newton, warm-started at h_limit(y).

    The step is halved until the max-norm residual decreases; a row whose
    residual cannot be decreased any further is frozen.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    yb = np.atleast_2d(y)
    x = np.atleast_2d(h_limit(yb) if x0 is None else np.asarray(x0, dtype=float)).copy()
    err = np.max(np.abs(g_map(n, x) - yb), axis=-1)
    live = err > tol
    for _ in range(max_iter):
        if not np.any(live):
            break
        rows = np.flatnonzero(live)
        xa = x[rows]
        step = _newton_step(n, softmax(n * xa, axis=-1), g_map(n, xa) - yb[rows])
        t = 1.0
        pending = np.ones(len(rows), dtype=bool)
        for _ in range(60):
            cand = xa[pending] - t * step[pending]
            ec = np.max(np.abs(g_map(n, cand) - yb[rows[pending]]), axis=-1)
            ok = ec < err[rows[pending]]
            hit = rows[pending][ok]
            x[hit], err[hit] = cand[ok], ec[ok]
            pending[np.flatnonzero(pending)[ok]] = False
            if not np.any(pending):
                break
            t *= 0.5
        live[rows[pending]] = False
        live &= err > tol
    if np.any(err > tol):
        worst = int(np.argmax(err))
        raise ConvergenceFailure(
            f"h_n_inverse: residual {err[worst]:.3e} > {tol:.1e} at n={n}",
            y=yb[worst], x=x[worst], residual=float(err[worst]),
        )
    return x[0] if single else x


def water_level(y) -> np.ndarray:
    """alpha* with sum_i (y_i - alpha*)_+ = 1, solved on the sorted segment in closed form."""
    y = np.asarray(y, dtype=float)
    ys = -np.sort(-y, axis=-1)
    d = y.shape[-1]
    k = np.arange(1, d + 1)
    # Candidate level if the top k coordinates are active.
    levels = (np.cumsum(ys, axis=-1) - 1.0) / k
    # Segment k is valid when level <= ys[k-1] (and > ys[k] for k < d).
    valid = levels <= ys
    kk = np.sum(valid, axis=-1, keepdims=True)
    return np.take_along_axis(levels, kk - 1, axis=-1)[..., 0]


@dataclass
class HLimit:
    value: np.ndarray
    level: np.ndarray
    excess: np.ndarray


def h_limit_full(y) -> HLimit:
    y = np.asarray(y, dtype=float)
    a = water_level(y)
    a_b = np.expand_dims(a, -1)
    return HLimit(np.minimum(y, a_b), a, np.maximum(y - a_b, 0.0))


def h_limit(y) -> np.ndarray:
    return h_limit_full(y).value


# ------------------------------------------------------------ game-level maps


@dataclass
class PayoffDecomposition:
    tilde_u: np.ndarray  # same shape as u: (|A_1|, ..., |A_I|, I)
    bar_u: tuple[np.ndarray, ...]  # bar_u[i][a_i]


def decompose(u) -> PayoffDecomposition:
    u = np.asarray(u, dtype=float)
    nplayers = u.ndim - 1
    tilde = np.empty_like(u)
    bars = []
    for i in range(nplayers):
        others = tuple(j for j in range(nplayers) if j != i)
        ui = u[..., i]
        bar = ui.mean(axis=others) if others else ui.copy()
        shape = [1] * nplayers
        shape[i] = -1
        tilde[..., i] = ui - bar.reshape(shape)
        bars.append(bar)
    return PayoffDecomposition(tilde, tuple(bars))


def own_action_values(u, x, i: int) -> np.ndarray:
    """u_i(a_i, x_{-i}) for every a_i."""
    t = np.asarray(u, dtype=float)[..., i]
    for j in reversed(range(len(x))):
        if j != i:
            t = np.tensordot(np.asarray(x[j], dtype=float), t, axes=([0], [j]))
    return t


def _flatten(tilde_u, zs) -> np.ndarray:
    nplayers = tilde_u.ndim - 1
    head = [tilde_u[..., i].reshape(-1) for i in range(nplayers)]
    return np.concatenate(head + [np.asarray(z).reshape(-1) for z in zs])


def phi(u, x) -> np.ndarray:
    """Flattened (tilde_u, z) with z_{i,a} = u_i(a, x_{-i}) + x_i(a).

    Order: tilde_u per player (C order over profiles), then z per player
    over its actions in declared order.
    """
    u = np.asarray(u, dtype=float)
    dec = decompose(u)
    zs = [own_action_values(u, x, i) + np.asarray(x[i], dtype=float) for i in range(u.ndim - 1)]
    return _flatten(dec.tilde_u, zs)


def phi_n(n: float, u, x) -> np.ndarray:
    """Like :func:`phi` with x_i replaced by softmax over player i's own actions."""
    u = np.asarray(u, dtype=float)
    dec = decompose(u)
    zs = []
    for i in range(u.ndim - 1):
        v = own_action_values(u, x, i)
        zs.append(v + softmax(n * v))
    return _flatten(dec.tilde_u, zs)


# ------------------------------------------------------------- convergence


def epsilon_bound(n: float, tol: float = 1e-15) -> float:
    """Root of eps = 1 / (1 + exp(eps n)) on (0, 1/2] by bisection."""
    lo, hi = 0.0, 0.5
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid - 0.5 * (1.0 - np.tanh(0.5 * mid * n)) < 0.0:
            lo = mid
        else:
            hi = mid
    return hi


@dataclass
class ConvergenceReport:
    n: float
    dim: int
    deviations: np.ndarray
    bound: float

    @property
    def sup(self) -> float:
        return float(np.max(self.deviations)) if self.deviations.size else 0.0

    @property
    def within_bound(self) -> bool:
        return bool(np.all(self.deviations <= self.bound))


def convergence_report(n: float, sample_count: int, box=(-2.0, 2.0), dim: int = 4, seed: int = 0, samples=None) -> ConvergenceReport:
    """sup over uniform samples of ||h^(n)(y) - h(y)||_inf against dim * eps(n)."""
    if samples is None:
        rng = np.random.default_rng(seed)
        samples = rng.uniform(box[0], box[1], size=(sample_count, dim))
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    dev = np.max(np.abs(h_n_inverse(n, samples) - h_limit(samples)), axis=-1)
    return ConvergenceReport(n, samples.shape[-1], dev, samples.shape[-1] * epsilon_bound(n))
