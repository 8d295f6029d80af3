import itertools

import numpy as np
import pytest

from quitsolve.game import MixedProfile, game_from_arrays


def random_payoffs(rng, counts, low=-1.0, high=1.0, recursive=False):
    shape = tuple(k + 1 for k in counts) + (len(counts),)
    u = rng.uniform(low, high, shape)
    if recursive:
        u[(slice(1, None),) * len(counts)] = 0.0
    return u


def random_profile(rng, sizes):
    return MixedProfile(tuple(rng.dirichlet(np.ones(k)) for k in sizes))


def enumerate_absorption(u, x):
    """Brute-force oracle: (p, sum_a prob(a) u(a) over absorbing a) by listing pure profiles."""
    p = 0.0
    mass = np.zeros(u.shape[-1])
    for a in itertools.product(*(range(k) for k in u.shape[:-1])):
        if 0 not in a:
            continue
        w = np.prod([x[i][ai] for i, ai in enumerate(a)])
        p += w
        mass += w * u[a]
    return p, mass


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def game3(rng):
    return game_from_arrays(random_payoffs(rng, (2, 1, 3)))


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if passed else 'FAIL'}  {detail}")
