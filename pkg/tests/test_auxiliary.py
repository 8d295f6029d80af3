import numpy as np
import pytest

from conftest import random_payoffs
from quitsolve.auxiliary import (
    binary_profile,
    build_auxiliary,
    lift_stationary,
    payoff_equivalence_check,
    project_history,
)
from quitsolve.errors import MalformedHistory
from quitsolve.game import absorption_probability, game_from_arrays


def test_singleton_continue_is_own_auxiliary(rng):
    u = random_payoffs(rng, (1, 1, 1))
    g = game_from_arrays(u)
    q = np.array([0.1, 0.2, 0.3])
    aux = build_auxiliary(g, [[1.0]] * 3, q)
    expect = u.copy()
    expect[1, 1, 1] = q
    np.testing.assert_array_equal(aux.payoff, expect)


def test_vertex_alpha_picks_pure_action(rng):
    u = random_payoffs(rng, (2, 1))
    aux = build_auxiliary(game_from_arrays(u), [[0.0, 1.0], [1.0]], [0, 0])
    assert aux.payoff[1, 0].tolist() == u[2, 0].tolist()
    assert aux.payoff[0, 1].tolist() == u[0, 1].tolist()


def test_multilinear_entry_by_hand(rng):
    u = random_payoffs(rng, (2, 1, 1))
    aux = build_auxiliary(game_from_arrays(u), [[0.5, 0.5], [1.0], [1.0]], [0, 0, 0])
    # (C_1, Q_2, C_3): average of the two continue actions of player 1.
    np.testing.assert_allclose(aux.payoff[1, 0, 1], 0.5 * u[1, 0, 1] + 0.5 * u[2, 0, 1], atol=1e-15)


def test_entries_affine_in_alpha(rng):
    g = game_from_arrays(random_payoffs(rng, (3, 2)))
    a, b = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))
    alpha2 = rng.dirichlet(np.ones(2))
    t = 0.3
    mix = build_auxiliary(g, [t * a + (1 - t) * b, alpha2], [0, 0]).payoff
    ends = t * build_auxiliary(g, [a, alpha2], [0, 0]).payoff + (1 - t) * build_auxiliary(g, [b, alpha2], [0, 0]).payoff
    np.testing.assert_allclose(mix, ends, atol=1e-14)


def test_lift_examples(rng):
    g = game_from_arrays(random_payoffs(rng, (2, 1, 1)))
    aux = build_auxiliary(g, [[0.5, 0.5], [1.0], [1.0]], [0, 0, 0])
    x = lift_stationary(aux, [0.3, 0.0, 0.0])
    np.testing.assert_allclose(x[0], [0.3, 0.35, 0.35], atol=1e-15)
    assert x[1].tolist() == [0.0, 1.0]
    allq = lift_stationary(aux, [1.0, 1.0, 1.0])
    assert all(v[0] == 1.0 for v in allq)
    none = lift_stationary(aux, [0.0, 0.0, 0.0])
    np.testing.assert_allclose(none[0], [0, 0.5, 0.5])


def test_absorption_preserved_by_lift(rng):
    g = game_from_arrays(random_payoffs(rng, (2, 3, 1)))
    for _ in range(50):
        alpha = [rng.dirichlet(np.ones(k)) for k in (2, 3, 1)]
        xhat = rng.uniform(0, 1, 3)
        aux = build_auxiliary(g, alpha, np.zeros(3))
        p_base = absorption_probability(g, lift_stationary(aux, xhat))
        p_aux = absorption_probability(aux.as_game(), binary_profile(xhat))
        assert p_base == pytest.approx(1 - np.prod(1 - xhat), abs=1e-15)
        assert p_base == pytest.approx(p_aux, abs=1e-15)


def test_project_history():
    assert project_history(()) == ()
    assert project_history((0.4, (1, 1, 0))) == (0.4, (1, 1, 0))
    assert project_history((0.4, (2, 1, 0))) == (0.4, (1, 1, 0))
    h = (0.1, (1, 2), 0.7, (3, 1), 0.2)
    once = project_history(h)
    assert once == (0.1, (1, 1), 0.7, (1, 1), 0.2)
    assert project_history(once) == once


@pytest.mark.parametrize(
    "h",
    [
        (1.5,),
        ("x",),
        (0.1, 5),
        (0.1, (0, 1), 0.2, (1, 1)),
        (0.1, (-1, 1)),
    ],
)
def test_project_history_malformed(h):
    with pytest.raises(MalformedHistory):
        project_history(h)


def test_project_history_player_count():
    with pytest.raises(MalformedHistory):
        project_history((0.1, (1, 1)), num_players=3)


def test_equivalence_singleton_exact(rng):
    g = game_from_arrays(random_payoffs(rng, (1, 1)))
    rep = payoff_equivalence_check(g, [[1.0], [1.0]], [0.2, 0.4], [0.3, 0.6], lam=0.2)
    assert rep.gap == 0.0


def test_equivalence_random(rng):
    for _ in range(200):
        counts = tuple(rng.integers(1, 4, size=rng.integers(2, 4)))
        g = game_from_arrays(random_payoffs(rng, counts))
        alpha = [rng.dirichlet(np.ones(k)) for k in counts]
        q = rng.uniform(-1, 1, len(counts))
        xhat = rng.uniform(0, 1, len(counts))
        assert payoff_equivalence_check(g, alpha, q, xhat, lam=rng.uniform(1e-3, 1)).gap <= 1e-10
        assert payoff_equivalence_check(g, alpha, q, xhat).gap <= 1e-10


def test_to_dict_shape(rng):
    g = game_from_arrays(random_payoffs(rng, (2, 1)))
    d = build_auxiliary(g, [[0.4, 0.6], [1.0]], [0.5, 0.25]).to_dict()
    assert len(d["payoffs"]) == 4
    last = [e for e in d["payoffs"] if set(e["profile"].values()) == {"C"}][0]
    assert list(last["u"].values()) == [0.5, 0.25]


def test_wrong_alpha_size(rng):
    g = game_from_arrays(random_payoffs(rng, (2, 1)))
    with pytest.raises(ValueError):
        build_auxiliary(g, [[1.0], [1.0]], [0, 0])
    with pytest.raises(ValueError):
        build_auxiliary(g, [[0.5, 0.5], [1.0]], [0, 0, 0])
