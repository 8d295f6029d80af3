import numpy as np
import pytest

from conftest import random_payoffs, random_profile
from quitsolve.game import MixedProfile, game_from_arrays
from quitsolve.logit import nash_from_logit_limit, regrets
from quitsolve.verification import (
    Discounted,
    Undiscounted,
    a2_diagnostic,
    best_pure_deviation,
    brute_force_nash,
    check_aux_absorbing_equilibrium,
    check_epsilon_equilibrium,
    grid_deviation_max,
)
from quitsolve.verification.regret import simplex_grid

MODES = [Undiscounted(), Discounted(0.1, np.zeros(3))]


def _quit_wins_game():
    """All-quit pays (1, 1); every unilateral switch to continuing pays 0."""
    u = np.zeros((2, 2, 2))
    u[0, 0] = [1.0, 1.0]
    return game_from_arrays(u)


def test_all_quit_equilibrium():
    g = _quit_wins_game()
    x = MixedProfile((np.array([1.0, 0.0]), np.array([1.0, 0.0])))
    for mode in (Undiscounted(), Discounted(0.2)):
        ok, rep = check_epsilon_equilibrium(g, x, mode, 0.0)
        assert ok and np.all(rep.regrets == 0.0)
        np.testing.assert_array_equal(rep.values, [1.0, 1.0])


def test_perturbed_equilibrium_fails():
    g = _quit_wins_game()
    x = MixedProfile((np.array([0.9, 0.1]), np.array([1.0, 0.0])))
    ok, rep = check_epsilon_equilibrium(g, x, Undiscounted(), 1e-3)
    assert not ok
    assert rep.best_actions[0] == 0 and rep.regrets[0] == pytest.approx(0.1)


def test_epsilon_two_always_passes(rng):
    for _ in range(20):
        g = game_from_arrays(random_payoffs(rng, (2, 1, 2)))
        x = random_profile(rng, g.action_counts)
        assert check_epsilon_equilibrium(g, x, Discounted(0.3, rng.uniform(-1, 1, 3)), 2.0)[0]


def test_symmetric_regrets(rng):
    a = rng.uniform(0, 1, (3, 3))
    u = np.stack([a, a.T], axis=-1)
    u[1:, 1:] = 0.0
    g = game_from_arrays(u)
    y = rng.dirichlet(np.ones(3))
    rep = best_pure_deviation(g, MixedProfile((y, y)))
    assert rep.raw_regrets[0] == pytest.approx(rep.raw_regrets[1], abs=1e-14)


def test_vertex_optimality(rng):
    for _ in range(30):
        g = game_from_arrays(random_payoffs(rng, (2, 1, 2)))
        x = random_profile(rng, g.action_counts)
        for mode in MODES:
            rep = best_pure_deviation(g, x, mode)
            for i in range(3):
                assert rep.best_values[i] >= grid_deviation_max(g, x, mode, i) - 1e-9


def test_simplex_grid_sizes():
    assert simplex_grid(2).shape == (101, 2)
    g3 = simplex_grid(3)
    assert g3.shape[0] >= 101
    np.testing.assert_allclose(g3.sum(axis=1), 1.0)
    assert simplex_grid(1).tolist() == [[1.0]]


def test_report_to_dict():
    g = _quit_wins_game()
    x = MixedProfile((np.array([0.5, 0.5]), np.array([1.0, 0.0])))
    d = best_pure_deviation(g, x).to_dict(g)
    assert d["players"]["P1"]["best_deviation"] == "Q"
    assert d["max_regret"] == pytest.approx(0.5)


def test_aux_classification():
    u = np.full((2, 2, 2, 3), 0.2)
    g = game_from_arrays(u)
    q = np.full(3, 0.2)
    alpha = [[1.0], [1.0], [1.0]]
    assert check_aux_absorbing_equilibrium(g, alpha, q, [0, 0, 0], 0.1).category == "p = 0"
    assert check_aux_absorbing_equilibrium(g, alpha, q, [1e-3, 0, 0], 0.1).category == "p in (0, eps^2)"
    c = check_aux_absorbing_equilibrium(g, alpha, q, [0.5, 0.6, 0], 0.86)
    assert c.category == "p >= eps^2" and c.p >= 0.75


def test_aux_zero_continuing_better():
    u = np.full((2, 3, 2), 0.3)
    g = game_from_arrays(u)
    c = check_aux_absorbing_equilibrium(g, [[1.0], [0.5, 0.5]], [0.5, 0.5], [0, 0], 0.1)
    assert c.is_equilibrium and c.category == "p = 0"


def test_aux_not_equilibrium():
    c = check_aux_absorbing_equilibrium(_quit_wins_game(), [[1.0], [1.0]], [0, 0], [0.0, 1.0], 0.1)
    assert c.category == "not equilibrium" and np.max(c.regrets) > 0


def test_coordination_game():
    u = np.zeros((2, 2, 2))
    u[0, 0] = u[1, 1] = [1.0, 1.0]
    eqs = brute_force_nash(u)
    assert len(eqs) == 3
    mixed = [e for e in eqs if 0 < e[0][0] < 1]
    assert len(mixed) == 1
    np.testing.assert_allclose(mixed[0][0], [0.5, 0.5])
    np.testing.assert_allclose(mixed[0][1], [0.5, 0.5])


def test_dominant_unique():
    u = np.zeros((3, 2, 2))
    u[..., 0] = [[0.9, 0.8], [0.1, 0.0], [0.2, 0.3]]
    u[..., 1] = [[0.1, 0.5], [0.2, 0.6], [0.0, 0.9]]
    eqs = brute_force_nash(u)
    assert len(eqs) == 1
    assert eqs[0][0].tolist() == [1.0, 0.0, 0.0] and eqs[0][1].tolist() == [0.0, 1.0]


def test_brute_force_regret_and_parity(rng):
    for shape in [(2, 2, 2), (3, 3, 2), (2, 2, 2, 3)]:
        for _ in range(5):
            u = rng.uniform(0, 1, shape)
            eqs = brute_force_nash(u)
            assert eqs
            for e in eqs:
                assert np.max(regrets(u, e.probs)) <= 1e-9
            if len(shape) == 3:
                assert len(eqs) % 2 == 1


def test_brute_force_degenerate_notes():
    notes = []
    eqs = brute_force_nash(np.zeros((2, 2, 2)), notes)
    assert eqs and notes


def test_brute_force_limits():
    with pytest.raises(ValueError):
        brute_force_nash(np.zeros((4, 2, 2)))
    with pytest.raises(ValueError):
        brute_force_nash(np.zeros((2, 2, 2, 2, 4)))


def test_logit_limit_cross_check(rng):
    hits = 0
    for _ in range(10):
        u = rng.uniform(0, 1, (2, 2, 2))
        x, _ = nash_from_logit_limit(u, tol=3e-4)
        eqs = brute_force_nash(u)
        d = min(max(np.max(np.abs(a - b)) for a, b in zip(x, e)) for e in eqs)
        hits += d <= 1e-2
    assert hits == 10


def test_a2_quit_beats_q():
    u = np.zeros((2, 2, 2))
    u[0, :, 0] = 0.8
    u[:, 0, 1] = 0.8
    g = game_from_arrays(u)
    rep = a2_diagnostic(g, [[1.0], [1.0]], [0, 0], [1e-1, 1e-2, 1e-3, 1e-4, 1e-5])
    assert rep.verdict == "A.2-consistent"
    assert min(rep.p) >= 0.05 and not rep.indifferent


def test_a2_continuing_dominates():
    u = np.full((2, 2, 2), 0.5)
    u[1, 1] = 0.0
    g = game_from_arrays(u)
    rep = a2_diagnostic(g, [[1.0], [1.0]], [1.0, 1.0], [1e-1, 1e-3, 1e-5])
    assert rep.verdict == "A.1-suggestive"
    assert rep.p[-1] == 0.0


def test_a2_indifferent():
    u = np.full((2, 2, 2), 0.4)
    rep = a2_diagnostic(game_from_arrays(u), [[1.0], [1.0]], [0.4, 0.4], [1e-1, 1e-2])
    assert rep.indifferent
    assert rep.to_dict()["non_unique"] is True


def test_a2_schedule_order():
    with pytest.raises(ValueError):
        a2_diagnostic(_quit_wins_game(), [[1.0], [1.0]], [0, 0], [1e-3, 1e-2])
