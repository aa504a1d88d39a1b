import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from colearn.belief import (
    InconsistentFeedbackError,
    belief_key,
    belief_update,
    belief_update_informed,
    repeated_game_belief,
    point_mass,
)
from colearn.game import InfoFeedback
from colearn.oracles import filter_history, history_oracle, random_game, softmax_strategy
from colearn.planner import BeliefStrategy, ConstantStrategy

from conftest import make_game


def _random_prior(rng, n):
    return rng.dirichlet(np.ones(n))


def test_perfect_observation_gives_point_mass():
    rng = np.random.default_rng(0)
    spec = random_game(rng, 3, (2, 2), (3, 3), sparsity=0.0)
    spec = make_game(spec.transition, spec.cost[0])  # identity kernels
    for o in range(3):
        b = belief_update(spec, 0, _random_prior(rng, 3), InfoFeedback(1, o),
                          ConstantStrategy([0.5, 0.5]))
        assert np.array_equal(b, point_mass(3, o))


def test_uninformative_update_keeps_prior():
    f = np.zeros((3, 2, 2, 3))
    f[:, :, :] = np.eye(3)[:, None, None, :]
    spec = make_game(f, np.zeros((3, 2, 2)), z0=np.full((3, 4), 0.25))
    prior = np.array([0.2, 0.5, 0.3])
    b = belief_update(spec, 0, prior, InfoFeedback(0, 2), ConstantStrategy([0.1, 0.9]))
    assert np.allclose(b, prior, atol=1e-15)


def test_two_state_filter_matches_history_oracle(two_state_game):
    opponent = softmax_strategy(np.array([[1.0, -1.0], [-2.0, 0.5]]))
    pairs = list(itertools.product(range(2), range(2)))
    worst = 0.0
    for history in itertools.product(pairs, repeat=4):
        got = filter_history(two_state_game, 0, opponent, history)
        want = history_oracle(two_state_game, 0, opponent, history)
        for x, y in zip(got, want):
            worst = max(worst, float(np.max(np.abs(x - y))))
    assert worst < 1e-10


def test_opponent_strategy_is_evaluated_at_own_prior(two_state_game):
    seen = []

    def fn(b):
        seen.append(np.array(b))
        return np.array([0.3, 0.7])

    prior = np.array([0.25, 0.75])
    belief_update(two_state_game, 0, prior, InfoFeedback(1, 0), BeliefStrategy(fn))
    assert len(seen) == 1 and np.array_equal(seen[0], prior)


def test_observed_opponent_action_replaces_conjecture(two_state_game):
    prior = np.array([0.5, 0.5])
    fb = InfoFeedback(0, 1, prev_opponent_action=1)
    b = belief_update(two_state_game, 0, prior, fb, ConstantStrategy([1.0, 0.0]))
    ref = belief_update(two_state_game, 0, prior, InfoFeedback(0, 1), ConstantStrategy([0.0, 1.0]))
    assert np.allclose(b, ref)


def test_inconsistent_feedback_raises():
    f = np.zeros((2, 1, 1, 2))
    f[:, 0, 0, 0] = 1.0  # always to state 0
    spec = make_game(f, np.zeros((2, 1, 1)))
    fb = InfoFeedback(0, 1)
    with pytest.raises(InconsistentFeedbackError) as err:
        belief_update(spec, 0, np.array([0.5, 0.5]), fb, ConstantStrategy([1.0]))
    assert err.value.feedback == fb


@pytest.mark.parametrize("prior", [np.full(5, 0.2), point_mass(5, 3)])
def test_informed_update(prior):
    fb = InfoFeedback(0, 0, state=3)
    spec = random_game(np.random.default_rng(1), 5, (1, 1), (1, 1))
    assert np.array_equal(belief_update_informed(spec, 1, prior, fb), point_mass(5, 3))
    assert np.array_equal(
        belief_update_informed(spec, 1, prior, InfoFeedback(0, 0, state=0)), point_mass(5, 0))
    with pytest.raises(ValueError):
        belief_update_informed(spec, 1, prior, InfoFeedback(0, 0))


def test_repeated_game_belief_examples():
    z = np.array([[0.2, 0.8], [0.8, 0.2]])
    uniform = make_game(np.ones((2, 1, 1, 2)) / 2, np.zeros((2, 1, 1)), z0=z)
    assert np.allclose(repeated_game_belief(uniform, 0, 0), [0.2, 0.8])
    delta = make_game(np.ones((2, 1, 1, 2)) / 2, np.zeros((2, 1, 1)), z0=z, b1=np.array([0.0, 1.0]))
    for o in (0, 1):
        assert np.array_equal(repeated_game_belief(delta, 0, o), [0.0, 1.0])
    lik = np.array([[0.5, 0.5], [0.1, 0.9]])
    g = make_game(np.ones((2, 1, 1, 2)) / 2, np.zeros((2, 1, 1)), z0=lik, b1=np.array([0.3, 0.7]))
    assert np.allclose(repeated_game_belief(g, 0, 0), [15 / 22, 7 / 22], atol=1e-15)


def test_belief_key_rounding():
    assert belief_key(np.array([1 / 3, 2 / 3])) == (0.333333333, 0.666666667)
    assert belief_key(np.array([-0.0, 1.0])) == (0.0, 1.0)


game_shapes = st.tuples(st.integers(1, 4), st.integers(1, 3), st.integers(1, 3), st.integers(1, 4))


@given(game_shapes, st.integers(0, 2**32 - 1))
def test_update_is_normalized(shape, seed):
    S, A0, A1, O = shape
    rng = np.random.default_rng(seed)
    spec = random_game(rng, S, (A0, A1), (O, 1))
    opp = softmax_strategy(rng.normal(size=(S, A1)))
    prior = rng.dirichlet(np.ones(S))
    for a, o in itertools.product(range(A0), range(O)):
        try:
            b = belief_update(spec, 0, prior, InfoFeedback(a, o), opp)
        except InconsistentFeedbackError:
            continue
        assert np.all(b >= 0) and abs(b.sum() - 1) < 1e-10


@given(game_shapes, st.integers(0, 2**32 - 1))
def test_unreachable_states_get_no_mass(shape, seed):
    S, A0, A1, O = shape
    rng = np.random.default_rng(seed)
    spec = random_game(rng, S, (A0, A1), (O, 1), sparsity=0.5)
    opp = ConstantStrategy(rng.dirichlet(np.ones(A1)))
    prior = rng.dirichlet(np.ones(S)) * (rng.random(S) < 0.6)
    if prior.sum() == 0:
        prior[0] = 1.0
    prior = prior / prior.sum()
    for a, o in itertools.product(range(A0), range(O)):
        try:
            b = belief_update(spec, 0, prior, InfoFeedback(a, o), opp)
        except InconsistentFeedbackError:
            continue
        support = prior > 0
        live = opp.probs > 0
        reach = (spec.transition[support][:, a][:, live] > 0).any(axis=(0, 1))
        assert np.all(b[~reach] == 0)
