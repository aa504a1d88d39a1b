import itertools
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from colearn.game import (
    GameSpec,
    TruncationError,
    check_truncation,
    discounted_return,
    evaluate_profile,
    step,
    truncation_horizon,
    validate,
)
from colearn.intrusion import CONTINUE, STOP, build_game
from colearn.oracles import random_game
from colearn.planner import ConstantStrategy

from conftest import make_game


def test_validate_flags_short_transition_row(two_state_game):
    f = np.array(two_state_game.transition)
    f[1, 0, 1] = [0.1, 0.8]
    bad = make_game(f, two_state_game.cost[0])
    v = validate(bad)
    assert len(v) == 1
    assert "transition" in v[0] and "(1, 0, 1)" in v[0]


def test_validate_intrusion_game_is_clean():
    assert validate(build_game()) == []


def test_validate_rejects_unit_discount(two_state_game):
    d = two_state_game.to_dict()
    d["discount"] = 1.0
    v = validate(GameSpec.from_dict(d))
    assert len(v) == 1 and v[0].startswith("discount")


def test_validate_reports_bad_shapes_without_crashing():
    spec = GameSpec(2, (1, 1), (2, 2), (np.eye(2), np.eye(3)), np.ones((2, 1, 1, 2)) / 2,
                    (np.zeros((2, 1, 1)), np.zeros((2, 1, 1))), np.array([0.5, 0.5]), 0.9)
    assert any("obs_kernel[1]" in m for m in validate(spec))


@pytest.mark.parametrize("s, a, nxt", [(2, (STOP, CONTINUE), 0), (1, (CONTINUE, CONTINUE), 1),
                                      (10, (CONTINUE, STOP), 10)])
def test_intrusion_steps(s, a, nxt):
    spec = build_game()
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert step(spec, s, a, rng).next_state == nxt


def test_step_costs_use_current_state():
    spec = build_game()
    out = step(spec, 3, (STOP, CONTINUE), np.random.default_rng(0))
    assert out.costs == (-1.0, 1.0)


def test_step_rejects_bad_indices(two_state_game):
    with pytest.raises(IndexError):
        step(two_state_game, 2, (0, 0), np.random.default_rng(0))
    with pytest.raises(IndexError):
        step(two_state_game, 0, (0, 5), np.random.default_rng(0))


def test_step_is_reproducible(two_state_game):
    runs = []
    for _ in range(2):
        rng = np.random.default_rng(42)
        runs.append([step(two_state_game, i % 2, (i % 2, (i // 2) % 2), rng) for i in range(50)])
    assert runs[0] == runs[1]


def test_step_frequencies_match_transition():
    spec = random_game(np.random.default_rng(3), 3, (2, 1), (2, 2), sparsity=0.0)
    n = 100_000
    for s, a0, a1 in itertools.product(range(3), range(2), range(1)):
        rng = np.random.default_rng(s * 10 + a0)
        counts = np.bincount([step(spec, s, (a0, a1), rng).next_state for _ in range(n)],
                             minlength=3)
        tv = 0.5 * np.abs(counts / n - spec.transition[s, a0, a1]).sum()
        assert tv < 0.01


def test_discounted_return_examples():
    assert discounted_return([1, 1, 1], 0.0) == 1.0
    assert discounted_return([1, 2], 0.5) == 2.0
    with pytest.raises(ValueError):
        discounted_return([1], 1.0)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=20), st.floats(0, 0.99),
       st.floats(0.01, 10))
def test_discounted_return_is_linear(costs, g, alpha):
    lhs = discounted_return([alpha * c for c in costs], g)
    assert lhs == pytest.approx(alpha * discounted_return(costs, g), rel=1e-9, abs=1e-9)


def _exact_two_step(spec, strategies):
    # E[c_1 + g c_2] by enumerating (s1, a, s2, a)
    total = 0.0
    p0, p1 = (s.probs for s in strategies)
    for s1 in range(spec.num_states):
        for a0, a1 in itertools.product(range(spec.actions[0]), range(spec.actions[1])):
            w = spec.initial_belief[s1] * p0[a0] * p1[a1]
            total += w * spec.cost[0][s1, a0, a1]
            for s2 in range(spec.num_states):
                for b0, b1 in itertools.product(range(spec.actions[0]), range(spec.actions[1])):
                    w2 = w * spec.transition[s1, a0, a1, s2] * p0[b0] * p1[b1]
                    total += spec.discount * w2 * spec.cost[0][s2, b0, b1]
    return total


def test_monte_carlo_two_step_matches_enumeration(two_state_game):
    strategies = (ConstantStrategy([0.3, 0.7]), ConstantStrategy([0.6, 0.4]))
    ev = evaluate_profile(two_state_game, strategies, 2, 10_000, 7, truncation_tol=10.0)
    se = ev.returns[:, 0].std(ddof=1) / np.sqrt(10_000)
    assert abs(ev.mean[0] - _exact_two_step(two_state_game, strategies)) < 3 * se


def test_evaluate_profile_geometric(single_state_game):
    one = (ConstantStrategy([1.0]), ConstantStrategy([1.0]))
    ev = evaluate_profile(single_state_game, one, 30, 10, 0)
    assert ev.mean[0] == pytest.approx(2.0, abs=1e-4)
    assert ev.ci_low[0] == ev.ci_high[0]


def test_evaluate_profile_zero_cost(two_state_game):
    zero = make_game(two_state_game.transition, np.zeros((2, 2, 2)), discount=0.5)
    ev = evaluate_profile(zero, (ConstantStrategy([0.5, 0.5]),) * 2, 20, 50, 1)
    assert ev.mean == (0.0, 0.0)


def test_evaluate_profile_matches_finite_horizon_value(two_state_game):
    spec = make_game(two_state_game.transition, two_state_game.cost[0] * 0.1,
                     b1=two_state_game.initial_belief, discount=0.3)
    strategies = (ConstantStrategy([0.2, 0.8]), ConstantStrategy([0.5, 0.5]))
    H = truncation_horizon(spec.discount, spec.max_abs_cost())
    # exact value by backward recursion over states
    v = np.zeros(2)
    p0, p1 = strategies[0].probs, strategies[1].probs
    for _ in range(H):
        v = np.array([sum(p0[a] * p1[b] * (spec.cost[0][s, a, b] + spec.discount *
                                           spec.transition[s, a, b] @ v)
                          for a in range(2) for b in range(2)) for s in range(2)])
    ev = evaluate_profile(spec, strategies, H, 4000, 11)
    se = ev.returns[:, 0].std(ddof=1) / np.sqrt(4000)
    assert abs(ev.mean[0] - spec.initial_belief @ v) < 3 * se


def test_evaluate_profile_deterministic(two_state_game):
    s = (ConstantStrategy([0.2, 0.8]), ConstantStrategy([0.5, 0.5]))
    a = evaluate_profile(two_state_game, s, 60, 30, 5).returns
    b = evaluate_profile(two_state_game, s, 60, 30, 5).returns
    assert np.array_equal(a, b)


def test_truncation_error():
    with pytest.raises(TruncationError, match="need horizon"):
        check_truncation(0.999, 10, 1.0, 1e-4)
    assert 0.5 ** truncation_horizon(0.5, 1.0) <= 1e-4


def test_json_roundtrip(two_state_game, tmp_path):
    path = tmp_path / "g.json"
    two_state_game.to_json(path)
    back = GameSpec.load(path)
    assert back.to_dict() == two_state_game.to_dict()
    assert json.loads(path.read_text())["schema_version"] == 1


def test_oriented_views(two_state_game):
    g = two_state_game
    assert g.cost_for(1)[1, 0, 1] == g.cost[1][1, 1, 0]
    assert np.array_equal(g.transition_for(1)[0, 1, 0], g.transition[0, 0, 1])
