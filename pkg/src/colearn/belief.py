"""Exact discrete belief filtering with first-order beliefs.

Beliefs are plain probability vectors over states.  The opponent's strategy
used by the filter is evaluated at the *filtering player's own* previous
belief: a first-order belief assumes the opponent acts on the same belief as
the player holding it.  This is deliberately different from objective
filtering, where the opponent would act on its own (unobserved) belief.
"""

from __future__ import annotations

import numpy as np

from .game import GameSpec, InfoFeedback

BeliefState = np.ndarray

NORMALIZER_FLOOR = 1e-300
KEY_DECIMALS = 9


class InconsistentFeedbackError(ArithmeticError):
    """Feedback has (numerically) zero probability under the conjecture."""

    def __init__(self, feedback, normalizer: float):
        super().__init__(
            f"inconsistent feedback {feedback!r}: normalizer {normalizer:.3g} "
            f"<= {NORMALIZER_FLOOR:g}"
        )
        self.feedback = feedback
        self.normalizer = normalizer


def check_belief(b: np.ndarray, tol: float = 1e-10) -> bool:
    return bool(np.all(b >= 0) and abs(b.sum() - 1.0) <= tol)


def point_mass(n: int, i: int) -> np.ndarray:
    e = np.zeros(n)
    e[i] = 1.0
    return e


def belief_key(b: np.ndarray, decimals: int = KEY_DECIMALS) -> tuple[float, ...]:
    """Hashable key for a belief, rounded to ``decimals`` places."""
    return tuple((np.round(b, decimals) + 0.0).tolist())


def predict(
    spec: GameSpec,
    player: int,
    belief: np.ndarray,
    own_action: int,
    opponent_probs: np.ndarray,
) -> np.ndarray:
    """Next-state distribution given the own action and opponent mixture."""
    f = spec.transition_for(player)[:, own_action]  # (S, A_opp, S')
    return np.einsum("s,a,sat->t", belief, opponent_probs, f)


def condition(
    spec: GameSpec, player: int, predicted: np.ndarray, observation: int, feedback=None
) -> np.ndarray:
    num = spec.obs_kernel[player][:, observation] * predicted
    den = float(num.sum())
    if den <= NORMALIZER_FLOOR:
        raise InconsistentFeedbackError(feedback if feedback is not None else observation, den)
    return num / den


def observation_split(
    spec: GameSpec, player: int, predicted: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All observation branches of a predicted state distribution.

    Returns ``(obs_indices, obs_probs, posteriors)`` for the observations with
    positive probability; ``posteriors[i]`` is the belief after ``obs_indices[i]``.
    """
    joint = predicted[:, None] * spec.obs_kernel[player]  # (S, O)
    p_obs = joint.sum(axis=0)
    idx = np.flatnonzero(p_obs > NORMALIZER_FLOOR)
    post = (joint[:, idx] / p_obs[idx]).T
    return idx, p_obs[idx], post


def belief_update(
    spec: GameSpec,
    player: int,
    prior: np.ndarray,
    feedback: InfoFeedback,
    opponent_strategy,
) -> np.ndarray:
    """One step of the first-order Bayesian filter.

    When the feedback also reveals the opponent's previous action, the filter
    conditions on that action instead of averaging over the conjecture.
    """
    opp = GameSpec.opponent(player)
    if feedback.prev_opponent_action is not None:
        probs = np.zeros(spec.actions[opp])
        probs[feedback.prev_opponent_action] = 1.0
    else:
        probs = opponent_strategy(prior)
    pred = predict(spec, player, prior, feedback.prev_own_action, probs)
    return condition(spec, player, pred, feedback.observation, feedback)


def belief_update_informed(
    spec: GameSpec, player: int, prior: np.ndarray, feedback: InfoFeedback
) -> np.ndarray:
    """Belief of a player whose feedback includes the current state."""
    if feedback.state is None:
        raise ValueError("informed update needs feedback.state")
    return point_mass(spec.num_states, feedback.state)


def repeated_game_belief(spec: GameSpec, player: int, observation: int) -> np.ndarray:
    """Belief in a repeated game, where the state is redrawn from b_1 each stage."""
    return condition(spec, player, spec.initial_belief, observation)


def entropy(b: np.ndarray) -> float:
    nz = b[b > 0]
    return float(-(nz * np.log(nz)).sum()) + 0.0  # no negative zero
