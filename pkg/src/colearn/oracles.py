"""Randomized oracle comparison suites.

``belief`` suite: compose the belief filter along every own history and
compare with beliefs obtained by summing the joint probability of every
state path and opponent-action path consistent with that history.

``rollout`` suite: compare the rollout's action and minimized objective with
the open-loop expectimax enumeration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .belief import NORMALIZER_FLOOR, InconsistentFeedbackError, belief_update, predict
from .game import GameSpec
from .planner import (
    BeliefStrategy,
    ConstantStrategy,
    ValueEstimate,
    expectimax_oracle,
    optimal_value,
    rollout,
    stationary_values,
)


def _stochastic(rng: np.random.Generator, shape, sparsity: float = 0.0) -> np.ndarray:
    x = rng.dirichlet(np.ones(shape[-1]), size=shape[:-1])
    if sparsity > 0 and shape[-1] > 1:
        x = np.where(rng.random(x.shape) < sparsity, 0.0, x)
        dead = x.sum(axis=-1) == 0
        x[dead, 0] = 1.0
        x = x / x.sum(axis=-1, keepdims=True)
    return x


def random_game(rng: np.random.Generator, num_states: int, actions: tuple[int, int],
                num_obs: tuple[int, int], sparsity: float = 0.3, discount: float | None = None) -> GameSpec:
    S = num_states
    return GameSpec(
        num_states=S,
        actions=actions,
        num_obs=num_obs,
        obs_kernel=tuple(_stochastic(rng, (S, num_obs[k]), sparsity) for k in (0, 1)),
        transition=_stochastic(rng, (S, actions[0], actions[1], S), sparsity),
        cost=tuple(rng.normal(size=(S, actions[0], actions[1])) for _ in (0, 1)),
        initial_belief=_stochastic(rng, (S,), 0.0),
        discount=float(rng.uniform(0.5, 0.95)) if discount is None else discount,
    )


def softmax_strategy(weights: np.ndarray, temperature: float = 1.0) -> BeliefStrategy:
    """Belief-dependent mixed strategy: ``softmax(b @ W / temperature)``."""
    W = np.array(weights, dtype=float)

    def fn(b):
        x = b @ W / temperature
        e = np.exp(x - x.max())
        return e / e.sum()

    return BeliefStrategy(fn)


# ------------------------------------------------------------------- belief


def history_oracle(spec: GameSpec, player: int, opponent, history) -> list[np.ndarray | None]:
    """Beliefs after every prefix of ``history`` by brute-force path summation.

    ``history`` is a sequence of ``(own action, next observation)`` pairs.
    The opponent strategy is evaluated at the oracle's own prefix beliefs.
    Entry ``m`` is ``None`` once the prefix has zero probability.
    """
    S = spec.num_states
    opp = GameSpec.opponent(player)
    B = spec.actions[opp]
    f, z = spec.transition_for(player), spec.obs_kernel[player]
    b1 = np.asarray(spec.initial_belief, dtype=float)
    out: list[np.ndarray | None] = [b1]
    for m in range(1, len(history) + 1):
        if out[-1] is None:
            out.append(None)
            continue
        grids = np.meshgrid(*([np.arange(S)] * (m + 1) + [np.arange(B)] * m), indexing="ij")
        states, acts = grids[: m + 1], grids[m + 1:]
        w = b1[states[0]]
        for j in range(m):
            a, o = history[j]
            q = np.asarray(opponent(out[j]), dtype=float)
            w = w * q[acts[j]] * f[states[j], a, acts[j], states[j + 1]] * z[states[j + 1], o]
        mass = np.bincount(states[m].ravel(), weights=w.ravel(), minlength=S)
        total = mass.sum()
        out.append(None if total <= NORMALIZER_FLOOR else mass / total)
    return out


def _drop_observation_update(spec, player, prior, feedback, opponent_strategy):
    # seeded fault: prediction step only
    return predict(spec, player, prior, feedback.prev_own_action, opponent_strategy(prior))


def filter_history(spec: GameSpec, player: int, opponent, history,
                   update: Callable = belief_update) -> list[np.ndarray | None]:
    from .game import InfoFeedback

    b = np.asarray(spec.initial_belief, dtype=float)
    out: list[np.ndarray | None] = [b]
    for a, o in history:
        if b is None:
            out.append(None)
            continue
        try:
            b = update(spec, player, b, InfoFeedback(a, o), opponent)
        except InconsistentFeedbackError:
            b = None
        out.append(b)
    return out


@dataclass
class SuiteReport:
    kind: str
    comparisons: int = 0
    max_deviation: float = 0.0
    mismatches: int = 0
    details: list[str] = field(default_factory=list)

    def passed(self, tol: float) -> bool:
        return self.mismatches == 0 and self.max_deviation < tol


def belief_suite(rng: np.random.Generator, instances: int, max_states: int = 3,
                 max_actions: int = 2, max_obs: int = 2, max_length: int = 4,
                 fault: str = "none") -> SuiteReport:
    update = _drop_observation_update if fault == "drop-observation" else belief_update
    rep = SuiteReport("belief")
    for g in range(instances):
        S = int(rng.integers(1, max_states + 1))
        A = (int(rng.integers(1, max_actions + 1)), int(rng.integers(1, max_actions + 1)))
        O = (int(rng.integers(1, max_obs + 1)), int(rng.integers(1, max_obs + 1)))
        spec = random_game(rng, S, A, O)
        opponent = softmax_strategy(rng.normal(scale=2.0, size=(S, A[1])))
        pairs = list(itertools.product(range(A[0]), range(O[0])))
        for history in itertools.product(pairs, repeat=max_length):
            got = filter_history(spec, 0, opponent, history, update)
            want = history_oracle(spec, 0, opponent, history)
            for m, (x, y) in enumerate(zip(got, want)):
                rep.comparisons += 1
                if (x is None) != (y is None):
                    rep.mismatches += 1
                    rep.details.append(f"game {g} history {history[:m]}: feasibility differs")
                elif x is not None:
                    dev = float(np.max(np.abs(x - y)))
                    rep.max_deviation = max(rep.max_deviation, dev)
    return rep


# ------------------------------------------------------------------ rollout


def random_rollout_instance(rng: np.random.Generator, index: int, max_states: int = 4,
                            max_actions: int = 3, max_obs: int = 3, max_lookahead: int = 3):
    """One rollout test instance; the terminal value alternates linear / nonlinear."""
    S = int(rng.integers(1, max_states + 1))
    A = (int(rng.integers(1, max_actions + 1)), int(rng.integers(1, max_actions + 1)))
    O = (int(rng.integers(1, max_obs + 1)), 1)
    spec = random_game(rng, S, A, O, sparsity=0.2)
    lookahead = int(rng.integers(1, max_lookahead + 1))
    if index % 3 == 0:
        opponent = ConstantStrategy(rng.dirichlet(np.ones(A[1])))
    else:
        opponent = softmax_strategy(rng.normal(scale=2.0, size=(S, A[1])))
    if index % 2 == 0:
        tail = int(rng.integers(1, 4))
        profile = (rng.dirichlet(np.ones(A[0])), rng.dirichlet(np.ones(A[1])))
        terminal = ValueEstimate.linear(stationary_values(spec, 0, profile, tail), ("exact-dp", tail))
    else:
        terminal = optimal_value(spec, 0, opponent, 1)
    belief = rng.dirichlet(np.ones(S))
    return spec, opponent, belief, terminal, lookahead


def rollout_suite(rng: np.random.Generator, instances: int, max_states: int = 4,
                  max_actions: int = 3, max_obs: int = 3, max_length: int = 3,
                  node_budget: int = 2_000_000) -> SuiteReport:
    rep = SuiteReport("rollout")
    for i in range(instances):
        spec, opp, b, term, ell = random_rollout_instance(rng, i, max_states, max_actions,
                                                          max_obs, max_length)
        got = rollout(spec, 0, opp, b, term, ell, node_budget)
        want = expectimax_oracle(spec, 0, opp, b, ell, term, node_budget=node_budget)
        rep.comparisons += 1
        rep.max_deviation = max(rep.max_deviation, abs(got.value - want.value))
        if got.action != want.action:
            rep.mismatches += 1
            rep.details.append(f"instance {i}: rollout {got.sequence} vs oracle {want.sequence}")
    return rep


def run_suites(doc: dict) -> list[SuiteReport]:
    """Run every suite of a validated oracle-diff config."""
    rng = np.random.default_rng(doc.get("seed", 0))
    budget = doc.get("node_budget", 2_000_000)
    reports = []
    for suite in doc["suites"]:
        kw = {k: suite[k] for k in ("max_states", "max_actions", "max_obs", "max_length") if k in suite}
        if suite["type"] == "belief":
            reports.append(belief_suite(rng, suite["instances"], fault=suite.get("fault", "none"), **kw))
        else:
            reports.append(rollout_suite(rng, suite["instances"], node_budget=budget, **kw))
    return reports
