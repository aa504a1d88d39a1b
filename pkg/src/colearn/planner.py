"""Strategies, critics and lookahead rollout against a conjectured opponent.

The rollout minimizes, over open-loop sequences of own actions, the expected
discounted stage cost over ``lookahead`` steps plus the discounted terminal
value at the reachable belief.  The expectation runs over the conjectured
opponent's action distribution (evaluated at the node belief), the
transition and the player's own observations; node beliefs are advanced with
the first-order filter.  For ``lookahead == 1`` open-loop and closed-loop
minimization coincide.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .belief import (
    InconsistentFeedbackError,
    belief_key,
    belief_update,
    observation_split,
    predict,
)
from .game import (
    DEFAULT_TRUNCATION_TOL,
    GameSpec,
    InfoFeedback,
    check_truncation,
    draw,
    sample_observations,
)

DEFAULT_NODE_BUDGET = 2_000_000
TIE_TOL = 1e-9


class RolloutBudgetError(RuntimeError):
    """The lookahead tree is larger than the configured node budget."""


# ---------------------------------------------------------------- strategies


class Strategy:
    """Maps a belief (or an observation) to a distribution over own actions."""

    mode = "belief"
    stationary = False

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError


class ConstantStrategy(Strategy):
    mode = "constant"
    stationary = True

    def __init__(self, probs: Sequence[float]):
        p = np.asarray(probs, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
            raise ValueError(f"not a probability vector: {p}")
        p.setflags(write=False)
        self.probs = p

    def __call__(self, x=None) -> np.ndarray:
        return self.probs

    def __repr__(self) -> str:
        return f"ConstantStrategy({self.probs.tolist()})"


def point_mass_strategy(num_actions: int, action: int) -> ConstantStrategy:
    p = np.zeros(num_actions)
    p[action] = 1.0
    return ConstantStrategy(p)


class BeliefStrategy(Strategy):
    """Wraps an arbitrary ``belief -> probabilities`` function."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray]):
        self.fn = fn

    def __call__(self, belief) -> np.ndarray:
        return np.asarray(self.fn(belief), dtype=float)


class ObservationStrategy(Strategy):
    """Tabular strategy of a repeated game: observation -> action distribution."""

    mode = "observation"

    def __init__(self, table):
        t = np.asarray(table, dtype=float)
        if t.ndim != 2 or np.any(t < 0) or np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-10):
            raise ValueError("observation strategy needs a row-stochastic (O, A) table")
        t.setflags(write=False)
        self.table = t

    def __call__(self, observation: int) -> np.ndarray:
        return self.table[observation]

    @classmethod
    def deterministic(cls, actions: Sequence[int], num_actions: int) -> "ObservationStrategy":
        t = np.zeros((len(actions), num_actions))
        t[np.arange(len(actions)), actions] = 1.0
        return cls(t)

    def __repr__(self) -> str:
        return f"ObservationStrategy({self.table.tolist()})"


class RolloutStrategy(Strategy):
    """The rollout policy as a function of belief, with its conjecture and critic frozen."""

    def __init__(self, spec: GameSpec, player: int, opponent: Strategy, value: "ValueEstimate",
                 lookahead: int, node_budget: int = DEFAULT_NODE_BUDGET):
        self.spec = spec
        self.player = player
        self.opponent = opponent
        self.value = value
        self.lookahead = lookahead
        self.node_budget = node_budget
        self._cache: dict[tuple, np.ndarray] = {}
        self._linear = None
        if opponent.stationary and value.state_values is not None:
            seqs, mat = _linear_objectives(spec, player, opponent.probs, value.state_values, lookahead)
            self._linear = (seqs, mat)

    def decide(self, belief: np.ndarray) -> "RolloutResult":
        if self._linear is not None:
            seqs, mat = self._linear
            return _pick(seqs, belief @ mat)
        return rollout(self.spec, self.player, self.opponent, belief, self.value,
                       self.lookahead, self.node_budget)

    def __call__(self, belief) -> np.ndarray:
        key = belief_key(belief)
        hit = self._cache.get(key)
        if hit is None:
            hit = np.zeros(self.spec.actions[self.player])
            hit[self.decide(belief).action] = 1.0
            hit.setflags(write=False)
            self._cache[key] = hit
        return hit


def freeze(strategy: Strategy, belief: np.ndarray) -> ConstantStrategy:
    """The strategy's action distribution at ``belief``, held fixed everywhere."""
    if strategy.stationary:
        return strategy
    return ConstantStrategy(strategy(belief))


# ------------------------------------------------------------------- critic


@dataclass(frozen=True)
class ValueEstimate:
    """Critic: expected discounted cost-to-go as a function of belief.

    ``state_values`` is set when the estimate is linear in the belief, which
    lets the planner take expectations without enumerating observations.
    """

    fn: Callable[[np.ndarray], float] = field(repr=False)
    provenance: tuple
    state_values: np.ndarray | None = field(default=None, repr=False)

    def __call__(self, belief: np.ndarray) -> float:
        return float(self.fn(belief))

    @classmethod
    def zero(cls, num_states: int) -> "ValueEstimate":
        return cls.linear(np.zeros(num_states), ("zero",))

    @classmethod
    def linear(cls, state_values, provenance: tuple) -> "ValueEstimate":
        v = np.array(state_values, dtype=float)
        v.setflags(write=False)
        return cls(lambda b: float(b @ v), provenance, v)


def _stationary_chain(spec: GameSpec, player: int, profile: tuple[np.ndarray, np.ndarray]):
    p0, p1 = profile
    P = np.einsum("a,b,sabt->st", p0, p1, spec.transition)
    c = np.einsum("a,b,sab->s", p0, p1, spec.cost[player])
    return P, c


def stationary_values(spec: GameSpec, player: int, profile: tuple[np.ndarray, np.ndarray],
                      horizon: int | None = None) -> np.ndarray:
    """Per-state discounted cost of a belief-independent profile.

    ``profile`` holds action distributions in canonical order.  With
    ``horizon=None`` the infinite-horizon value is solved directly.
    """
    P, c = _stationary_chain(spec, player, profile)
    g = spec.discount
    if horizon is None:
        return np.linalg.solve(np.eye(spec.num_states) - g * P, c)
    v = np.zeros(spec.num_states)
    for _ in range(horizon):
        v = c + g * P @ v
    return v


def exact_value(spec: GameSpec, player: int, profile: tuple[Strategy, Strategy],
                belief: np.ndarray | None = None, horizon: int | None = None) -> ValueEstimate:
    """Exact critic for a profile frozen at ``belief``.

    Belief-dependent strategies are replaced by their action distribution at
    ``belief``; the resulting stationary profile is evaluated exactly.
    """
    frozen = []
    for s in profile:
        if not s.stationary:
            if belief is None:
                raise ValueError("belief needed to freeze a belief-dependent strategy")
            s = freeze(s, belief)
        frozen.append(s.probs)
    v = stationary_values(spec, player, tuple(frozen), horizon)
    return ValueEstimate.linear(v, ("exact-dp", horizon if horizon is not None else math.inf))


def simulate_profile(spec: GameSpec, strategies: Sequence[Strategy], belief: np.ndarray,
                     start_state: int, horizon: int, rng: np.random.Generator) -> np.ndarray:
    """Discounted returns of both players over one truncated episode.

    Each belief-dependent player filters its own belief with the other
    player's strategy as the conjecture; an inconsistent observation resets
    that player's belief to the starting belief.
    """
    beliefs = [np.array(belief, dtype=float), np.array(belief, dtype=float)]
    track = [not s.stationary for s in strategies]
    s = start_state
    out = np.zeros(2)
    disc = 1.0
    for _ in range(horizon):
        acts = []
        for k in (0, 1):
            p = strategies[k](beliefs[k])
            acts.append(draw(rng, p) if np.count_nonzero(p) > 1 else int(np.argmax(p)))
        out[0] += disc * spec.cost[0][s, acts[0], acts[1]]
        out[1] += disc * spec.cost[1][s, acts[0], acts[1]]
        s = draw(rng, spec.transition[s, acts[0], acts[1]])
        if any(track):
            obs = sample_observations(spec, s, rng)
            for k in (0, 1):
                if track[k]:
                    fb = InfoFeedback(acts[k], obs[k])
                    try:
                        beliefs[k] = belief_update(spec, k, beliefs[k], fb, strategies[1 - k])
                    except InconsistentFeedbackError:
                        beliefs[k] = np.array(belief, dtype=float)
        disc *= spec.discount
    return out


def estimate_value(spec: GameSpec, player: int, profile: Sequence[Strategy], belief: np.ndarray,
                   samples: int, horizon: int, rng: np.random.Generator | int,
                   truncation_tol: float = DEFAULT_TRUNCATION_TOL) -> float:
    """Monte Carlo cost-to-go of ``player`` from ``belief`` under ``profile``."""
    check_truncation(spec.discount, horizon, spec.max_abs_cost(), truncation_tol)
    if spec.max_abs_cost() == 0.0:
        return 0.0
    rng = np.random.default_rng(rng)
    total = 0.0
    for _ in range(samples):
        s0 = draw(rng, belief)
        total += simulate_profile(spec, profile, belief, s0, horizon, rng)[player]
    return total / samples


def monte_carlo_critic(spec: GameSpec, player: int, profile: Sequence[Strategy], samples: int,
                       horizon: int, seed: int) -> ValueEstimate:
    """Lazy critic: fresh Monte Carlo at each queried belief.

    The stream for a belief is derived from ``seed`` and the rounded belief,
    so repeated queries return identical values.
    """
    check_truncation(spec.discount, horizon, spec.max_abs_cost(), DEFAULT_TRUNCATION_TOL)
    cache: dict[tuple, float] = {}

    def fn(b):
        key = belief_key(b)
        if key not in cache:
            words = [int(round(x * 1e9)) for x in key]
            rng = np.random.default_rng(np.random.SeedSequence([seed, *words]))
            cache[key] = estimate_value(spec, player, profile, b, samples, horizon, rng)
        return cache[key]

    return ValueEstimate(fn, ("monte-carlo", samples, horizon))


# ------------------------------------------------------------------ rollout


@dataclass(frozen=True)
class RolloutResult:
    action: int
    sequence: tuple[int, ...]
    value: float
    objectives: np.ndarray = field(repr=False, compare=False, default=None)


def _pick(seqs: list[tuple[int, ...]], values: np.ndarray) -> RolloutResult:
    # first sequence (lexicographic) within TIE_TOL of the minimum
    best = float(values.min())
    i = int(np.flatnonzero(values <= best + TIE_TOL)[0])
    return RolloutResult(seqs[i][0] if seqs[i] else None, seqs[i], float(values[i]), values)


def _check_budget(spec: GameSpec, player: int, lookahead: int, budget: int) -> None:
    opp = GameSpec.opponent(player)
    per_step = spec.actions[player] * spec.actions[opp] * spec.num_obs[player]
    nodes = per_step ** lookahead
    if nodes > budget:
        raise RolloutBudgetError(
            f"lookahead {lookahead} needs ~{nodes} nodes (> budget {budget}); use a smaller lookahead"
        )


def _linear_objectives(spec: GameSpec, player: int, opp_probs: np.ndarray, terminal: np.ndarray,
                       lookahead: int) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Objective of every sequence as a linear functional of the root belief.

    Valid when the opponent mixture does not depend on belief and the
    terminal value is linear: the expected terminal value at the reachable
    beliefs then equals its value at the predicted state distribution.
    """
    c = spec.cost_for(player) @ opp_probs  # (S, A)
    F = np.einsum("sabt,b->ast", spec.transition_for(player), opp_probs)  # (A, S, S')
    g = spec.discount
    A = spec.actions[player]
    suffix = {(): np.asarray(terminal, dtype=float)}
    for length in range(1, lookahead + 1):
        for seq in itertools.product(range(A), repeat=length):
            suffix[seq] = c[:, seq[0]] + g * F[seq[0]] @ suffix[seq[1:]]
    seqs = list(itertools.product(range(A), repeat=lookahead))
    return seqs, np.stack([suffix[s] for s in seqs], axis=1)


def sequence_objective(spec: GameSpec, player: int, opponent: Strategy, belief: np.ndarray,
                       terminal_value: ValueEstimate, sequence: Sequence[int]) -> float:
    """Expected discounted cost of an open-loop own-action sequence."""
    if not sequence:
        return terminal_value(belief)
    a = sequence[0]
    q = np.asarray(opponent(belief), dtype=float)
    stage = float(belief @ spec.cost_for(player)[:, a, :] @ q)
    pred = predict(spec, player, belief, a, q)
    g = spec.discount
    rest = sequence[1:]
    linear = terminal_value.state_values is not None
    if not rest and linear:
        return stage + g * float(pred @ terminal_value.state_values)
    if rest and linear and opponent.stationary:
        _, mat = _linear_objectives(spec, player, q, terminal_value.state_values, len(rest))
        seqs = list(itertools.product(range(spec.actions[player]), repeat=len(rest)))
        return stage + g * float(pred @ mat[:, seqs.index(tuple(rest))])
    _, p_obs, posts = observation_split(spec, player, pred)
    future = sum(p * sequence_objective(spec, player, opponent, b, terminal_value, rest)
                 for p, b in zip(p_obs, posts))
    return stage + g * future


def rollout(spec: GameSpec, player: int, conjectured_opponent: Strategy, belief: np.ndarray,
            terminal_value: ValueEstimate, lookahead: int,
            node_budget: int = DEFAULT_NODE_BUDGET) -> RolloutResult:
    """Lookahead minimization against a conjectured opponent.

    Returns the first action of the minimizing sequence; ties go to the
    lexicographically smallest sequence.
    """
    if lookahead < 1:
        raise ValueError("lookahead must be >= 1")
    _check_budget(spec, player, lookahead, node_budget)
    belief = np.asarray(belief, dtype=float)
    seqs = list(itertools.product(range(spec.actions[player]), repeat=lookahead))
    if conjectured_opponent.stationary and terminal_value.state_values is not None:
        _, mat = _linear_objectives(spec, player, conjectured_opponent.probs,
                                    terminal_value.state_values, lookahead)
        return _pick(seqs, belief @ mat)
    values = np.array([
        sequence_objective(spec, player, conjectured_opponent, belief, terminal_value, s)
        for s in seqs
    ])
    return _pick(seqs, values)


def conjectured_opponent_strategy(spec: GameSpec, player: int, own_prev_strategy: Strategy,
                                  belief: np.ndarray, opponent_value: ValueEstimate,
                                  conjectured_lookahead: int,
                                  node_budget: int = DEFAULT_NODE_BUDGET) -> ConstantStrategy:
    """Opponent strategy obtained by a rollout from the opponent's seat.

    The opponent is assumed to act on ``player``'s belief and to respond to
    ``player``'s previous strategy; the result is a point mass.
    """
    opp = GameSpec.opponent(player)
    res = rollout(spec, opp, own_prev_strategy, belief, opponent_value, conjectured_lookahead,
                  node_budget)
    return point_mass_strategy(spec.actions[opp], res.action)


def stage_costs(spec: GameSpec, player: int, conjectured_opponent: Strategy,
                belief: np.ndarray) -> np.ndarray:
    """Expected stage cost of every own action."""
    q = np.asarray(conjectured_opponent(belief), dtype=float)
    return np.einsum("s,sab,b->a", belief, spec.cost_for(player), q)


def myopic_best_response(spec: GameSpec, player: int, conjectured_opponent: Strategy,
                         belief: np.ndarray) -> int:
    costs = stage_costs(spec, player, conjectured_opponent, belief)
    return int(np.flatnonzero(costs <= costs.min() + TIE_TOL)[0])


# ------------------------------------------------------------------- oracle


@dataclass(frozen=True)
class OracleResult:
    value: float
    action: int | None
    sequence: tuple[int, ...]


def expectimax_oracle(spec: GameSpec, player: int, conjectured_opponent: Strategy,
                      belief: np.ndarray, horizon: int,
                      terminal_value: ValueEstimate | None = None, closed_loop: bool = False,
                      node_budget: int = DEFAULT_NODE_BUDGET) -> OracleResult:
    """Brute-force lookahead value by enumerating joint outcomes.

    Works with unnormalized joint masses ``P(state, observation history)``
    accumulated one scalar outcome at a time, and only normalizes where a
    belief is needed (opponent strategy, terminal value).  With
    ``closed_loop=False`` the minimum is over open-loop sequences, the same
    objective the rollout minimizes; ``closed_loop=True`` re-optimizes after
    every observation.
    """
    S = spec.num_states
    opp = GameSpec.opponent(player)
    A, B, O = spec.actions[player], spec.actions[opp], spec.num_obs[player]
    terminal = terminal_value or ValueEstimate.zero(S)
    belief = [float(x) for x in belief]
    if horizon == 0:
        return OracleResult(terminal(np.array(belief)), None, ())
    # scalar work: one expansion (S*B*S*O products) per reachable history node
    nodes = (A * O) ** horizon * S * S * B * (1 if closed_loop else O)
    if nodes > node_budget:
        raise RolloutBudgetError(f"oracle needs ~{nodes} nodes (> budget {node_budget})")
    f, c, z, g = spec.transition_for(player), spec.cost_for(player), spec.obs_kernel[player], spec.discount

    def expand(mass, a):
        total = sum(mass)
        q = conjectured_opponent(np.array([m / total for m in mass]))
        stage = 0.0
        children: dict[int, list[float]] = {}
        for s in range(S):
            if mass[s] == 0.0:
                continue
            for b in range(B):
                w = mass[s] * q[b]
                if w == 0.0:
                    continue
                stage += w * c[s, a, b]
                for s2 in range(S):
                    t = w * f[s, a, b, s2]
                    if t == 0.0:
                        continue
                    for o in range(O):
                        u = t * z[s2, o]
                        if u != 0.0:
                            children.setdefault(o, [0.0] * S)[s2] += u
        return stage, children

    def value(mass, depth, seq):
        # unnormalized: expected cost-to-go times P(observation history)
        total = sum(mass)
        if depth == horizon:
            return total * terminal(np.array([m / total for m in mass]))
        actions = range(A) if closed_loop else (seq[depth],)
        best = math.inf
        for a in actions:
            stage, children = expand(mass, a)
            v = stage + g * sum(value(m, depth + 1, seq) for m in children.values())
            best = min(best, v)
        return best

    if closed_loop:
        root = []
        for a in range(A):
            stage, children = expand(belief, a)
            root.append(stage + g * sum(value(m, 1, None) for m in children.values()))
        root = np.array(root)
        i = int(np.flatnonzero(root <= root.min() + TIE_TOL)[0])
        return OracleResult(float(root[i]), i, (i,))
    seqs = list(itertools.product(range(A), repeat=horizon))
    vals = np.array([value(belief, 0, s) for s in seqs])
    i = int(np.flatnonzero(vals <= vals.min() + TIE_TOL)[0])
    return OracleResult(float(vals[i]), seqs[i][0], seqs[i])


def optimal_value(spec: GameSpec, player: int, conjectured_opponent: Strategy,
                  horizon: int) -> ValueEstimate:
    """Closed-loop optimal ``horizon``-step value against a fixed opponent."""
    return ValueEstimate(
        lambda b: expectimax_oracle(spec, player, conjectured_opponent, b, horizon,
                                    closed_loop=True).value,
        ("exact-dp", horizon),
    )
