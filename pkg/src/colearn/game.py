"""Two-player asymmetric-information stochastic games.

A :class:`GameSpec` holds the full game tuple: states, per-player actions,
observations, observation kernels and costs, the transition kernel, the
initial belief and the discount factor.

Joint tensors are stored in canonical profile order ``(player 0 action,
player 1 action)``.  ``transition[s, a0, a1, s']`` is the probability of
moving to ``s'`` and ``cost[k][s, a0, a1]`` is the stage cost of player
``k``.  Use :meth:`GameSpec.cost_for` and :meth:`GameSpec.transition_for` to
get the ``(own action, opponent action)`` orientation for a given player.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

SCHEMA_VERSION = 1
STOCHASTIC_TOL = 1e-12
DEFAULT_TRUNCATION_TOL = 1e-4


class TruncationError(ValueError):
    """Raised when a finite horizon cannot meet the truncation tolerance."""


def _frozen(x, dtype=float) -> np.ndarray:
    arr = np.array(x, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GameSpec:
    """Immutable description of a two-player stochastic game."""

    num_states: int
    actions: tuple[int, int]
    num_obs: tuple[int, int]
    obs_kernel: tuple[np.ndarray, np.ndarray]
    transition: np.ndarray
    cost: tuple[np.ndarray, np.ndarray]
    initial_belief: np.ndarray
    discount: float
    player_names: tuple[str, str] = ("0", "1")
    action_names: tuple[tuple[str, ...], tuple[str, ...]] | None = None
    repeated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))
        object.__setattr__(self, "num_obs", tuple(int(o) for o in self.num_obs))
        object.__setattr__(self, "obs_kernel", tuple(_frozen(z) for z in self.obs_kernel))
        object.__setattr__(self, "transition", _frozen(self.transition))
        object.__setattr__(self, "cost", tuple(_frozen(c) for c in self.cost))
        object.__setattr__(self, "initial_belief", _frozen(self.initial_belief))
        object.__setattr__(self, "discount", float(self.discount))
        object.__setattr__(self, "player_names", tuple(self.player_names))
        if self.action_names is not None:
            object.__setattr__(
                self, "action_names", tuple(tuple(n) for n in self.action_names)
            )

    # Oriented views are derived once; they are used on every planner call.
    @cached_property
    def _oriented_f(self) -> tuple[np.ndarray, np.ndarray]:
        return (self.transition, _frozen(np.swapaxes(self.transition, 1, 2)))

    @cached_property
    def _oriented_c(self) -> tuple[np.ndarray, np.ndarray]:
        return (self.cost[0], _frozen(np.swapaxes(self.cost[1], 1, 2)))

    @staticmethod
    def opponent(player: int) -> int:
        return 1 - player

    def cost_for(self, player: int) -> np.ndarray:
        """Cost of ``player`` indexed ``[s, own action, opponent action]``."""
        return self._oriented_c[player]

    def transition_for(self, player: int) -> np.ndarray:
        """Transition indexed ``[s, own action, opponent action, s']``."""
        return self._oriented_f[player]

    def max_abs_cost(self) -> float:
        return float(max(np.max(np.abs(c)) for c in self.cost))

    def profile(self, player: int, own, opp) -> tuple:
        """Order a ``(own, opponent)`` pair canonically."""
        return (own, opp) if player == 0 else (opp, own)

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "num_states": self.num_states,
            "actions": list(self.actions),
            "num_obs": list(self.num_obs),
            "obs_kernel": [z.tolist() for z in self.obs_kernel],
            "transition": self.transition.tolist(),
            "cost": [c.tolist() for c in self.cost],
            "initial_belief": self.initial_belief.tolist(),
            "discount": self.discount,
            "player_names": list(self.player_names),
            "repeated": self.repeated,
        }
        if self.action_names is not None:
            d["action_names"] = [list(n) for n in self.action_names]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GameSpec":
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported GameSpec schema_version {version}")
        names = d.get("action_names")
        return cls(
            num_states=int(d["num_states"]),
            actions=tuple(d["actions"]),
            num_obs=tuple(d["num_obs"]),
            obs_kernel=tuple(np.asarray(z, dtype=float) for z in d["obs_kernel"]),
            transition=np.asarray(d["transition"], dtype=float),
            cost=tuple(np.asarray(c, dtype=float) for c in d["cost"]),
            initial_belief=np.asarray(d["initial_belief"], dtype=float),
            discount=float(d["discount"]),
            player_names=tuple(d.get("player_names", ("0", "1"))),
            action_names=tuple(tuple(n) for n in names) if names else None,
            repeated=bool(d.get("repeated", False)),
        )

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict())
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, text: str) -> "GameSpec":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path: str | Path) -> "GameSpec":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class InfoFeedback:
    """Information revealed to a player before its decision at time t."""

    prev_own_action: int
    observation: int
    prev_opponent_action: int | None = None
    state: int | None = None


@dataclass(frozen=True)
class StageOutcome:
    next_state: int
    observations: tuple[int, int]
    costs: tuple[float, float]


def _check_stochastic(name: str, arr: np.ndarray, axis_desc: str) -> list[str]:
    out = []
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        bad = np.argwhere((arr < 0) | ~np.isfinite(arr))
        out.append(f"{name}: negative or non-finite entry at index {tuple(int(i) for i in bad[0])}")
    sums = arr.sum(axis=-1)
    bad_rows = np.argwhere(np.abs(sums - 1.0) > STOCHASTIC_TOL)
    for idx in bad_rows:
        idx = tuple(int(i) for i in idx)
        out.append(f"{name}: {axis_desc} {idx} sums to {sums[idx]:.12g}, expected 1")
    return out


def validate(spec: GameSpec) -> list[str]:
    """Return a list of invariant violations; empty iff ``spec`` is valid."""
    v: list[str] = []
    S = spec.num_states
    if S < 1:
        v.append(f"num_states: must be positive, got {S}")
    for k in (0, 1):
        if spec.actions[k] < 1:
            v.append(f"actions[{k}]: must be positive, got {spec.actions[k]}")
        if spec.num_obs[k] < 1:
            v.append(f"num_obs[{k}]: must be positive, got {spec.num_obs[k]}")
    if v:
        return v
    A0, A1 = spec.actions
    for k in (0, 1):
        z = spec.obs_kernel[k]
        if z.shape != (S, spec.num_obs[k]):
            v.append(f"obs_kernel[{k}]: shape {z.shape}, expected {(S, spec.num_obs[k])}")
        else:
            v += _check_stochastic(f"obs_kernel[{k}]", z, "row")
        c = spec.cost[k]
        if c.shape != (S, A0, A1):
            v.append(f"cost[{k}]: shape {c.shape}, expected {(S, A0, A1)}")
        elif not np.all(np.isfinite(c)):
            v.append(f"cost[{k}]: non-finite entries")
    f = spec.transition
    if f.shape != (S, A0, A1, S):
        v.append(f"transition: shape {f.shape}, expected {(S, A0, A1, S)}")
    else:
        v += _check_stochastic("transition", f, "row (s, a0, a1)")
    b = spec.initial_belief
    if b.shape != (S,):
        v.append(f"initial_belief: shape {b.shape}, expected {(S,)}")
    else:
        if np.any(b < 0):
            v.append(f"initial_belief: negative entry at index {int(np.argmin(b))}")
        if abs(b.sum() - 1.0) > STOCHASTIC_TOL:
            v.append(f"initial_belief: sums to {b.sum():.12g}, expected 1")
    if not (0.0 <= spec.discount < 1.0):
        v.append(f"discount: must lie in [0, 1), got {spec.discount}")
    return v


def _check_index(name: str, value: int, bound: int) -> None:
    if not (0 <= value < bound):
        raise IndexError(f"{name} {value} out of range [0, {bound})")


def draw(rng: np.random.Generator, p: np.ndarray) -> int:
    """Index sampled from the probability vector ``p`` by inverse CDF."""
    cdf = np.cumsum(p)
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(i, len(p) - 1)


def sample_observations(spec: GameSpec, state: int, rng: np.random.Generator) -> tuple[int, int]:
    return tuple(draw(rng, spec.obs_kernel[k][state]) for k in (0, 1))


def step(
    spec: GameSpec,
    state: int,
    action_profile: tuple[int, int],
    rng: np.random.Generator,
) -> StageOutcome:
    """Advance one stage.

    Costs are evaluated at the current state; the next state is drawn from the
    transition kernel and each player's observation for the next decision is
    drawn from its kernel at the next state.
    """
    _check_index("state", state, spec.num_states)
    a0, a1 = action_profile
    _check_index("action of player 0", a0, spec.actions[0])
    _check_index("action of player 1", a1, spec.actions[1])
    nxt = draw(rng, spec.transition[state, a0, a1])
    obs = sample_observations(spec, nxt, rng)
    costs = (float(spec.cost[0][state, a0, a1]), float(spec.cost[1][state, a0, a1]))
    return StageOutcome(next_state=nxt, observations=obs, costs=costs)


def discounted_return(costs: Sequence[float], discount: float) -> float:
    if not (0.0 <= discount < 1.0):
        raise ValueError(f"discount must lie in [0, 1), got {discount}")
    c = np.asarray(costs, dtype=float)
    return float(np.sum(c * discount ** np.arange(c.size)))


def truncation_horizon(discount: float, max_abs_cost: float, tol: float = DEFAULT_TRUNCATION_TOL) -> int:
    """Smallest H with ``discount**H * max_abs_cost <= tol``."""
    if max_abs_cost <= tol:
        return 1
    if discount == 0.0:
        return 1
    return max(1, math.ceil(math.log(tol / max_abs_cost) / math.log(discount)))


def check_truncation(discount: float, horizon: int, max_abs_cost: float, tol: float) -> None:
    if discount ** horizon * max_abs_cost > tol:
        need = truncation_horizon(discount, max_abs_cost, tol)
        raise TruncationError(
            f"horizon {horizon} leaves truncation error {discount ** horizon * max_abs_cost:.3g} "
            f"> {tol:g}; need horizon >= {need}"
        )


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """Independent per-episode generators derived from one root seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def mean_ci(samples: Sequence[float], z: float = 1.959963984540054) -> tuple[float, float, float]:
    """Sample mean with a normal-approximation 95% confidence interval."""
    x = np.asarray(samples, dtype=float)
    m = float(x.mean())
    if x.size < 2:
        return m, m, m
    half = z * float(x.std(ddof=1)) / math.sqrt(x.size)
    return m, m - half, m + half


@dataclass
class ProfileEvaluation:
    mean: tuple[float, float]
    ci_low: tuple[float, float]
    ci_high: tuple[float, float]
    returns: np.ndarray = field(repr=False)


def evaluate_profile(
    spec: GameSpec,
    strategies,
    horizon: int,
    num_episodes: int,
    rng: np.random.Generator | int,
    truncation_tol: float = DEFAULT_TRUNCATION_TOL,
) -> ProfileEvaluation:
    """Monte Carlo estimate of each player's discounted return.

    ``strategies`` is a pair of planner strategies; each player acts on its own
    first-order belief, filtered with the other player's strategy as the
    conjecture.
    """
    from .planner import simulate_profile

    check_truncation(spec.discount, horizon, spec.max_abs_cost(), truncation_tol)
    seed = rng if isinstance(rng, (int, np.integer)) else int(rng.integers(2**63))
    returns = np.empty((num_episodes, 2))
    for i, ep_rng in enumerate(spawn_rngs(int(seed), num_episodes)):
        start = draw(ep_rng, spec.initial_belief)
        returns[i] = simulate_profile(spec, strategies, spec.initial_belief, start, horizon, ep_rng)
    stats = [mean_ci(returns[:, k]) for k in (0, 1)]
    return ProfileEvaluation(
        mean=(stats[0][0], stats[1][0]),
        ci_low=(stats[0][1], stats[1][1]),
        ci_high=(stats[0][2], stats[1][2]),
        returns=returns,
    )
