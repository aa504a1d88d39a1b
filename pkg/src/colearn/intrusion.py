"""Defender/attacker intrusion-response game with a synthetic alert model.

State ``s`` counts compromised servers (0..N).  Both players choose Stop (0)
or Continue (1).  A defender Stop recovers every server; an attacker Stop
compromises one more server.  The defender sees a noisy alert count whose
mean grows with ``s``; the attacker sees the state.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .forecaster import ConjectureSet
from .game import GameSpec
from .planner import ConstantStrategy

DEFENDER, ATTACKER = 0, 1
STOP, CONTINUE = 0, 1


@dataclass(frozen=True)
class IntrusionConfig:
    max_compromised: int = 10
    num_obs: int = 100
    obs_base: float = 10.0
    obs_slope: float = 10.0
    obs_scale: float = 5.0
    discount: float = 0.95
    attacker_stop_prob: float = 0.05

    def __post_init__(self):
        if self.max_compromised < 1:
            raise ValueError("max_compromised must be >= 1")
        if self.num_obs < 2:
            raise ValueError("num_obs must be >= 2")
        if self.obs_scale <= 0:
            raise ValueError("obs_scale must be positive")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        if not 0.0 <= self.attacker_stop_prob <= 1.0:
            raise ValueError("attacker_stop_prob must lie in [0, 1]")

    @classmethod
    def paper_scale(cls, **overrides) -> "IntrusionConfig":
        return cls(**{"max_compromised": 64, **overrides})

    def to_dict(self) -> dict:
        return asdict(self)


def defender_cost(s: int, a_def: int) -> float:
    if a_def == STOP:
        return 1.0 - 2.0 * (s > 0)
    return float(s) ** 1.25


def alert_kernel(cfg: IntrusionConfig) -> np.ndarray:
    """Discretized Gaussian over alert bins, mean clamped to the bin range."""
    s = np.arange(cfg.max_compromised + 1)[:, None]
    bins = np.arange(cfg.num_obs)[None, :]
    mean = np.clip(cfg.obs_base + cfg.obs_slope * s, 0, cfg.num_obs - 1)
    w = np.exp(-0.5 * ((bins - mean) / cfg.obs_scale) ** 2)
    return w / w.sum(axis=1, keepdims=True)


def build_game(cfg: IntrusionConfig | None = None) -> GameSpec:
    cfg = cfg or IntrusionConfig()
    n = cfg.max_compromised
    S = n + 1
    f = np.zeros((S, 2, 2, S))
    c = np.zeros((S, 2, 2))
    for s in range(S):
        f[s, STOP, :, 0] = 1.0
        f[s, CONTINUE, CONTINUE, s] = 1.0
        f[s, CONTINUE, STOP, min(s + 1, n)] = 1.0
        for a in (STOP, CONTINUE):
            c[s, a, :] = defender_cost(s, a)
    b1 = np.zeros(S)
    b1[0] = 1.0
    return GameSpec(
        num_states=S,
        actions=(2, 2),
        num_obs=(cfg.num_obs, S),
        obs_kernel=(alert_kernel(cfg), np.eye(S)),
        transition=f,
        cost=(c, -c),
        initial_belief=b1,
        discount=cfg.discount,
        player_names=("D", "A"),
        action_names=(("S", "C"), ("S", "C")),
    )


def initial_strategies(cfg: IntrusionConfig | None = None) -> tuple[ConstantStrategy, ConstantStrategy]:
    cfg = cfg or IntrusionConfig()
    p = cfg.attacker_stop_prob
    return ConstantStrategy([1.0, 0.0]), ConstantStrategy([p, 1.0 - p])


def default_conjecture_set(builder=None) -> ConjectureSet:
    """Lookahead conjectures {1, 2} with a uniform prior.

    Without an explicit builder, a parameter maps to the opponent-seat
    rollout strategy of that lookahead.
    """
    if builder is None:
        from .engine import rollout_builder as builder
    return ConjectureSet([1, 2], builder)
