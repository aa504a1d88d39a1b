"""Bayesian forecaster over a finite set of opponent conjectures."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .belief import predict
from .game import GameSpec, InfoFeedback, draw

LIKELIHOOD_FLOOR = 1e-12


class AssumptionViolationError(ArithmeticError):
    """No conjecture assigns the observed feedback positive probability."""


@dataclass
class ConjectureSet:
    """Finite, ordered candidate parameters for the opponent's strategy.

    ``strategy_builder`` turns a parameter into a concrete opponent strategy;
    its extra arguments are whatever the caller needs (for the rollout
    parameterization: game, belief, critic and so on).
    """

    params: list[Any]
    strategy_builder: Callable[..., Any] | None = None
    prior: np.ndarray | None = None

    def __post_init__(self):
        if not self.params:
            raise ValueError("conjecture set must be non-empty")
        if self.prior is None:
            self.prior = np.full(len(self.params), 1.0 / len(self.params))
        self.prior = np.asarray(self.prior, dtype=float)
        if self.prior.shape != (len(self.params),):
            raise ValueError("prior length must match the number of conjectures")

    def __len__(self) -> int:
        return len(self.params)

    def build(self, param, *args, **kwargs):
        if self.strategy_builder is None:
            raise ValueError("conjecture set has no strategy_builder")
        return self.strategy_builder(param, *args, **kwargs)

    def initial_posterior(self) -> "Posterior":
        return Posterior.from_probs(self.prior)


def _logsumexp(x: np.ndarray) -> float:
    m = float(np.max(x))
    if not np.isfinite(m):
        return m
    return m + float(np.log(np.sum(np.exp(x - m))))


@dataclass(frozen=True)
class Posterior:
    """Distribution over conjectures, stored as normalized log-probabilities."""

    log_probs: np.ndarray = field(repr=False)

    @classmethod
    def from_probs(cls, probs: Sequence[float], require_full_support: bool = True) -> "Posterior":
        p = np.asarray(probs, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
            raise ValueError(f"not a probability vector: {p}")
        if require_full_support and np.any(p <= 0):
            raise ValueError("initial posterior must have full support")
        with np.errstate(divide="ignore"):
            return cls(np.log(p))

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    def __len__(self) -> int:
        return self.log_probs.size


def posterior_update(prior: Posterior, likelihoods: Sequence[float]) -> Posterior:
    """Bayes rule over the conjecture set."""
    lik = np.asarray(likelihoods, dtype=float)
    if lik.shape != prior.log_probs.shape:
        raise ValueError("one likelihood per conjecture expected")
    if np.all(lik <= LIKELIHOOD_FLOOR):
        raise AssumptionViolationError(
            "grain-of-truth violated: every conjecture assigns the feedback "
            f"probability <= {LIKELIHOOD_FLOOR:g} (likelihoods {lik.tolist()})"
        )
    with np.errstate(divide="ignore"):
        logp = prior.log_probs + np.log(lik)
    logp = logp - _logsumexp(logp)
    return Posterior(logp)


def sample_conjecture(posterior: Posterior, rng: np.random.Generator, mode: str = "sample") -> int:
    """Index of a conjecture drawn from the posterior (or its MAP index)."""
    p = posterior.probs
    if mode == "map":
        return int(np.argmax(p))  # ties -> lowest index
    if mode != "sample":
        raise ValueError(f"unknown sampling mode {mode!r}")
    return draw(rng, p)


def subjective_likelihood(
    spec: GameSpec,
    player: int,
    feedback: InfoFeedback,
    opponent_strategy,
    belief: np.ndarray,
    own_strategy=None,
    repeated: bool = False,
) -> float:
    """Probability of ``feedback`` under a conjectured opponent strategy.

    Both strategies are evaluated at ``belief``, the player's belief before
    the feedback.  In repeated-game mode the feedback is the opponent's
    observed action, and ``opponent_strategy`` maps the opponent's
    observation to an action distribution.
    """
    opp = GameSpec.opponent(player)
    if repeated:
        a = feedback.prev_opponent_action
        if a is None:
            raise ValueError("repeated-game likelihood needs prev_opponent_action")
        table = opponent_strategy.table  # (O_opp, A_opp)
        # sum_{s,o} b(s) z^{-k}(o|s) pi(a|o)
        return float(belief @ spec.obs_kernel[opp] @ table[:, a])

    a_own = feedback.prev_own_action
    own_p = 1.0 if own_strategy is None else float(own_strategy(belief)[a_own])
    if own_p == 0.0:
        return 0.0
    opp_probs = np.asarray(opponent_strategy(belief), dtype=float)
    if feedback.prev_opponent_action is not None:
        a = feedback.prev_opponent_action
        mask = np.zeros_like(opp_probs)
        mask[a] = opp_probs[a]
        opp_probs = mask
    pred = predict(spec, player, belief, a_own, opp_probs)
    return own_p * float(pred @ spec.obs_kernel[player][:, feedback.observation])
