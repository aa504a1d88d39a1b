"""KL-consistency diagnostics and the Berk-Nash equilibrium checker.

The KL divergence of a conjecture compares the feedback distribution the
player predicts under that conjecture (subjective) with the one generated
by the opponent's actual strategy (objective), averaged over an occupancy
measure of beliefs.  ``Z`` is its running log-likelihood-ratio estimate.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .belief import belief_key, predict, repeated_game_belief
from .game import GameSpec
from .planner import ObservationStrategy

PROB_FLOOR = 1e-12
DEFAULT_BERK_TOL = 1e-6


# ---------------------------------------------------------------- occupancy


@dataclass
class OccupancyMeasure:
    """Visit counts of rounded joint-belief keys ``(own belief, opponent belief)``."""

    counts: Counter = field(default_factory=Counter)
    total: int = 0
    _beliefs: dict = field(default_factory=dict, repr=False)

    def add(self, own: np.ndarray, opp: np.ndarray) -> None:
        key = (belief_key(own), belief_key(opp))
        if key not in self._beliefs:
            self._beliefs[key] = (np.array(own, dtype=float), np.array(opp, dtype=float))
        self.counts[key] += 1
        self.total += 1

    def support(self) -> list[tuple[np.ndarray, np.ndarray, float]]:
        """``(own belief, opponent belief, weight)`` for every visited key."""
        return [(*self._beliefs[k], c / self.total) for k, c in self.counts.items()]

    def __len__(self) -> int:
        return len(self.counts)


# ----------------------------------------------------------------------- KL


def feedback_kl(weights: Sequence[float], objective: np.ndarray, subjective: np.ndarray) -> float:
    """``sum_i w_i KL(objective_i || subjective_i)`` over finite feedback sets.

    Rows are feedback distributions at each support point.  Returns ``inf``
    when the subjective model gives zero mass to feedback the objective
    model can produce.
    """
    w = np.asarray(weights, dtype=float)
    p = np.atleast_2d(np.asarray(objective, dtype=float))
    q = np.atleast_2d(np.asarray(subjective, dtype=float))
    if p.shape != q.shape or p.shape[0] != w.size:
        raise ValueError("weights, objective and subjective must align")
    total = 0.0
    for wi, pi, qi in zip(w, p, q):
        if wi == 0.0:
            continue
        live = pi > 0
        if np.any(qi[live] <= 0):
            return float("inf")
        total += wi * float(np.sum(pi[live] * np.log(pi[live] / qi[live])))
    return total


def feedback_distribution(spec: GameSpec, player: int, belief: np.ndarray, own_strategy,
                          opponent_probs: np.ndarray) -> np.ndarray:
    """Joint law of the next feedback ``(own action, own observation)``, flattened."""
    own = np.asarray(own_strategy(belief), dtype=float)
    rows = []
    for a, pa in enumerate(own):
        pred = predict(spec, player, belief, a, opponent_probs)
        rows.append(pa * (pred @ spec.obs_kernel[player]))
    return np.concatenate(rows)


def kl_exact(spec: GameSpec, player: int, own_strategy, conjectured_opponent, true_opponent,
             occupancy: OccupancyMeasure) -> float:
    """KL divergence of a conjecture over a joint-belief occupancy measure.

    The subjective law evaluates the conjecture at the player's belief; the
    objective law evaluates the opponent's actual strategy at the opponent's
    belief, and in both the state is distributed by the player's belief.
    """
    w, p, q = [], [], []
    for own_b, opp_b, weight in occupancy.support():
        w.append(weight)
        p.append(feedback_distribution(spec, player, own_b, own_strategy, true_opponent(opp_b)))
        q.append(feedback_distribution(spec, player, own_b, own_strategy,
                                       conjectured_opponent(own_b)))
    if not w:
        return 0.0
    return feedback_kl(w, np.array(p), np.array(q))


@dataclass(frozen=True)
class KLRecord:
    """Running log-likelihood-ratio averages, one entry per conjecture."""

    log_ratio_sum: np.ndarray
    count: int = 0
    infinite: np.ndarray | None = None
    skipped: int = 0

    @classmethod
    def empty(cls, num_conjectures: int) -> "KLRecord":
        return cls(np.zeros(num_conjectures), 0, np.zeros(num_conjectures, dtype=bool))

    @property
    def z(self) -> np.ndarray:
        if self.count == 0:
            return np.zeros_like(self.log_ratio_sum)
        z = self.log_ratio_sum / self.count
        return np.where(self.infinite, np.inf, z)

    @property
    def delta_k(self) -> np.ndarray:
        z = self.z
        finite = z[np.isfinite(z)]
        best = finite.min() if finite.size else 0.0
        return z - best


def kl_running(record: KLRecord, subjective_likelihood, objective_likelihood: float) -> KLRecord:
    """Add one feedback observation to the running ``Z`` estimates.

    ``subjective_likelihood`` may be a scalar or one value per conjecture.
    A conjecture that gives zero probability to feedback the opponent did
    produce is flagged infinite from then on.
    """
    sub = np.broadcast_to(np.asarray(subjective_likelihood, dtype=float),
                          record.log_ratio_sum.shape)
    obj = float(objective_likelihood)
    if obj <= PROB_FLOOR:
        return KLRecord(record.log_ratio_sum, record.count, record.infinite, record.skipped + 1)
    bad = sub <= PROB_FLOOR
    with np.errstate(divide="ignore"):
        inc = np.where(bad, 0.0, np.log(obj) - np.log(np.where(bad, 1.0, sub)))
    return KLRecord(record.log_ratio_sum + inc, record.count + 1, record.infinite | bad,
                    record.skipped)


def theorem1_statistic(delta_k: Sequence[float], posterior_probs: Sequence[float]) -> float:
    """Posterior-weighted excess divergence ``sum_i dK_i mu_i``.

    Conjectures with infinite divergence but zero posterior mass contribute 0.
    """
    dk = np.asarray(delta_k, dtype=float)
    mu = np.asarray(posterior_probs, dtype=float)
    live = mu > 0
    return float(np.sum(dk[live] * mu[live]))


# -------------------------------------------------- repeated games / Berk-Nash


def repeated_occupancy(spec: GameSpec, player: int) -> np.ndarray:
    """Exact joint law of ``(own observation, opponent observation)`` in a repeated game."""
    opp = GameSpec.opponent(player)
    b1 = spec.initial_belief
    return np.einsum("s,so,sp->op", b1, spec.obs_kernel[player], spec.obs_kernel[opp])


def repeated_kl(spec: GameSpec, player: int, true_opponent: ObservationStrategy,
                conjecture: ObservationStrategy) -> float:
    """KL of a conjectured opponent table in a repeated game.

    The feedback is the opponent's action.  Given the player's own
    observation, its law mixes the opponent's table over the opponent's
    observation; the subjective law mixes the conjectured table the same way.
    """
    opp = GameSpec.opponent(player)
    joint = repeated_occupancy(spec, player)  # (O_k, O_opp)
    weights, p, q = [], [], []
    for o in range(spec.num_obs[player]):
        p_o = joint[o].sum()
        if p_o <= 0:
            continue
        b = repeated_game_belief(spec, player, o)
        opp_obs = b @ spec.obs_kernel[opp]
        weights.append(p_o)
        p.append(opp_obs @ true_opponent.table)
        q.append(opp_obs @ conjecture.table)
    return feedback_kl(weights, np.array(p), np.array(q))


def _mixture(opponent) -> list[tuple[float, ObservationStrategy]]:
    if isinstance(opponent, ObservationStrategy):
        return [(1.0, opponent)]
    return [(float(w), s) for w, s in opponent]


def expected_stage_costs(spec: GameSpec, player: int, opponent, observation: int) -> np.ndarray:
    """Expected cost of every own action after ``observation`` in a repeated game.

    ``opponent`` is an observation-based strategy or a list of
    ``(weight, strategy)`` pairs (a posterior mixture).
    """
    opp = GameSpec.opponent(player)
    b = repeated_game_belief(spec, player, observation)
    c = spec.cost_for(player)  # (S, A, A_opp)
    out = np.zeros(spec.actions[player])
    for w, strat in _mixture(opponent):
        if w == 0.0:
            continue
        q = spec.obs_kernel[opp] @ strat.table  # (S, A_opp)
        out += w * np.einsum("s,sab,sb->a", b, c, q)
    return out


def best_response_enum(spec: GameSpec, player: int, opponent,
                       tolerance: float = DEFAULT_BERK_TOL) -> list[list[int]]:
    """Optimal actions for each own observation (within ``tolerance``)."""
    out = []
    for o in range(spec.num_obs[player]):
        costs = expected_stage_costs(spec, player, opponent, o)
        out.append([int(a) for a in np.flatnonzero(costs <= costs.min() + tolerance)])
    return out


def best_response_strategies(spec: GameSpec, player: int, opponent,
                             tolerance: float = DEFAULT_BERK_TOL) -> list[ObservationStrategy]:
    """Every deterministic observation-based best response."""
    import itertools

    sets = best_response_enum(spec, player, opponent, tolerance)
    return [ObservationStrategy.deterministic(choice, spec.actions[player])
            for choice in itertools.product(*sets)]


@dataclass(frozen=True)
class Violation:
    clause: str  # "i" (optimality) or "ii" (consistency)
    player: int
    where: int  # observation index for (i), conjecture index for (ii)
    detail: str


@dataclass(frozen=True)
class Verdict:
    accept: bool
    violations: tuple[Violation, ...] = ()

    @property
    def clause(self) -> str | None:
        return self.violations[0].clause if self.violations else None

    def describe(self, spec: GameSpec | None = None) -> str:
        if self.accept:
            return "accept"
        v = self.violations[0]
        name = spec.player_names[v.player] if spec is not None else str(v.player)
        kind = "observation" if v.clause == "i" else "conjecture"
        return f"reject: clause ({v.clause}) player {name} {kind} {v.where}: {v.detail}"


def berk_nash_check(spec: GameSpec, conjectures: Sequence[Sequence[ObservationStrategy]],
                    profile: Sequence[ObservationStrategy], posteriors: Sequence[Sequence[float]],
                    tolerance: float = DEFAULT_BERK_TOL) -> Verdict:
    """Check a repeated-game profile and posteriors for a Berk-Nash equilibrium.

    ``conjectures[k]`` lists the opponent tables player ``k`` entertains and
    ``posteriors[k]`` its weights.  Clause (i) asks every action played after
    an observation with positive probability to be a best response to the
    posterior mixture; clause (ii) asks the posterior to be supported on
    KL-minimizing conjectures.
    """
    violations: list[Violation] = []
    for k in (0, 1):
        mu = np.asarray(posteriors[k], dtype=float)
        if mu.size != len(conjectures[k]):
            raise ValueError(f"player {k}: posterior size does not match conjecture count")
        mix = list(zip(mu, conjectures[k]))
        marg = repeated_occupancy(spec, k).sum(axis=1)
        for o in range(spec.num_obs[k]):
            if marg[o] <= 0:
                continue
            costs = expected_stage_costs(spec, k, mix, o)
            best = costs.min()
            for a in np.flatnonzero(profile[k].table[o] > 0):
                if costs[a] > best + tolerance:
                    violations.append(Violation(
                        "i", k, o,
                        f"action {a} costs {costs[a]:.6g} > best {best:.6g}"))
    for k in (0, 1):
        opp = GameSpec.opponent(k)
        mu = np.asarray(posteriors[k], dtype=float)
        kls = np.array([repeated_kl(spec, k, profile[opp], c) for c in conjectures[k]])
        kstar = kls.min()
        for i in np.flatnonzero(mu > 0):
            if not kls[i] - kstar <= tolerance:
                violations.append(Violation(
                    "ii", k, int(i),
                    f"posterior mass {mu[i]:.3g} on conjecture with excess KL {kls[i] - kstar:.6g}"))
    return Verdict(not violations, tuple(violations))
