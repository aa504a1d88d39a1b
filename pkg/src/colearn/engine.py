"""The forecaster-critic-actor loop and its simulation harness.

Each learning agent, at every step after the first:

1. filters its belief with the conjecture it sampled at the previous step,
2. reweights its conjectures by the likelihood of the new feedback,
3. samples a conjecture,
4. evaluates the opponent (critic) and rebuilds the conjectured opponent
   strategy by a rollout from the opponent's seat,
5. evaluates itself and acts by rollout against the sampled conjecture.

The harness keeps the omniscient bookkeeping (true opponent behaviour, KL
estimates) outside the agents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .belief import (
    InconsistentFeedbackError,
    belief_update,
    belief_update_informed,
    entropy,
    predict,
)
from .consistency import KLRecord, OccupancyMeasure, kl_running, theorem1_statistic
from .forecaster import (
    AssumptionViolationError,
    ConjectureSet,
    Posterior,
    posterior_update,
    sample_conjecture,
    subjective_likelihood,
)
from .game import GameSpec, InfoFeedback, draw, mean_ci, step, truncation_horizon
from .planner import (
    DEFAULT_NODE_BUDGET,
    BeliefStrategy,
    ConstantStrategy,
    RolloutStrategy,
    Strategy,
    ValueEstimate,
    conjectured_opponent_strategy,
    exact_value,
    monte_carlo_critic,
    myopic_best_response,
    point_mass_strategy,
)

CONCENTRATION_LEVEL = 0.9


@dataclass(frozen=True)
class CriticConfig:
    kind: str = "exact"  # exact | monte-carlo | zero
    samples: int = 200
    horizon: int | None = None


@dataclass(frozen=True)
class AgentConfig:
    """How one player behaves.

    ``col``: the full learning loop over ``conjectures`` (lookahead values).
    ``fixed``: plays ``strategy`` (or the base strategy) forever.
    ``myopic``: filters with a fixed conjectured opponent and minimizes the
    expected stage cost.
    """

    mode: str = "col"
    lookahead: int = 1
    conjectures: tuple = (1, 2)
    prior: tuple | None = None
    sampling: str = "sample"  # sample | map | mixture
    critic: CriticConfig = CriticConfig()
    strategy: tuple | None = None
    informed: bool = False


@dataclass
class AgentState:
    belief: np.ndarray
    posterior: Posterior
    current_strategy: Strategy
    conjectured_opponent: Strategy
    lookahead: int
    conjecture_set: ConjectureSet
    candidates: list[Strategy] = field(default_factory=list)
    sampled: int = 0
    recoveries: int = 0
    violations: int = 0


def _critic(spec: GameSpec, player: int, profile, belief, cfg: CriticConfig,
            rng: np.random.Generator) -> ValueEstimate:
    if cfg.kind == "zero":
        return ValueEstimate.zero(spec.num_states)
    if cfg.kind == "exact":
        return exact_value(spec, player, profile, belief, cfg.horizon)
    if cfg.kind == "monte-carlo":
        horizon = cfg.horizon or truncation_horizon(spec.discount, spec.max_abs_cost())
        frozen = tuple(s if s.stationary else ConstantStrategy(s(belief)) for s in profile)
        return monte_carlo_critic(spec, player, frozen, cfg.samples, horizon,
                                  int(rng.integers(2**63)))
    raise ValueError(f"unknown critic kind {cfg.kind!r}")


def _mixture_strategy(posterior: Posterior, candidates: Sequence[Strategy]) -> Strategy:
    mu = posterior.probs
    if all(c.stationary for c in candidates):
        p = sum(m * c.probs for m, c in zip(mu, candidates))
        return ConstantStrategy(p / p.sum())
    return BeliefStrategy(lambda b: sum(m * c(b) for m, c in zip(mu, candidates)))


def rollout_builder(lookahead, spec, player, own_prev, belief, opponent_value,
                    node_budget=DEFAULT_NODE_BUDGET):
    """Conjecture parameter = the opponent's rollout lookahead."""
    return conjectured_opponent_strategy(spec, player, own_prev, belief, opponent_value,
                                         int(lookahead), node_budget)


def init_agent(spec: GameSpec, player: int, cfg: AgentConfig, base: Sequence[Strategy],
               builder: Callable | None = None) -> AgentState:
    """Agent at t=1: prior posterior, base strategies for itself and every conjecture."""
    opp = GameSpec.opponent(player)
    cset = ConjectureSet(list(cfg.conjectures), builder or rollout_builder,
                         None if cfg.prior is None else np.asarray(cfg.prior, dtype=float))
    return AgentState(
        belief=np.array(spec.initial_belief, dtype=float),
        posterior=cset.initial_posterior(),
        current_strategy=base[player],
        conjectured_opponent=base[opp],
        lookahead=cfg.lookahead,
        conjecture_set=cset,
        candidates=[base[opp]] * len(cset),
        sampled=0,
    )


def col_step(spec: GameSpec, player: int, agent: AgentState, feedback: InfoFeedback,
             rng: np.random.Generator, cfg: AgentConfig = AgentConfig(),
             node_budget: int = DEFAULT_NODE_BUDGET) -> tuple[int, AgentState, dict]:
    """One learning step at t >= 2; returns the action, new state and diagnostics."""
    opp = GameSpec.opponent(player)
    diag: dict = {"recovered": False, "violation": False}
    prev_b = agent.belief
    own_prev = agent.current_strategy

    # belief, with the conjecture used at t-1
    if cfg.sampling == "mixture":
        filt = _mixture_strategy(agent.posterior, agent.candidates)
    else:
        filt = agent.candidates[agent.sampled]
    recoveries = agent.recoveries
    try:
        if cfg.informed:
            belief = belief_update_informed(spec, player, prev_b, feedback)
        else:
            belief = belief_update(spec, player, prev_b, feedback, filt)
    except InconsistentFeedbackError:
        belief = np.array(spec.initial_belief, dtype=float)
        recoveries += 1
        diag["recovered"] = True

    # forecaster
    lik = np.array([
        subjective_likelihood(spec, player, feedback, c, prev_b, own_prev)
        for c in agent.candidates
    ])
    diag["likelihoods"] = lik
    violations = agent.violations
    try:
        posterior = posterior_update(agent.posterior, lik)
    except AssumptionViolationError:
        posterior = agent.posterior
        violations += 1
        diag["violation"] = True
    mode = "map" if cfg.sampling == "map" else "sample"
    sampled = sample_conjecture(posterior, rng, mode)

    # conjectural critic and conjectured opponent strategies
    opp_value = _critic(spec, opp, spec.profile(player, own_prev, agent.candidates[agent.sampled]),
                        belief, cfg.critic, rng)
    candidates = [
        agent.conjecture_set.build(p, spec, player, own_prev, belief, opp_value, node_budget)
        for p in agent.conjecture_set.params
    ]
    if cfg.sampling == "mixture":
        conj = _mixture_strategy(posterior, candidates)
    else:
        conj = candidates[sampled]
    own_value = _critic(spec, player, spec.profile(player, own_prev, conj), belief, cfg.critic, rng)

    # actor
    strategy = RolloutStrategy(spec, player, conj, own_value, agent.lookahead, node_budget)
    probs = strategy(belief)
    action = _act(probs, rng)
    new = replace(agent, belief=belief, posterior=posterior, current_strategy=strategy,
                  conjectured_opponent=conj, candidates=candidates, sampled=sampled,
                  recoveries=recoveries, violations=violations)
    return action, new, diag


# ------------------------------------------------------------------ harness


@dataclass
class RunRecord:
    seed: int
    columns: dict[str, np.ndarray]
    conjectures: list
    events: list[dict] = field(default_factory=list)
    discounted_cost: float = 0.0
    concentration_time: int | None = None
    argmin_conjecture: int | None = None
    occupancy: OccupancyMeasure | None = field(default=None, repr=False)

    @property
    def steps(self) -> int:
        return int(self.columns["t"].size)


def _act(probs: np.ndarray, rng: np.random.Generator) -> int:
    if np.count_nonzero(probs) > 1:
        return draw(rng, probs)
    return int(np.argmax(probs))


class _Player:
    """Engine-side wrapper: dispatches on the agent mode."""

    def __init__(self, spec: GameSpec, k: int, cfg: AgentConfig, base, builder, node_budget):
        self.spec, self.k, self.cfg, self.node_budget = spec, k, cfg, node_budget
        opp = GameSpec.opponent(k)
        if cfg.mode == "fixed":
            self.strategy = ConstantStrategy(cfg.strategy) if cfg.strategy else base[k]
        elif cfg.mode == "myopic":
            self.conj = ConstantStrategy(cfg.strategy) if cfg.strategy else base[opp]
            self.belief = np.array(spec.initial_belief, dtype=float)
            self.strategy = base[k]
            self.recoveries = 0
        elif cfg.mode == "col":
            self.agent = init_agent(spec, k, cfg, base, builder)
            self.strategy = self.agent.current_strategy
        else:
            raise ValueError(f"unknown agent mode {cfg.mode!r}")

    @property
    def belief(self) -> np.ndarray:
        if self.cfg.mode == "col":
            return self.agent.belief
        return self._belief if self.cfg.mode == "myopic" else self.spec.initial_belief

    @belief.setter
    def belief(self, b):
        self._belief = b

    def first(self, rng) -> int:
        return _act(self.strategy(self.belief), rng)

    def next(self, feedback: InfoFeedback, rng) -> tuple[int, dict]:
        if self.cfg.mode == "fixed":
            return _act(self.strategy(self.belief), rng), {}
        if self.cfg.mode == "myopic":
            diag = {"recovered": False}
            try:
                if self.cfg.informed:
                    self._belief = belief_update_informed(self.spec, self.k, self._belief, feedback)
                else:
                    self._belief = belief_update(self.spec, self.k, self._belief, feedback, self.conj)
            except InconsistentFeedbackError:
                self._belief = np.array(self.spec.initial_belief, dtype=float)
                self.recoveries += 1
                diag["recovered"] = True
            a = myopic_best_response(self.spec, self.k, self.conj, self._belief)
            self.strategy = point_mass_strategy(self.spec.actions[self.k], a)
            return a, diag
        a, self.agent, diag = col_step(self.spec, self.k, self.agent, feedback, rng, self.cfg,
                                       self.node_budget)
        self.strategy = self.agent.current_strategy
        return a, diag


def run_episode(spec: GameSpec, agents: Sequence[AgentConfig], base: Sequence[Strategy], T: int,
                seed: int, builder: Callable | None = None, learner: int = 0,
                node_budget: int = DEFAULT_NODE_BUDGET) -> RunRecord:
    """Simulate ``T`` decision steps from ``b_1``; deterministic given ``seed``.

    ``learner`` is the player whose forecaster is instrumented.  Its KL
    estimates compare each conjecture's likelihood with the likelihood under
    the opponent's actual action distribution.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    env_seq, *agent_seqs = np.random.SeedSequence(seed).spawn(3)
    env_rng = np.random.default_rng(env_seq)
    rngs = [np.random.default_rng(s) for s in agent_seqs]
    players = [_Player(spec, k, agents[k], base, builder, node_budget) for k in (0, 1)]
    opp = GameSpec.opponent(learner)
    watched = players[learner]
    n_conj = len(agents[learner].conjectures) if agents[learner].mode == "col" else 0
    record = KLRecord.empty(max(n_conj, 1))

    cols: dict[str, list] = {k: [] for k in ("t", "state", "a_D", "a_A", "o_D", "cost_D",
                                             "thm1_stat", "belief_entropy")}
    for i in range(n_conj):
        cols[f"mu_{i}"], cols[f"Z_{i}"], cols[f"deltaK_{i}"] = [], [], []
    events: list[dict] = []
    occupancy = OccupancyMeasure()

    state = draw(env_rng, spec.initial_belief)
    obs = (-1, -1)
    prev = None  # (actions, learner belief, opponent action probs, learner strategy)
    disc, total = 1.0, 0.0
    for t in range(1, T + 1):
        diags = [{}, {}]
        if t == 1:
            actions = [players[k].first(rngs[k]) for k in (0, 1)]
        else:
            actions = []
            for k in (0, 1):
                fb = InfoFeedback(prev[0][k], obs[k],
                                  prev_opponent_action=prev[0][1 - k] if agents[k].informed else None,
                                  state=state if agents[k].informed else None)
                a, diags[k] = players[k].next(fb, rngs[k])
                actions.append(a)
            for k in (0, 1):
                if diags[k].get("recovered"):
                    events.append({"t": t, "player": k, "event": "belief-reset"})
                if diags[k].get("violation"):
                    events.append({"t": t, "player": k, "event": "no-conjecture-fits"})

        if n_conj:
            if t > 1 and "likelihoods" in diags[learner]:
                b_prev, opp_probs, own_prev = prev[1:]
                a_own = prev[0][learner]
                own_p = float(own_prev(b_prev)[a_own])
                pred = predict(spec, learner, b_prev, a_own, opp_probs)
                objective = own_p * float(pred @ spec.obs_kernel[learner][:, obs[learner]])
                record = kl_running(record, diags[learner]["likelihoods"], objective)
            mu = watched.agent.posterior.probs
            dk = record.delta_k
            for i in range(n_conj):
                cols[f"mu_{i}"].append(mu[i])
                cols[f"Z_{i}"].append(record.z[i])
                cols[f"deltaK_{i}"].append(dk[i])
            cols["thm1_stat"].append(theorem1_statistic(dk, mu))
        else:
            cols["thm1_stat"].append(0.0)

        cost = float(spec.cost[0][state, actions[0], actions[1]])
        cols["t"].append(t)
        cols["state"].append(state)
        cols["a_D"].append(actions[0])
        cols["a_A"].append(actions[1])
        cols["o_D"].append(obs[0])
        cols["cost_D"].append(cost)
        cols["belief_entropy"].append(entropy(watched.belief))
        occupancy.add(watched.belief, players[opp].belief)
        total += disc * cost
        disc *= spec.discount

        opp_probs = np.asarray(players[opp].strategy(players[opp].belief), dtype=float)
        prev = (tuple(actions), np.array(watched.belief), opp_probs, watched.strategy)
        out = step(spec, state, (actions[0], actions[1]), env_rng)
        state, obs = out.next_state, out.observations

    columns = {k: np.asarray(v) for k, v in cols.items()}
    rec = RunRecord(seed, columns, list(agents[learner].conjectures) if n_conj else [], events,
                    total, occupancy=occupancy)
    if n_conj:
        z_final = np.array([columns[f"Z_{i}"][-1] for i in range(n_conj)])
        best = int(np.argmin(z_final))
        rec.argmin_conjecture = best
        rec.concentration_time = concentration_time(columns[f"mu_{best}"])
    return rec


def concentration_time(mu: np.ndarray, level: float = CONCENTRATION_LEVEL) -> int | None:
    """First step from which ``mu`` stays at or above ``level`` (1-based)."""
    below = np.flatnonzero(mu < level)
    if below.size == 0:
        return 1
    if below[-1] == mu.size - 1:
        return None
    return int(below[-1]) + 2


def moving_average(x: np.ndarray, window: int = 20) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size < window:
        return np.array([x.mean()]) if x.size else x
    c = np.cumsum(np.insert(x, 0, 0.0))
    return (c[window:] - c[:-window]) / window


def summarize(records: Sequence[RunRecord]) -> dict:
    """Per-seed values and pooled means with 95% confidence intervals."""
    per_seed = []
    for r in records:
        c = r.columns
        per_seed.append({
            "seed": r.seed,
            "steps": r.steps,
            "discounted_cost": r.discounted_cost,
            "mean_cost": float(np.mean(c["cost_D"])),
            "final_thm1_stat": float(c["thm1_stat"][-1]),
            "argmin_conjecture": r.argmin_conjecture,
            "concentration_time": r.concentration_time,
            "final_posterior": [float(c[f"mu_{i}"][-1]) for i in range(len(r.conjectures))],
            "events": len(r.events),
            "occupancy_support": len(r.occupancy) if r.occupancy is not None else None,
        })

    def pooled(key):
        vals = [s[key] for s in per_seed if s[key] is not None]
        if not vals:
            return None
        m, lo, hi = mean_ci(vals)
        return {"mean": m, "ci95": [lo, hi], "n": len(vals)}

    return {
        "seeds": per_seed,
        "pooled": {k: pooled(k) for k in ("discounted_cost", "mean_cost", "final_thm1_stat",
                                          "concentration_time")},
    }


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"


def record_csv(record: RunRecord) -> str:
    c = record.columns
    n_conj = len(record.conjectures)
    header = (["t", "state", "a_D", "a_A", "o_D", "cost_D"]
              + [f"mu_{i}" for i in range(n_conj)]
              + [f"Z_{i}" for i in range(n_conj)]
              + [f"deltaK_{i}" for i in range(n_conj)]
              + ["thm1_stat", "belief_entropy"])
    lines = [",".join(header)]
    for j in range(record.steps):
        lines.append(",".join(_fmt(c[h][j]) for h in header))
    return "\n".join(lines) + "\n"
