"""Conjectural online learning for two-player asymmetric-information stochastic games."""

from .belief import InconsistentFeedbackError, belief_update, belief_update_informed
from .consistency import (
    KLRecord,
    OccupancyMeasure,
    Verdict,
    berk_nash_check,
    best_response_enum,
    kl_exact,
    kl_running,
    theorem1_statistic,
)
from .engine import AgentConfig, AgentState, CriticConfig, RunRecord, col_step, run_episode
from .forecaster import (
    AssumptionViolationError,
    ConjectureSet,
    Posterior,
    posterior_update,
    sample_conjecture,
    subjective_likelihood,
)
from .game import GameSpec, InfoFeedback, evaluate_profile, step, validate
from .intrusion import IntrusionConfig, build_game, default_conjecture_set, initial_strategies
from .planner import (
    BeliefStrategy,
    ConstantStrategy,
    ObservationStrategy,
    RolloutBudgetError,
    RolloutStrategy,
    ValueEstimate,
    conjectured_opponent_strategy,
    estimate_value,
    expectimax_oracle,
    myopic_best_response,
    rollout,
)

__version__ = "0.1.0"
