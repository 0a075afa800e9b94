"""MCP-penalized GLM bandits with 2-step weighted Lasso estimation."""
__version__ = "0.1.0"

from .glm import (
    Dataset,
    GlmFamily,
    LinearGaussian,
    LogisticBinary,
    Observation,
    curvature_bound,
    expected_reward,
    neg_log_density,
    nll,
    nll_gradient,
    sample_reward,
)
from .penalty import PenaltyParams, mcp_derivative, mcp_penalty, soft_threshold
from .solver import (
    Fit,
    SolverOptions,
    kkt_residual,
    lasso_fit,
    mcp_weights,
    oracle_fit,
    two_step_weighted_lasso,
    weighted_lasso_fit,
)
from .bandit import (
    ArmState,
    Decision,
    GmcpBandit,
    GmcpConfig,
    LassoBandit,
    OlsBandit,
    Oful,
    OraclePolicy,
    RandomPolicy,
    epsilon_decay_draw,
    lambda1_schedule,
    lambda2_schedule,
)
from .environments import (
    EndOfStream,
    ReplayEnv,
    ReplayFormatError,
    SyntheticEnv,
    load_replay,
    make_study1,
    make_study2,
)
from .harness import AggregateResult, ExperimentSpec, RegretTrace, emit_results, run_experiment, run_trial
from .kernels import BACKEND
