"""Conversational dueling bandits in generalized linear models, with a
multinomial-logit assortment extension and a regret benchmark harness."""

from .dueling import (
    DUEL_KINDS,
    DuelConfig,
    DuelPolicy,
    RconucbPolicy,
    RoundRecord,
    build_candidate_set,
    make_duel_policy,
    select_arm_pair,
    select_keyterm_pair,
)
from .env import (
    Environment,
    EnvironmentSet,
    Schedule,
    SimulatedUser,
    SyntheticConfig,
    conversations_this_round,
    dueling_regret,
    gen_synthetic,
    mnl_regret,
    sample_choice_feedback,
    sample_duel_feedback,
)
from .errors import (
    ConduelError,
    ConfigError,
    DataFormatError,
    DomainError,
    NumericalError,
    StructuralError,
)
from .estimator import (
    ARM_LEVEL,
    KEYTERM_LEVEL,
    InteractionHistory,
    ThetaEstimate,
    dueling_radius,
    log_likelihood,
    mean_map,
    mle_fit,
    project_theta,
    score,
)
from .glm import (
    DesignMatrix,
    LinkFunction,
    WeightGraph,
    design_update,
    duel_prob,
    get_link,
    keyterm_feature,
    link_deriv,
    link_eval,
    mahalanobis,
)
from .harness import ALL_KINDS, RegretTrace, run_experiment
from .mnl import (
    MNL_KINDS,
    ChoiceHistory,
    MnlConfig,
    MnlPolicy,
    expected_revenue,
    mnl_log_likelihood,
    mnl_mle_fit,
    mnl_probs,
    mnl_radius,
    mnl_score,
    optimal_assortment,
    ucb_utilities,
)
from .spanner import Spanner, build_spanner, spanner_coefficients, spanner_lambda_b

__version__ = "0.1.0"
