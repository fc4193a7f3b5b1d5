"""Distributed logistic regression under per-sample bit budgets.

A simulation lab with four pillars: the logistic data model and its exact
population risks, k-bit per-sample quantizers, exact Fisher information of
quantized messages with its budget bounds, and the numeric side of the
minimax machinery (van Trees bound, scaling laws, strong convexity), plus an
experiment harness that reproduces the d^2/(kn) excess-risk scaling of the
group-partition scheme.
"""

from .model import (
    DistributionSpec,
    LabeledSample,
    Parameter,
    RiskEstimate,
    batch_score,
    excess_logistic_risk,
    log_sigmoid,
    logistic_loss,
    logistic_prob,
    population_logistic_risk,
    population_logistic_risk_mc,
    sample_label,
    sample_x,
    score,
    sigmoid,
)
from .quantize import (
    GroupAssignment,
    Message,
    Quantizer,
    decode_group,
    encode_group,
    group_encoder_quantizer,
    label_only_quantizer,
    make_group_partition,
    stochastic_quantizer_from_table,
    uniform_quantizer,
)
from .fisher import (
    FisherReport,
    estimate_subexponential_param,
    estimate_subgaussian_param,
    lemma_bounds,
    second_moment_bound,
    trace_fisher_message,
    trace_fisher_raw,
)
from .bounds import (
    BoundReport,
    ConvexityReport,
    corollary_bound,
    default_convexity_params,
    make_bound_report,
    min_eigenvalue,
    population_hessian,
    strong_convexity_check,
    theorem_scalings,
    van_trees_bound,
)
from .estimator import (
    SGDConfig,
    distributed_estimate,
    sample_class_conditional,
    class_conditional_x_marginal,
    sgd_logistic,
    verify_class_conditional_construction,
)
from .rng import derive_rng, derive_seed_sequence

__version__ = "0.1.0"
