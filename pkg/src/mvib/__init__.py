"""Multivariate information bottleneck on dense discrete distributions."""

__version__ = "0.1.0"

from .core_prob import (
    ConditionalTable,
    JointTable,
    Variable,
    condition,
    conditional_mutual_information,
    entropy,
    kl_divergence,
    marginalize,
    multi_information,
    mutual_information,
)
from .graph import (
    DagStructure,
    divergence_from_network,
    edgeless_over,
    is_consistent,
    kl_projection,
    network_information,
    topological_order,
)
from .problem import (
    MibProblem,
    SolverState,
    build_joint,
    preset_original_ib,
    preset_parallel,
    preset_symmetric,
    random_state,
    validate,
)
from .solver import (
    SolverConfig,
    auxiliary_f,
    beta_from_gamma,
    distortion,
    gamma_from_beta,
    info_gradient_check,
    iterate,
    lagrangian_l1,
    lagrangian_l2,
    update_step,
)
from .anneal import AnnealConfig, BifurcationTree, InfoCurvePoint, anneal, info_curve_point
from .data import (
    CooccurrenceInput,
    filter_top_k,
    generate_factorized,
    generate_planted,
    load_cooccurrence,
    rank_informative,
)
