"""Poisson canonical polyadic (CP) tensor models: EM fitting, Fisher information
and identifiability diagnostics."""

from .tensor_core import (
    hadamard,
    hdivide,
    hpower,
    khatri_rao,
    matricize,
    matricize_pair,
    tvc_all_but_one,
    tvc_all_but_two,
    unmatricize,
    unvec,
    vec,
)
from .kruskal import (
    KruskalModel,
    column_weights,
    full_tensor,
    model_from_json,
    model_to_json,
    normalize,
    pack,
    unpack,
)
from .likelihood import (
    batch_scores,
    cond_expectation,
    loglik,
    q_gradient,
    q_hessian,
    q_value,
    score,
)
from .em import FitConfig, FitError, FitTrace, cm_step, fit, mcecm_update, random_init
from .fisher import (
    FimTooLarge,
    FisherMatrix,
    RankVerdict,
    conjectured_rank,
    d_block,
    f_block,
    fim,
    nullity_conjecture,
    numerical_rank,
)
from .rank_one import (
    IdentifiabilityReport,
    RankOneModel,
    identifiability,
    mle_rank1,
    rank1_fim,
    rank1_gradient,
    rank1_hessian,
    rank1_loglik,
    rescale_fim,
)
from .harness import GenSpec, McFimEstimate, generate_model, mc_fim, sample_poisson
