"""Multitask kernel ridge regression with nonlinear output constraints."""

from .constraints import ConstraintSpec, candidates, distance_to_set, gamma_residual, project, project_weighted
from .estimator import (
    LossSpec,
    MultitaskData,
    NlMtlModel,
    ViolationParams,
    fit,
    predict,
    predict_many,
    predict_perturbed,
    predict_robust,
    predict_vvr,
    q_constant,
    self_norm_sq,
)
from .harness import (
    CvConfig,
    ExperimentConfig,
    explained_variance,
    gen_synthetic,
    holdout_cv,
    mse,
    rate_sweep,
    run_experiment,
    stl_baseline,
)
from .kernels import KernelSpec, cross_gram, gram, kernel_eval
from .ranking import (
    PairIndex,
    RankingModel,
    Tournament,
    decode,
    fas_order,
    fit_ranking,
    loss_pairwise,
    loss_weighted,
    pair_costs,
)
from .scores import ScoreModel, TaskData, alpha_at, fit_scores, lambda_preset, square_stats

__version__ = "0.1.0"
