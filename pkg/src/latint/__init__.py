"""Linear predictors with pairwise interactions whose coefficient matrix is
regularized toward a low-dimensional latent structure."""

from .core import (Dataset, InteractionScheme, ModelParams,
                   expand_interactions, flatten_theta, interaction_matrix,
                   linear_score, reconstruct_theta, unflatten_theta)
from .metrics import (EvalReport, auc, brier_curve, c_index,
                      default_time_grid, integrated_brier,
                      pca_embed_baseline, rmse)
from .penalties import (PenaltyConfig, elastic_net_value_grad, lvm_grads,
                        lvm_value, soft_threshold)
from .predictors import (BaselineHazard, breslow_baseline,
                         cox_neg_log_partial_likelihood_grad,
                         logistic_loss_grad, mse_loss_grad, predict,
                         survival_curves)
from .simgen import GroundTruth, SimConfig, gen_linear, gen_logistic, sparsify
from .trainer import (FitConfig, FitReport, OptimizerConfig, fit, fit_fm,
                      fm_score_grad_z, init_params, total_loss)
from .tuner import GridSpec, grid_search, kfold, lambda_l_sweep, split

__version__ = "0.1.0"

__all__ = [
    "Dataset", "InteractionScheme", "ModelParams", "expand_interactions",
    "flatten_theta", "interaction_matrix", "linear_score",
    "reconstruct_theta", "unflatten_theta",
    "PenaltyConfig", "elastic_net_value_grad", "soft_threshold", "lvm_value",
    "lvm_grads",
    "BaselineHazard", "breslow_baseline",
    "cox_neg_log_partial_likelihood_grad", "logistic_loss_grad",
    "mse_loss_grad", "predict", "survival_curves",
    "FitConfig", "FitReport", "OptimizerConfig", "fit", "fit_fm",
    "fm_score_grad_z", "init_params", "total_loss",
    "SimConfig", "GroundTruth", "gen_linear", "gen_logistic", "sparsify",
    "EvalReport", "rmse", "auc", "c_index", "brier_curve",
    "integrated_brier", "default_time_grid", "pca_embed_baseline",
    "GridSpec", "split", "kfold", "grid_search", "lambda_l_sweep",
]
