"""Sparse covariate-dependent Ising models.

Simulation, l1-penalized pseudo-likelihood fitting (node-wise with
symmetrization, or joint), support-recovery evaluation, stability selection
and numerical checks of the consistency assumptions.
"""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    Dataset,
    DimensionError,
    ModelDims,
    ThetaParams,
    conditional_prob,
    exact_pmf,
    grad_neg_cond_loglik,
    neg_cond_loglik,
    num_parameters,
    pseudo_neg_loglik,
)
from .simulate import GraphSpec, GroundTruth, SimConfig, gibbs_sample, simulate_dataset  # noqa: E402
from .fit import (  # noqa: E402
    FitConfig,
    FitResult,
    DegenerateResponseError,
    default_lambda_grid,
    fit,
    fit_joint,
    fit_node,
    fit_path,
    fit_separate,
    kkt_residual,
    lambda_max,
    symmetrize,
)
from .evaluate import auc, roc_curve, stability_selection, hub_ranking, rank_edges  # noqa: E402
from .theory import check_assumptions, empirical_info, population_info_mc, theorem_conditions  # noqa: E402

__all__ = [
    "Dataset",
    "DegenerateResponseError",
    "DimensionError",
    "FitConfig",
    "FitResult",
    "GraphSpec",
    "GroundTruth",
    "ModelDims",
    "SimConfig",
    "ThetaParams",
    "auc",
    "check_assumptions",
    "conditional_prob",
    "default_lambda_grid",
    "empirical_info",
    "exact_pmf",
    "fit",
    "fit_joint",
    "fit_node",
    "fit_path",
    "fit_separate",
    "gibbs_sample",
    "grad_neg_cond_loglik",
    "hub_ranking",
    "kkt_residual",
    "lambda_max",
    "neg_cond_loglik",
    "num_parameters",
    "population_info_mc",
    "pseudo_neg_loglik",
    "rank_edges",
    "roc_curve",
    "simulate_dataset",
    "stability_selection",
    "symmetrize",
    "theorem_conditions",
]
