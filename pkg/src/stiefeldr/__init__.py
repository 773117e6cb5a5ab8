"""Optimization under orthonormality constraints and semiparametric dimension reduction."""

from .benchmark import brockett, pca_problem, run_benchmark
from .exceptions import (
    DataValidationError,
    DimensionError,
    MissingArgumentError,
    NonFiniteObjectiveError,
    ObjectiveError,
    ParseError,
    RankDeficiencyError,
    StiefelError,
)
from .kernels import silverman_bw
from .manifold import distance, gram_schmidt, random_stiefel
from .regression import RegressionDR, psi_phd, psi_sir
from .simulate import gen_regression_sim, gen_survival_sim
from .solver import FitResult, ObjectiveSpec, SolverControl, numeric_gradient, ortho_optim
from .survival import SurvivalDR, psi_dm, surv_objective

__all__ = [
    "DataValidationError",
    "DimensionError",
    "FitResult",
    "MissingArgumentError",
    "NonFiniteObjectiveError",
    "ObjectiveError",
    "ObjectiveSpec",
    "ParseError",
    "RankDeficiencyError",
    "RegressionDR",
    "SolverControl",
    "StiefelError",
    "SurvivalDR",
    "brockett",
    "distance",
    "gen_regression_sim",
    "gen_survival_sim",
    "gram_schmidt",
    "numeric_gradient",
    "ortho_optim",
    "pca_problem",
    "psi_dm",
    "psi_phd",
    "psi_sir",
    "random_stiefel",
    "run_benchmark",
    "silverman_bw",
    "surv_objective",
]

__version__ = "0.1.0"
