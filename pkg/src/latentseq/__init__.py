"""Latent-group discovery for longitudinal ordinal (EMA-style) sequences.

Simulate class-labeled trajectories from Markov jump processes, summarize each
sequence with lag-based statistics, cluster with PCA + K-means, fit LCA and LTA
baselines, and score recovered classes after transition-matrix relabeling.
"""

from latentseq.exceptions import DegenerateInputError, InsufficientDataError, ValidationError
from latentseq.markov_sim import (
    SETTINGS,
    ContinuousTrajectory,
    DiscreteSequence,
    JumpMatrix,
    SimulationSetting,
    discretize_locf,
    get_setting,
    simulate_cohort,
    simulate_trajectory,
)
from latentseq.features import FeatureMatrix, FeatureRow, build_feature_matrix, lags, summarize_sequence
from latentseq.pca import PcaModel, fit_pca, project, scree
from latentseq.clustering import HardClustering, SoftClustering, fuzzy_cmeans, harden, kmeans, silhouette
from latentseq.lca import LcaModel, classify_lca, fit_lca
from latentseq.lta import LtaModel, assign_by_profile, empirical_profile, fit_lta
from latentseq.evaluation import (
    EvalReport,
    classification_report,
    estimate_transition_matrix,
    frobenius,
    relabel,
)

__version__ = "0.1.0"

__all__ = [
    "ContinuousTrajectory",
    "DegenerateInputError",
    "DiscreteSequence",
    "EvalReport",
    "FeatureMatrix",
    "FeatureRow",
    "HardClustering",
    "InsufficientDataError",
    "JumpMatrix",
    "LcaModel",
    "LtaModel",
    "PcaModel",
    "SETTINGS",
    "SimulationSetting",
    "SoftClustering",
    "ValidationError",
    "assign_by_profile",
    "build_feature_matrix",
    "classification_report",
    "classify_lca",
    "discretize_locf",
    "empirical_profile",
    "estimate_transition_matrix",
    "fit_lca",
    "fit_lta",
    "fit_pca",
    "frobenius",
    "fuzzy_cmeans",
    "get_setting",
    "harden",
    "kmeans",
    "lags",
    "project",
    "relabel",
    "scree",
    "silhouette",
    "simulate_cohort",
    "simulate_trajectory",
    "summarize_sequence",
]
