"""Real-data pipeline: features, PCA scores, clustering and cluster profiles.

Cluster labels are reported in ascending order of the cluster's average
``mean_state`` so that cluster 1 is the lowest-level group.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from latentseq.clustering import HardClustering, SoftClustering, fuzzy_cmeans, harden, kmeans, silhouette
from latentseq.exceptions import ValidationError
from latentseq.features import FeatureMatrix, build_feature_matrix
from latentseq.markov_sim import DiscreteSequence
from latentseq.pca import PcaModel, fit_pca, project

# column order of the cluster-profile table; n_obs is the mean sequence length
PROFILE_COLUMNS = (
    "cluster", "sd_state", "mean_state", "mean_lag", "sd_lag", "p_lag_zero",
    "n_obs", "mode_state", "p_mode", "n_k",
)


@dataclass
class AnalysisResult:
    ids: tuple[str, ...]
    assignments: np.ndarray
    profile: list[tuple]
    features: FeatureMatrix
    pca: PcaModel
    scores: np.ndarray
    hard: HardClustering
    soft: SoftClustering | None = None
    memberships: np.ndarray | None = None
    silhouettes: list[tuple[int, float, float]] = field(default_factory=list)


def _order_by_level(levels: np.ndarray) -> np.ndarray:
    """``new_label[old - 1]`` (0-based) so cluster levels ascend; stable on ties."""
    order = np.argsort(levels, kind="stable")
    new = np.empty(levels.size, dtype=np.int64)
    new[order] = np.arange(levels.size)
    return new


def characterize_clusters(fm: FeatureMatrix, assignments, K: int) -> list[tuple]:
    """One row per cluster: cluster id, mean of each statistic, mean ``n_obs`` and size."""
    Z = np.asarray(assignments, dtype=np.int64)
    rows = []
    for k in range(1, K + 1):
        members = Z == k
        n_k = int(members.sum())
        means = []
        for name in PROFILE_COLUMNS[1:-1]:
            col = fm.n_obs if name == "n_obs" else fm.column(name)
            means.append(float(col[members].mean()) if n_k else float("nan"))
        rows.append((k, *means, n_k))
    return rows


def silhouette_table(
    scores: np.ndarray,
    ks: Sequence[int] = (2, 3, 4),
    restarts: int = 25,
    seed: int | None = 0,
    fuzzifier: float = 2.0,
) -> list[tuple[int, float, float]]:
    """``(K, mean SI of K-means, mean SI of hardened fuzzy C-means)`` per candidate K."""
    out = []
    for K in ks:
        if K < 2:
            raise ValidationError("silhouette scores need K of at least 2")
        hard = kmeans(scores, K=K, restarts=restarts, seed=seed).assignments
        soft = harden(fuzzy_cmeans(scores, K=K, m=fuzzifier, seed=seed))
        # a hardened fuzzy partition can leave a cluster empty; score what remains
        fuzzy_si = silhouette(scores, soft)[1] if np.unique(soft).size > 1 else float("nan")
        out.append((int(K), silhouette(scores, hard)[1], fuzzy_si))
    return out


def run_analysis(
    cohort: Sequence[DiscreteSequence],
    K: int = 3,
    components: int = 2,
    scale: bool = True,
    restarts: int = 25,
    seed: int | None = 0,
    fuzzy: bool = False,
    fuzzifier: float = 2.0,
    silhouette_ks: Sequence[int] = (),
) -> AnalysisResult:
    """Cluster a cohort on its first ``components`` PCA scores and profile the clusters."""
    if len(cohort) == 0:
        raise ValidationError("cannot analyze an empty cohort")
    if int(K) != K or K < 2:
        raise ValidationError(f"K must be at least 2 (silhouettes are undefined for one cluster), got {K}")
    fm = build_feature_matrix(cohort)
    model = fit_pca(fm, scale=scale)
    scores = project(model, fm, k=components)
    hard = kmeans(scores, K=K, restarts=restarts, seed=seed)

    level = fm.column("mean_state")
    cluster_level = np.array([level[hard.assignments == k].mean() for k in range(1, K + 1)])
    relabel = _order_by_level(cluster_level)
    Z = relabel[hard.assignments - 1] + 1

    result = AnalysisResult(
        ids=fm.ids,
        assignments=Z,
        profile=characterize_clusters(fm, Z, K),
        features=fm,
        pca=model,
        scores=scores,
        hard=hard,
    )
    if fuzzy:
        soft = fuzzy_cmeans(scores, K=K, m=fuzzifier, seed=seed)
        weights = soft.membership
        soft_level = (weights * level[:, None]).sum(axis=0) / weights.sum(axis=0)
        order = np.argsort(soft_level, kind="stable")
        result.soft = soft
        result.memberships = weights[:, order]
    if silhouette_ks:
        result.silhouettes = silhouette_table(scores, silhouette_ks, restarts=restarts, seed=seed, fuzzifier=fuzzifier)
    return result
