"""Principal components of the feature matrix.

Eigendecomposition of the covariance (or, with ``scale=True``, correlation)
matrix of the non-constant columns.  The constant leading column of the
feature matrix has zero variance and is dropped before decomposition.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from latentseq.exceptions import DegenerateInputError, ValidationError
from latentseq.features import MATRIX_COLUMNS, FeatureMatrix

log = logging.getLogger(__name__)

# eigenvalues below this fraction of the largest are treated as exact zeros
RANK_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Fitted PCA.

    Attributes
    ----------
    columns : tuple of str
        Names of the input columns kept for the decomposition.
    keep : ndarray of int
        Their positions in the input matrix.
    center, scale : ndarray
        Per-column shift and divisor applied before projection.
    loadings : ndarray, shape (p, p)
        Orthonormal, one component per column, ordered by decreasing variance.
    eigenvalues : ndarray, shape (p,)
        Component variances; numerically null ones are exactly 0.
    scores : ndarray, shape (N, p)
        Training data in component coordinates.
    """

    columns: tuple[str, ...]
    keep: np.ndarray
    center: np.ndarray
    scale: np.ndarray
    loadings: np.ndarray
    eigenvalues: np.ndarray
    scores: np.ndarray
    n_input: int
    ids: tuple[str, ...] = ()

    @property
    def variance_explained(self) -> np.ndarray:
        return self.eigenvalues / self.eigenvalues.sum()

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.eigenvalues))

    @property
    def n_components(self) -> int:
        return self.loadings.shape[1]

    def to_dict(self) -> dict:
        frac, cum = scree(self)
        return {
            "columns": list(self.columns),
            "center": self.center.tolist(),
            "scale": self.scale.tolist(),
            "loadings": self.loadings.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "variance_explained": frac.tolist(),
            "cumulative_variance": cum.tolist(),
        }


def _as_matrix(X: FeatureMatrix | np.ndarray) -> tuple[np.ndarray, tuple[str, ...], tuple[str, ...]]:
    if isinstance(X, FeatureMatrix):
        return X.values, MATRIX_COLUMNS, X.ids
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise ValidationError("PCA input must be a 2-d matrix")
    return arr, tuple(f"x{j + 1}" for j in range(arr.shape[1])), ()


def fit_pca(X: FeatureMatrix | np.ndarray, center: bool = True, scale: bool = True) -> PcaModel:
    """Fit PCA; component signs make each loading's largest-magnitude entry positive.

    ``center=False`` decomposes the raw cross-product matrix instead; with
    ``scale=True`` each column is divided by its root-mean-square after the
    optional centering (the ``prcomp`` convention).
    """
    data, names, ids = _as_matrix(X)
    n = data.shape[0]
    if n < 2:
        raise ValidationError("PCA needs at least 2 rows")
    if not np.all(np.isfinite(data)):
        raise ValidationError("PCA input contains non-finite values")
    varying = np.ptp(data, axis=0) > 0
    if not varying.any():
        raise DegenerateInputError("every column is constant")
    if not varying.all():
        dropped = [names[j] for j in np.flatnonzero(~varying)]
        log.info("dropping constant columns before PCA: %s", ", ".join(dropped))
    keep = np.flatnonzero(varying)
    Y = data[:, keep]

    shift = Y.mean(axis=0) if center else np.zeros(keep.size)
    Y = Y - shift
    if scale:
        divisor = np.sqrt((Y**2).sum(axis=0) / (n - 1))
    else:
        divisor = np.ones(keep.size)
    Y = Y / divisor

    cov = Y.T @ Y / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals, kind="stable")[::-1]
    evals, evecs = evals[order], evecs[:, order]
    evals = np.where(evals > RANK_RTOL * max(evals[0], 0.0), evals, 0.0)
    if evals[0] <= 0:
        raise DegenerateInputError("input has no variance after preprocessing")

    lead = np.argmax(np.abs(evecs), axis=0)
    signs = np.sign(evecs[lead, np.arange(evecs.shape[1])])
    signs[signs == 0] = 1.0
    evecs = evecs * signs

    return PcaModel(
        columns=tuple(names[j] for j in keep),
        keep=keep,
        center=shift,
        scale=divisor,
        loadings=evecs,
        eigenvalues=evals,
        scores=Y @ evecs,
        n_input=data.shape[1],
        ids=ids,
    )


def scree(model: PcaModel) -> tuple[np.ndarray, np.ndarray]:
    """Variance fractions per component and their cumulative sums."""
    frac = model.variance_explained
    return frac, np.cumsum(frac)


def _prepare(model: PcaModel, X: FeatureMatrix | np.ndarray) -> np.ndarray:
    data, _, _ = _as_matrix(X)
    if data.shape[1] != model.n_input:
        raise ValidationError(f"expected {model.n_input} input columns, got {data.shape[1]}")
    return (data[:, model.keep] - model.center) / model.scale


def project(model: PcaModel, X: FeatureMatrix | np.ndarray, k: int = 2) -> np.ndarray:
    """Scores of ``X`` on the first ``k`` components (N x k)."""
    if not 1 <= k <= model.rank:
        raise ValidationError(f"k must be between 1 and the model rank {model.rank}, got {k}")
    return _prepare(model, X) @ model.loadings[:, :k]


def reconstruct(model: PcaModel, scores: np.ndarray) -> np.ndarray:
    """Map component scores back to the retained input columns."""
    k = scores.shape[1]
    return scores @ model.loadings[:, :k].T * model.scale + model.center
