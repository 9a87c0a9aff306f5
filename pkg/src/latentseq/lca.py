"""Latent class analysis with one categorical item per time point.

Mixture of ``K`` classes; given class ``k`` the states ``X_i1..X_iT`` are
independent with ``P(X_it = c) = item_probs[t, k, c]``.  Fitted by EM with a
small additive smoothing of the item probabilities, best of several random
starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from latentseq.exceptions import ValidationError
from latentseq.markov_sim import DiscreteSequence

SMOOTHING = 1e-6


@dataclass(frozen=True, eq=False)
class LcaModel:
    priors: np.ndarray
    item_probs: np.ndarray
    posterior: np.ndarray
    loglik: float
    n_iter: int
    converged: bool
    loglik_history: tuple[float, ...] = field(default=(), repr=False)
    restart_histories: tuple[tuple[float, ...], ...] = field(default=(), repr=False)

    @property
    def n_classes(self) -> int:
        return self.priors.size

    @property
    def n_states(self) -> int:
        return self.item_probs.shape[2]

    def to_dict(self) -> dict:
        return {
            "priors": self.priors.tolist(),
            "item_probs": self.item_probs.tolist(),
            "loglik": self.loglik,
            "n_iter": self.n_iter,
            "converged": self.converged,
        }


def to_wide(cohort: Sequence[DiscreteSequence] | np.ndarray) -> np.ndarray:
    """N x T matrix of 1-based states; every sequence must have the same length."""
    if isinstance(cohort, np.ndarray):
        X = cohort.astype(np.int64)
        if X.ndim != 2:
            raise ValidationError("wide input must be an N x T matrix")
        return X
    if len(cohort) == 0:
        raise ValidationError("empty cohort")
    lengths = {len(seq) for seq in cohort}
    if len(lengths) != 1:
        raise ValidationError(
            f"LCA needs equal-length sequences (one item per time point); got lengths {sorted(lengths)[:5]}..."
        )
    return np.stack([seq.states for seq in cohort]).astype(np.int64)


def _sorted_logsumexp(a: np.ndarray) -> np.ndarray:
    # sorting each row first makes the result independent of the class order
    a = np.sort(a, axis=1)
    top = a[:, -1:]
    with np.errstate(invalid="ignore"):
        shifted = np.exp(a - top)
    shifted[~np.isfinite(top[:, 0])] = 0.0
    out = top[:, 0] + np.log(shifted.sum(axis=1))
    return np.where(np.isfinite(top[:, 0]), out, -np.inf)


def _class_loglik(X0: np.ndarray, log_items: np.ndarray) -> np.ndarray:
    """Sum over t of log item_probs[t, k, X_it]; shape (N, K)."""
    T = X0.shape[1]
    return log_items[np.arange(T)[None, :], :, X0].sum(axis=1)


def _e_step(X0, log_priors, log_items):
    joint = log_priors[None, :] + _class_loglik(X0, log_items)
    norm = _sorted_logsumexp(joint)
    return np.exp(joint - norm[:, None]), float(norm.sum())


def _m_step(onehot: np.ndarray, R: np.ndarray, eps: float):
    priors = R.mean(axis=0)
    counts = np.einsum("ik,itc->tkc", R, onehot)
    C = onehot.shape[2]
    items = (counts + eps) / (counts.sum(axis=2, keepdims=True) + C * eps)
    return priors, items


def _logs(priors, items):
    with np.errstate(divide="ignore"):
        return np.log(priors), np.log(items)


def _run_em(X0, onehot, R, tol, max_iter, eps):
    history = []
    converged = False
    for _ in range(max_iter):
        priors, items = _m_step(onehot, R, eps)
        R, ll = _e_step(X0, *_logs(priors, items))
        history.append(ll)
        if len(history) > 1 and history[-1] - history[-2] < tol:
            converged = True
            break
    return priors, items, R, history, converged


def fit_lca(
    X: Sequence[DiscreteSequence] | np.ndarray,
    K: int = 3,
    restarts: int = 10,
    tol: float = 1e-6,
    max_iter: int = 1000,
    seed: int | None = 0,
    n_states: int | None = None,
    smoothing: float = SMOOTHING,
) -> LcaModel:
    """Fit LCA by EM; each restart starts from Dirichlet(1) posterior draws.

    The returned model is the restart with the highest final log-likelihood;
    ``restart_histories`` keeps every restart's per-iteration log-likelihood.
    """
    W = to_wide(X)
    if W.size == 0:
        raise ValidationError("empty input")
    C = int(n_states or W.max())
    if W.min() < 1 or W.max() > C:
        raise ValidationError(f"states must lie in 1..{C}")
    if int(K) != K or K < 1:
        raise ValidationError("K must be a positive integer")
    if restarts < 1 or max_iter < 1:
        raise ValidationError("restarts and max_iter must be at least 1")
    X0 = W - 1
    onehot = np.eye(C)[X0]
    N = W.shape[0]

    best = None
    histories = []
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.default_rng(child)
        R0 = rng.dirichlet(np.ones(K), size=N)
        run = _run_em(X0, onehot, R0, tol, max_iter, smoothing)
        histories.append(tuple(run[3]))
        if best is None or run[3][-1] > best[3][-1]:
            best = run
    priors, items, R, history, converged = best
    return LcaModel(
        priors=priors,
        item_probs=items,
        posterior=R,
        loglik=history[-1],
        n_iter=len(history),
        converged=converged,
        loglik_history=tuple(history),
        restart_histories=tuple(histories),
    )


def lca_loglik(model: LcaModel, X: Sequence[DiscreteSequence] | np.ndarray) -> float:
    X0 = to_wide(X) - 1
    return _e_step(X0, *_logs(model.priors, model.item_probs))[1]


def permute_classes(model: LcaModel, perm: Sequence[int]) -> LcaModel:
    """Model with class ``j`` of the result equal to class ``perm[j]`` (0-based) of ``model``."""
    perm = np.asarray(perm)
    return replace(
        model,
        priors=model.priors[perm],
        item_probs=model.item_probs[:, perm, :],
        posterior=model.posterior[:, perm],
    )


def classify_lca(model: LcaModel | np.ndarray) -> np.ndarray:
    """MAP class per individual (1-based); ties go to the lower class."""
    post = model.posterior if isinstance(model, LcaModel) else np.asarray(model, dtype=float)
    return np.argmax(post, axis=1) + 1
