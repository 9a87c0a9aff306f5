"""Latent transition analysis: a categorical hidden Markov model.

Each individual's latent state follows a first-order Markov chain on ``1..K``
with time-homogeneous categorical emissions over ``1..C``.  Parameters are
pooled over individuals and fitted by Baum-Welch with scaled forward-backward
recursions; sequences may have different lengths.

Individuals are hardened into classes by comparing their empirical state
profile with each latent state's emission distribution (smallest Euclidean
distance wins).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from latentseq.exceptions import ValidationError
from latentseq.markov_sim import DiscreteSequence

SMOOTHING = 1e-6


@dataclass(frozen=True, eq=False)
class LtaModel:
    initial: np.ndarray
    transitions: np.ndarray
    emissions: np.ndarray
    loglik: float
    n_iter: int
    converged: bool
    loglik_history: tuple[float, ...] = field(default=(), repr=False)
    restart_histories: tuple[tuple[float, ...], ...] = field(default=(), repr=False)

    @property
    def n_classes(self) -> int:
        return self.initial.size

    @property
    def n_states(self) -> int:
        return self.emissions.shape[1]

    def to_dict(self) -> dict:
        return {
            "initial": self.initial.tolist(),
            "transitions": self.transitions.tolist(),
            "emissions": self.emissions.tolist(),
            "loglik": self.loglik,
            "n_iter": self.n_iter,
            "converged": self.converged,
        }


class _Padded:
    """Ragged cohort as a time-major, zero-padded T_max x N array of 0-based states."""

    def __init__(self, cohort, n_states: int | None):
        seqs = [s.states if isinstance(s, DiscreteSequence) else np.asarray(s, dtype=np.int64) for s in cohort]
        if not seqs:
            raise ValidationError("empty cohort")
        self.lengths = np.array([s.size for s in seqs])
        if self.lengths.min() < 1:
            raise ValidationError("sequences must be nonempty")
        top = max(int(s.max()) for s in seqs)
        low = min(int(s.min()) for s in seqs)
        self.C = int(n_states or top)
        if low < 1 or top > self.C:
            raise ValidationError(f"states must lie in 1..{self.C}")
        self.N = len(seqs)
        self.T = int(self.lengths.max())
        self.obs = np.zeros((self.T, self.N), dtype=np.int64)
        for i, s in enumerate(seqs):
            self.obs[: s.size, i] = s - 1
        self.active = np.arange(self.T)[:, None] < self.lengths[None, :]
        self.ragged = bool(self.lengths.min() != self.T)
        self.flat_obs = self.obs[self.active]
        self.obs_by_row = np.ascontiguousarray(self.obs.T)

    def marginal(self) -> np.ndarray:
        return np.bincount(self.flat_obs, minlength=self.C) / self.flat_obs.size


def _forward_backward(data: _Padded, init, A, B):
    """Scaled recursions; returns posteriors (T x N x K), summed transition counts and log-likelihood."""
    T, N, K = data.T, data.N, init.size
    Bx = B.T[data.obs]  # (T, N, K): emission probability of the observed state
    alpha = np.empty((T, N, K))
    scale = np.ones((T, N))

    a = init * Bx[0]
    scale[0] = a.sum(axis=1)
    alpha[0] = a / scale[0][:, None]
    for t in range(1, T):
        a = (alpha[t - 1] @ A) * Bx[t]
        s = a.sum(axis=1)
        if data.ragged:
            act = data.active[t]
            s = np.where(act, s, 1.0)
            alpha[t] = np.where(act[:, None], a / s[:, None], alpha[t - 1])
        else:
            alpha[t] = a / s[:, None]
        scale[t] = s

    beta = np.ones((T, N, K))
    xi = np.zeros((K, K))
    for t in range(T - 2, -1, -1):
        w = Bx[t + 1] * beta[t + 1] / scale[t + 1][:, None]
        if data.ragged:
            act = data.active[t + 1]
            beta[t] = np.where(act[:, None], w @ A.T, 1.0)
            xi += alpha[t][act].T @ w[act]
        else:
            beta[t] = w @ A.T
            xi += alpha[t].T @ w
    xi *= A

    gamma = alpha * beta
    gamma /= gamma.sum(axis=2, keepdims=True)
    loglik = float(np.log(scale).sum())
    return gamma, xi, loglik


@numba.njit(cache=True)
def _suff_stats(obs, lengths, init, A, B):  # pragma: no cover - compiled
    """Expected sufficient statistics, one individual at a time in input order."""
    N, T = obs.shape
    K = init.size
    C = B.shape[1]
    first = np.zeros(K)
    xi = np.zeros((K, K))
    emis = np.zeros((K, C))
    alpha = np.empty((T, K))
    scale = np.empty(T)
    beta = np.empty(K)
    nxt = np.empty(K)
    w = np.empty(K)
    loglik = 0.0
    for i in range(N):
        n = lengths[i]
        s = 0.0
        for k in range(K):
            alpha[0, k] = init[k] * B[k, obs[i, 0]]
            s += alpha[0, k]
        scale[0] = s
        inv = 1.0 / s
        for k in range(K):
            alpha[0, k] *= inv
        for t in range(1, n):
            s = 0.0
            x = obs[i, t]
            for j in range(K):
                acc = 0.0
                for k in range(K):
                    acc += alpha[t - 1, k] * A[k, j]
                acc *= B[j, x]
                alpha[t, j] = acc
                s += acc
            scale[t] = s
            inv = 1.0 / s
            for j in range(K):
                alpha[t, j] *= inv
        prod = 1.0
        for t in range(n):
            prod *= scale[t]
            if t % 16 == 15:
                loglik += np.log(prod)
                prod = 1.0
        loglik += np.log(prod)

        for k in range(K):
            beta[k] = 1.0
        for t in range(n - 1, -1, -1):
            if t < n - 1:
                x = obs[i, t + 1]
                for j in range(K):
                    w[j] = B[j, x] * beta[j] / scale[t + 1]
                for k in range(K):
                    acc = 0.0
                    for j in range(K):
                        xi[k, j] += alpha[t, k] * A[k, j] * w[j]
                        acc += A[k, j] * w[j]
                    nxt[k] = acc
                for k in range(K):
                    beta[k] = nxt[k]
            g = 0.0
            for k in range(K):
                g += alpha[t, k] * beta[k]
            x = obs[i, t]
            for k in range(K):
                gk = alpha[t, k] * beta[k] / g
                emis[k, x] += gk
                if t == 0:
                    first[k] += gk
    return loglik, first, xi, emis


def _normalize_rows(M: np.ndarray) -> np.ndarray:
    return M / M.sum(axis=-1, keepdims=True)


def _m_step(first, xi, emis, eps):
    return _normalize_rows(first), _normalize_rows(xi + eps), _normalize_rows(emis + eps)


def ordered_start(marginal: np.ndarray, K: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic starting values for ordinal states.

    Uniform initial law, transitions ``(1 + 9 I)`` row-normalized, and emission
    rows obtained by shifting the pooled global (cumulative) logits by an
    evenly spaced grid on ``[-K, K]``, so latent state 1 favors low levels and
    state ``K`` high ones.
    """
    C = marginal.size
    p = np.clip(marginal, 1e-8, None)
    p = p / p.sum()
    upper = np.clip(1.0 - np.cumsum(p)[:-1], 1e-12, 1 - 1e-12)  # P(X > c) for c = 1..C-1
    logits = np.log(upper) - np.log1p(-upper)
    grid = np.linspace(-K, K, K) if K > 1 else np.zeros(1)
    B = np.empty((K, C))
    for k, shift in enumerate(grid):
        surv = 1.0 / (1.0 + np.exp(-(logits + shift)))
        cdf = np.r_[0.0, 1.0 - surv, 1.0]
        B[k] = np.diff(cdf)
    B = _normalize_rows(np.clip(B, 1e-12, None))
    A = _normalize_rows(np.ones((K, K)) + 9.0 * np.eye(K))
    return np.full(K, 1.0 / K), A, B


def _run_em(data, init, A, B, tol, max_iter, eps):
    history = []
    converged = False
    for it in range(max_iter):
        ll, first, xi, emis = _suff_stats(data.obs_by_row, data.lengths, init, A, B)
        history.append(ll)
        if len(history) > 1 and history[-1] - history[-2] < tol:
            converged = True
            break
        if it == max_iter - 1:
            break
        init, A, B = _m_step(first, xi, emis, eps)
    return init, A, B, history, converged


def fit_lta(
    cohort: Sequence[DiscreteSequence],
    K: int = 3,
    restarts: int = 10,
    tol: float = 1e-6,
    max_iter: int = 1000,
    seed: int | None = 0,
    n_states: int | None = None,
    smoothing: float = SMOOTHING,
    start: str = "ordered",
) -> LtaModel:
    """Fit the hidden Markov model by Baum-Welch, best of ``restarts`` starts.

    With ``start="ordered"`` the first start is :func:`ordered_start`; all
    other starts (every start with ``start="random"``) draw the initial law,
    each transition row and each emission row from Dirichlet(1).  ``loglik`` is
    the log-likelihood of the returned parameters.
    """
    if start not in ("ordered", "random"):
        raise ValidationError(f"unknown start {start!r}")
    if int(K) != K or K < 1:
        raise ValidationError("K must be a positive integer")
    if restarts < 1 or max_iter < 1:
        raise ValidationError("restarts and max_iter must be at least 1")
    data = _Padded(cohort, n_states)
    best = None
    histories = []
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(restarts)):
        if r == 0 and start == "ordered":
            init, A, B = ordered_start(data.marginal(), K)
        else:
            rng = np.random.default_rng(child)
            init = rng.dirichlet(np.ones(K))
            A = rng.dirichlet(np.ones(K), size=K)
            B = rng.dirichlet(np.ones(data.C), size=K)
        run = _run_em(data, init, A, B, tol, max_iter, smoothing)
        histories.append(tuple(run[3]))
        if best is None or run[3][-1] > best[3][-1]:
            best = run
    init, A, B, history, converged = best
    return LtaModel(
        initial=init,
        transitions=A,
        emissions=B,
        loglik=history[-1],
        n_iter=len(history),
        converged=converged,
        loglik_history=tuple(history),
        restart_histories=tuple(histories),
    )


def state_posteriors(model: LtaModel, cohort: Sequence[DiscreteSequence]) -> list[np.ndarray]:
    """Per-individual ``T_i x K`` posterior state probabilities."""
    data = _Padded(cohort, model.n_states)
    gamma, _, _ = _forward_backward(data, model.initial, model.transitions, model.emissions)
    return [gamma[:n, i] for i, n in enumerate(data.lengths)]


def lta_loglik(model: LtaModel, cohort: Sequence[DiscreteSequence]) -> float:
    data = _Padded(cohort, model.n_states)
    return _forward_backward(data, model.initial, model.transitions, model.emissions)[2]


def viterbi(model: LtaModel, seq: DiscreteSequence | np.ndarray) -> np.ndarray:
    """Most probable latent state path (1-based)."""
    x = (seq.states if isinstance(seq, DiscreteSequence) else np.asarray(seq)) - 1
    with np.errstate(divide="ignore"):
        logA = np.log(model.transitions)
        logB = np.log(model.emissions)
        delta = np.log(model.initial) + logB[:, x[0]]
    back = np.zeros((x.size, model.n_classes), dtype=np.int64)
    for t in range(1, x.size):
        cand = delta[:, None] + logA
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(model.n_classes)] + logB[:, x[t]]
    path = np.empty(x.size, dtype=np.int64)
    path[-1] = int(np.argmax(delta))
    for t in range(x.size - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path + 1


def empirical_profile(seq: DiscreteSequence | Sequence[int] | np.ndarray, n_states: int = 5) -> np.ndarray:
    """Fraction of the individual's observations at each state ``1..n_states``."""
    x = seq.states if isinstance(seq, DiscreteSequence) else np.asarray(seq, dtype=np.int64)
    if x.size == 0:
        raise ValidationError("empty sequence")
    if x.min() < 1 or x.max() > n_states:
        raise ValidationError(f"states must lie in 1..{n_states}")
    return np.bincount(x - 1, minlength=n_states) / x.size


def profile_distances(emissions: np.ndarray, profiles) -> np.ndarray:
    """Euclidean distance between every profile and every emission row, N x K."""
    E = np.asarray(emissions, dtype=float)
    H = np.atleast_2d(np.asarray(profiles, dtype=float))
    if H.shape[1] != E.shape[1]:
        raise ValidationError("profiles and emissions must cover the same states")
    return np.sqrt(((H[:, None, :] - E[None, :, :]) ** 2).sum(axis=2))


def assign_by_profile(emissions: np.ndarray, profiles) -> np.ndarray:
    """Class with the nearest emission row for each profile (1-based; ties to the lower class)."""
    return np.argmin(profile_distances(emissions, profiles), axis=1) + 1


def assign_lta(
    model: LtaModel, cohort: Sequence[DiscreteSequence], method: str = "profile"
) -> np.ndarray:
    """Hard classes for a cohort.

    ``method="profile"`` matches empirical profiles to emission rows.
    ``method="viterbi"`` takes each individual's most frequent decoded state; it
    is offered for sensitivity checks only.
    """
    if method == "profile":
        profiles = np.stack([empirical_profile(s, model.n_states) for s in cohort])
        return assign_by_profile(model.emissions, profiles)
    if method == "viterbi":
        out = []
        for s in cohort:
            path = viterbi(model, s)
            out.append(int(np.argmax(np.bincount(path, minlength=model.n_classes + 1)[1:])) + 1)
        return np.array(out, dtype=np.int64)
    raise ValidationError(f"unknown LTA assignment method {method!r}")
