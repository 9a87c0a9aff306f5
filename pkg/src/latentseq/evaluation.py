"""Class-recovery evaluation for simulated cohorts.

Estimated clusters carry arbitrary labels.  Each cluster's embedded jump chain
is estimated from its members' sequences and matched to the generating class
matrices by Frobenius distance, greedily: the globally closest (estimated,
true) pair is fixed first, then the closest among the remaining rows and
columns, and so on.  One-vs-rest precision, recall, accuracy and size ratio
are then computed per true class.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from latentseq.exceptions import DegenerateInputError, ValidationError
from latentseq.markov_sim import DiscreteSequence, JumpMatrix

METRICS = ("precision", "recall", "accuracy", "size_ratio")


@dataclass(frozen=True, eq=False)
class TransitionEstimate:
    """Estimated jump matrix plus the (1-based) states that were never left."""

    matrix: JumpMatrix
    counts: np.ndarray
    flagged_rows: tuple[int, ...] = ()

    @property
    def probs(self) -> np.ndarray:
        return self.matrix.probs


def _uniform_offdiag(C: int) -> np.ndarray:
    return (np.ones((C, C)) - np.eye(C)) / (C - 1)


def transition_counts(sequences: Sequence[DiscreteSequence | np.ndarray], n_states: int) -> np.ndarray:
    counts = np.zeros((n_states, n_states))
    for seq in sequences:
        x = seq.states if isinstance(seq, DiscreteSequence) else np.asarray(seq, dtype=np.int64)
        if x.size and (x.min() < 1 or x.max() > n_states):
            raise ValidationError(f"states must lie in 1..{n_states}")
        src, dst = x[:-1], x[1:]
        moved = src != dst
        np.add.at(counts, (src[moved] - 1, dst[moved] - 1), 1.0)
    return counts


def estimate_transition_matrix(
    sequences: Sequence[DiscreteSequence | np.ndarray],
    n_states: int | None = None,
    allow_degenerate: bool = False,
) -> TransitionEstimate:
    """Maximum-likelihood embedded jump chain from pooled sequences.

    Only consecutive pairs with a change of state are counted; repeats come
    from the discretization, not from jumps.  Rows with no departures fall
    back to uniform off-diagonal and are reported in ``flagged_rows``.

    With ``allow_degenerate=True`` a pool without any state change yields the
    all-uniform fallback instead of raising.
    """
    if n_states is None:
        tops = [int(np.max(s.states if isinstance(s, DiscreteSequence) else s)) for s in sequences if len(s)]
        if not tops:
            raise DegenerateInputError("no observations to estimate transitions from")
        n_states = max(max(tops), 2)
    counts = transition_counts(sequences, n_states)
    totals = counts.sum(axis=1)
    if totals.sum() == 0 and not allow_degenerate:
        raise DegenerateInputError("no state changes in the pooled sequences")
    empty = totals == 0
    probs = np.where(empty[:, None], _uniform_offdiag(n_states), counts / np.where(empty, 1.0, totals)[:, None])
    flagged = tuple(int(c) + 1 for c in np.flatnonzero(empty))
    return TransitionEstimate(JumpMatrix(probs), counts, flagged)


def _probs(A) -> np.ndarray:
    if isinstance(A, TransitionEstimate):
        return A.probs
    if isinstance(A, JumpMatrix):
        return A.probs
    return np.asarray(A, dtype=float)


def frobenius(A, B) -> float:
    a, b = _probs(A), _probs(B)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(((a - b) ** 2).sum()))


def distance_matrix(estimated: Sequence, truth: Sequence) -> np.ndarray:
    """``F[l, j]`` = Frobenius distance from estimated class ``l`` to true class ``j``."""
    return np.array([[frobenius(e, t) for t in truth] for e in estimated])


def greedy_assign(F: np.ndarray) -> np.ndarray:
    """Repeatedly fix the smallest remaining entry; ``tau[l] = j`` (0-based).

    Ties go to the lower row, then the lower column.
    """
    F = np.array(F, dtype=float)
    K = F.shape[0]
    if F.shape != (K, K):
        raise ValidationError("distance matrix must be square")
    tau = np.full(K, -1, dtype=np.int64)
    work = F.copy()
    for _ in range(K):
        flat = int(np.argmin(work))  # row-major: lowest row, then lowest column
        l, j = divmod(flat, K)
        tau[l] = j
        work[l, :] = np.inf
        work[:, j] = np.inf
    return tau


def relabel(estimated: Sequence, truth: Sequence, method: str = "greedy") -> np.ndarray:
    """Map each estimated class to a true class; returns 1-based ``tau`` with ``tau[l-1] = j``.

    ``method="hungarian"`` minimizes the total distance instead of greedy
    matching; it is provided for comparison only.
    """
    if len(estimated) != len(truth):
        raise ValidationError("estimated and true class counts differ")
    F = distance_matrix(estimated, truth)
    if method == "greedy":
        tau = greedy_assign(F)
    elif method == "hungarian":
        rows, cols = linear_sum_assignment(F)
        tau = np.empty(len(rows), dtype=np.int64)
        tau[rows] = cols
    else:
        raise ValidationError(f"unknown relabeling method {method!r}")
    return tau + 1


@dataclass(frozen=True, eq=False)
class EvalReport:
    """Per-true-class metrics after relabeling.

    ``confusion[j, l]`` counts individuals of true class ``j + 1`` placed in
    relabeled class ``l + 1``.
    """

    relabeling: tuple[int, ...]
    precision: np.ndarray
    recall: np.ndarray
    accuracy: np.ndarray
    size_ratio: np.ndarray
    confusion: np.ndarray

    @property
    def n_classes(self) -> int:
        return len(self.relabeling)

    def metric(self, name: str) -> np.ndarray:
        if name not in METRICS:
            raise KeyError(name)
        return getattr(self, name)

    def to_dict(self) -> dict:
        return {
            "relabeling": list(self.relabeling),
            "per_class": [
                {"class": k + 1, **{m: float(self.metric(m)[k]) for m in METRICS}}
                for k in range(self.n_classes)
            ],
            "confusion": self.confusion.astype(int).tolist(),
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EvalReport):
            return NotImplemented
        same = self.relabeling == other.relabeling and np.array_equal(self.confusion, other.confusion)
        return same and all(np.array_equal(self.metric(m), other.metric(m), equal_nan=True) for m in METRICS)

    __hash__ = None  # type: ignore[assignment]


def _ratio(num: np.ndarray, den: np.ndarray, empty: float) -> np.ndarray:
    out = np.full(num.shape, empty, dtype=float)
    np.divide(num, den, out=out, where=den > 0)
    return out


def classification_report(Z, Zhat, tau: Sequence[int] | None = None, K: int | None = None) -> EvalReport:
    """One-vs-rest metrics; ``tau`` (1-based) is applied to ``Zhat`` first.

    Precision of a class nobody was assigned to is reported as 0.
    """
    Z = np.asarray(Z, dtype=np.int64)
    Zhat = np.asarray(Zhat, dtype=np.int64)
    if Z.shape != Zhat.shape or Z.ndim != 1:
        raise ValidationError("true and estimated labels must be 1-d and equally long")
    if tau is None:
        K = int(K or max(Z.max(initial=1), Zhat.max(initial=1)))
        tau = np.arange(1, K + 1)
    tau = np.asarray(tau, dtype=np.int64)
    K = int(K or tau.size)
    if tau.size != K or sorted(tau.tolist()) != list(range(1, K + 1)):
        raise ValidationError(f"relabeling must be a permutation of 1..{K}")
    for name, arr in (("true", Z), ("estimated", Zhat)):
        if arr.size and (arr.min() < 1 or arr.max() > K):
            raise ValidationError(f"{name} labels must lie in 1..{K}")

    mapped = tau[Zhat - 1]
    confusion = np.zeros((K, K), dtype=np.int64)
    np.add.at(confusion, (Z - 1, mapped - 1), 1)
    n = Z.size
    tp = np.diag(confusion).astype(float)
    n_true = confusion.sum(axis=1).astype(float)
    n_est = confusion.sum(axis=0).astype(float)
    fp = n_est - tp
    fn = n_true - tp
    tn = n - tp - fp - fn
    return EvalReport(
        relabeling=tuple(int(t) for t in tau),
        precision=_ratio(tp, tp + fp, 0.0),
        recall=_ratio(tp, tp + fn, np.nan),
        accuracy=(tp + tn) / n if n else np.full(K, np.nan),
        size_ratio=_ratio(n_est, n_true, np.nan),
        confusion=confusion,
    )


def cluster_transition_matrices(
    cohort: Sequence[DiscreteSequence], Zhat, K: int, n_states: int
) -> list[TransitionEstimate]:
    """Jump-chain estimate for each estimated cluster; empty clusters get the uniform fallback."""
    Zhat = np.asarray(Zhat, dtype=np.int64)
    return [
        estimate_transition_matrix([s for s, z in zip(cohort, Zhat) if z == k], n_states, allow_degenerate=True)
        for k in range(1, K + 1)
    ]


def evaluate_assignments(
    cohort: Sequence[DiscreteSequence],
    Zhat,
    truth: Sequence[JumpMatrix],
    method: str = "greedy",
) -> EvalReport:
    """Relabel estimated clusters against the generating matrices and score them."""
    K = len(truth)
    Z = np.array([s.true_class for s in cohort], dtype=np.int64)
    estimates = cluster_transition_matrices(cohort, Zhat, K, truth[0].size)
    tau = relabel(estimates, truth, method=method)
    return classification_report(Z, Zhat, tau, K)
