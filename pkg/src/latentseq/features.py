"""Per-individual sequence summaries used as clustering inputs.

Seven statistics per sequence: mean and SD of the states, mean and SD of the
lags ``X_t - X_{t-1}``, the share of zero lags (temporal stability), the modal
state and the share of observations at the mode.  Standard deviations use the
``n - 1`` denominator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from latentseq.exceptions import InsufficientDataError, ValidationError
from latentseq.markov_sim import DiscreteSequence

STAT_COLUMNS = ("mean_state", "sd_state", "mean_lag", "sd_lag", "p_lag_zero", "mode_state", "p_mode")
MATRIX_COLUMNS = ("const",) + STAT_COLUMNS


@dataclass(frozen=True)
class FeatureRow:
    id: str
    mean_state: float
    sd_state: float
    mean_lag: float
    sd_lag: float
    p_lag_zero: float
    mode_state: int
    p_mode: float
    n_obs: int

    def values(self) -> tuple[float, ...]:
        return tuple(float(getattr(self, name)) for name in STAT_COLUMNS)


def _states(seq: DiscreteSequence | Sequence[int] | np.ndarray) -> np.ndarray:
    if isinstance(seq, DiscreteSequence):
        return seq.states
    return np.asarray(seq, dtype=np.int64)


def _seq_id(seq) -> str:
    return seq.id if isinstance(seq, DiscreteSequence) else "?"


def lags(seq: DiscreteSequence | Sequence[int] | np.ndarray) -> np.ndarray:
    """Differences between consecutive states, length ``len(seq) - 1``."""
    x = _states(seq)
    if x.size < 2:
        raise InsufficientDataError(f"sequence {_seq_id(seq)!r} needs at least 2 observations for lags")
    return np.diff(x)


def _sample_sd(x: np.ndarray) -> float:
    # a single value has no spread; report 0 rather than NaN
    if x.size < 2:
        return 0.0
    return float(np.std(x, ddof=1))


def summarize_sequence(seq: DiscreteSequence | Sequence[int] | np.ndarray) -> FeatureRow:
    """Compute the seven summary statistics of one sequence.

    Mode ties go to the smallest state.  ``p_lag_zero`` divides by the number of
    lags, ``len(seq) - 1``.

    Examples
    --------
    >>> row = summarize_sequence([1, 1, 1, 2, 2, 2, 3, 3, 3])
    >>> row.mean_lag, row.p_lag_zero, row.mode_state
    (0.25, 0.75, 1)
    """
    x = _states(seq)
    lag = lags(seq)
    values, counts = np.unique(x, return_counts=True)
    # np.unique sorts values, so argmax picks the smallest state among ties
    top = int(np.argmax(counts))
    return FeatureRow(
        id=_seq_id(seq),
        mean_state=float(np.mean(x)),
        sd_state=_sample_sd(x),
        mean_lag=float(np.mean(lag)),
        sd_lag=_sample_sd(lag),
        p_lag_zero=float(np.count_nonzero(lag == 0) / lag.size),
        mode_state=int(values[top]),
        p_mode=float(counts[top] / x.size),
        n_obs=int(x.size),
    )


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Stacked summaries: ``values`` is N x 8 with a leading column of ones."""

    ids: tuple[str, ...]
    values: np.ndarray
    n_obs: np.ndarray

    columns = MATRIX_COLUMNS

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(MATRIX_COLUMNS):
            raise ValidationError(f"feature matrix must have {len(MATRIX_COLUMNS)} columns")
        if values.shape[0] != len(self.ids) or len(self.n_obs) != len(self.ids):
            raise ValidationError("ids, values and n_obs must have matching lengths")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "n_obs", np.asarray(self.n_obs, dtype=np.int64))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def statistics(self) -> np.ndarray:
        """The seven statistic columns without the constant."""
        return self.values[:, 1:]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, MATRIX_COLUMNS.index(name)]

    @property
    def rows(self) -> list[FeatureRow]:
        out = []
        for i, ident in enumerate(self.ids):
            v = self.values[i]
            out.append(
                FeatureRow(ident, v[1], v[2], v[3], v[4], v[5], int(v[6]), v[7], int(self.n_obs[i]))
            )
        return out

    @classmethod
    def from_rows(cls, rows: Sequence[FeatureRow]) -> "FeatureMatrix":
        values = np.array([(1.0,) + r.values() for r in rows], dtype=float).reshape(len(rows), len(MATRIX_COLUMNS))
        return cls(tuple(r.id for r in rows), values, np.array([r.n_obs for r in rows], dtype=np.int64))


def build_feature_matrix(cohort: Sequence[DiscreteSequence]) -> FeatureMatrix:
    if len(cohort) == 0:
        raise ValidationError("cannot build a feature matrix from an empty cohort")
    short = [seq.id for seq in cohort if len(seq) < 2]
    if short:
        raise InsufficientDataError(f"sequences with fewer than 2 observations: {', '.join(short[:10])}")
    return FeatureMatrix.from_rows([summarize_sequence(seq) for seq in cohort])
