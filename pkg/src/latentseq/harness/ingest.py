"""Ingest raw EMA check-ins into ordinal sequences.

Input is a CSV with columns ``id,timestamp,state``.  Timestamps are either
ISO-8601 date-times or plain numbers of days; a file must use one kind
throughout.  Per individual the rows are sorted by time, the series is cut at
the first gap longer than ``gap_threshold_days`` (the pre-gap prefix is kept),
observations are re-indexed ``t = 1..T_i`` and individuals with fewer than
``min_obs`` remaining observations are dropped.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from latentseq.exceptions import ValidationError
from latentseq.io import write_table_csv
from latentseq.markov_sim import DiscreteSequence

log = logging.getLogger(__name__)

GAP_MODES = ("truncate", "drop_observation")
REQUIRED_COLUMNS = ("id", "timestamp", "state")


@dataclass
class IngestConfig:
    """Ingestion rules.

    ``gap_mode="drop_observation"`` is an alternative reading of the gap rule:
    only the observation that follows an oversized gap is removed and the rest
    of the series is kept.
    """

    path: str | Path
    gap_threshold_days: float = 7.0
    min_obs: int = 25
    n_states: int = 5
    gap_mode: str = "truncate"
    rejects_path: str | Path | None = None

    def __post_init__(self) -> None:
        if not self.gap_threshold_days > 0:
            raise ValidationError("gap_threshold_days must be positive")
        if int(self.min_obs) != self.min_obs or self.min_obs < 1:
            raise ValidationError("min_obs must be a positive integer")
        if self.n_states < 2:
            raise ValidationError("n_states must be at least 2")
        if self.gap_mode not in GAP_MODES:
            raise ValidationError(f"gap_mode must be one of {GAP_MODES}, got {self.gap_mode!r}")


@dataclass
class FilterReport:
    """Counts behind the cohort; ``individuals == kept + dropped_min_obs + empty_after_gap``."""

    rows_read: int = 0
    rows_rejected: int = 0
    individuals: int = 0
    gap_affected: int = 0
    observations_removed_by_gap: int = 0
    dropped_min_obs: int = 0
    empty_after_gap: int = 0
    kept: int = 0
    dropped_ids: list[str] = field(default_factory=list)

    def reconciles(self) -> bool:
        return self.individuals == self.kept + self.dropped_min_obs + self.empty_after_gap

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class IngestResult:
    cohort: list[DiscreteSequence]
    report: FilterReport
    rejects: list[tuple[int, str, str]]


def _parse_time(raw: str) -> tuple[str, float]:
    """``(kind, days)`` where kind is ``"numeric"`` or ``"iso"``."""
    text = raw.strip()
    try:
        return "numeric", float(text)
    except ValueError:
        pass
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    stamp = datetime.fromisoformat(text)  # ValueError propagates to the caller
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return "iso", stamp.timestamp() / 86400.0


def _parse_state(raw: str, n_states: int) -> int:
    text = raw.strip()
    if not text.lstrip("-").isdigit():
        raise ValueError(f"state {raw!r} is not an integer")
    state = int(text)
    if not 1 <= state <= n_states:
        raise ValueError(f"state {state} outside 1..{n_states}")
    return state


def _apply_gap_rule(days: np.ndarray, threshold: float, mode: str) -> np.ndarray:
    """Boolean mask of observations kept by the gap rule (``days`` sorted)."""
    gaps = np.diff(days)
    big = np.flatnonzero(gaps > threshold)
    keep = np.ones(days.size, dtype=bool)
    if big.size == 0:
        return keep
    if mode == "truncate":
        keep[big[0] + 1:] = False
    else:
        keep[big + 1] = False
    return keep


def ingest_ema_csv(cfg: IngestConfig) -> IngestResult:
    """Read, clean and re-index an EMA export.

    Unparseable rows (bad timestamp, state outside ``1..n_states``, blank id,
    timestamp kind differing from the file's) are skipped and returned as
    ``(line, reason, raw)``; they are also written to ``cfg.rejects_path`` when
    given.  An empty file yields an empty cohort and a warning.
    """
    path = Path(cfg.path)
    report = FilterReport()
    rejects: list[tuple[int, str, str]] = []
    records: dict[str, list[tuple[float, int, int]]] = {}
    kind_seen: str | None = None

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            warnings.warn(f"{path} is empty; returning an empty cohort", stacklevel=2)
            return IngestResult([], report, rejects)
        header = [h.strip().lower() for h in header]
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ValidationError(f"{path}: missing columns {missing}")
        col = {c: header.index(c) for c in REQUIRED_COLUMNS}
        for line, row in enumerate(reader, start=2):
            if not any(cell.strip() for cell in row):
                continue
            report.rows_read += 1
            raw = ",".join(row)
            try:
                if len(row) < len(header):
                    raise ValueError("too few fields")
                ident = row[col["id"]].strip()
                if not ident:
                    raise ValueError("blank id")
                kind, days = _parse_time(row[col["timestamp"]])
                if kind_seen is None:
                    kind_seen = kind
                elif kind != kind_seen:
                    raise ValueError(f"{kind} timestamp in a file of {kind_seen} timestamps")
                state = _parse_state(row[col["state"]], cfg.n_states)
            except ValueError as exc:
                rejects.append((line, str(exc), raw))
                continue
            records.setdefault(ident, []).append((days, line, state))

    report.rows_rejected = len(rejects)
    if report.rows_read == 0:
        warnings.warn(f"{path} has no data rows; returning an empty cohort", stacklevel=2)

    cohort = []
    for ident, obs in records.items():
        report.individuals += 1
        obs.sort()  # by time, then by file line
        days = np.array([o[0] for o in obs])
        states = np.array([o[2] for o in obs], dtype=np.int64)
        keep = _apply_gap_rule(days, cfg.gap_threshold_days, cfg.gap_mode)
        removed = int((~keep).sum())
        if removed:
            report.gap_affected += 1
            report.observations_removed_by_gap += removed
        states = states[keep]
        if states.size == 0:
            report.empty_after_gap += 1
            report.dropped_ids.append(ident)
        elif states.size < cfg.min_obs:
            report.dropped_min_obs += 1
            report.dropped_ids.append(ident)
        else:
            report.kept += 1
            cohort.append(DiscreteSequence(id=ident, states=states, true_class=None, t0=1))

    if cfg.rejects_path is not None:
        write_table_csv(("line", "reason", "raw"), rejects, cfg.rejects_path)
    log.info(
        "ingested %d individuals: %d kept, %d below %d observations, %d rows rejected",
        report.individuals, report.kept, report.dropped_min_obs, cfg.min_obs, report.rows_rejected,
    )
    return IngestResult(cohort, report, rejects)
