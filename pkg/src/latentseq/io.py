"""CSV and JSON readers and writers for cohorts, features and fitted models.

Floats are written with ``repr`` so values survive a round trip exactly, and
JSON keys are sorted so that equal inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
from collections import OrderedDict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from latentseq.exceptions import ValidationError
from latentseq.features import MATRIX_COLUMNS, FeatureMatrix
from latentseq.markov_sim import DiscreteSequence

COHORT_HEADER = ("id", "t", "state", "true_class")
FEATURE_HEADER = ("id",) + MATRIX_COLUMNS + ("n_obs",)


def _open_out(path: str | Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path.open("w", newline="", encoding="utf-8")


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _plain(obj):
    """Convert numpy containers and scalars to JSON-serializable Python objects."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    return obj


def write_json(obj, path: str | Path) -> Path:
    with _open_out(path) as fh:
        json.dump(_plain(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return Path(path)


def read_json(path: str | Path):
    with Path(path).open(encoding="utf-8") as fh:
        return json.load(fh)


def write_cohort_csv(cohort: Sequence[DiscreteSequence], path: str | Path) -> Path:
    """Long format, one row per (individual, time); ``true_class`` empty when unknown."""
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COHORT_HEADER)
        for seq in cohort:
            label = "" if seq.true_class is None else str(seq.true_class)
            for t, s in zip(seq.times, seq.states):
                w.writerow((seq.id, int(t), int(s), label))
    return Path(path)


def read_cohort_csv(path: str | Path) -> list[DiscreteSequence]:
    """Inverse of :func:`write_cohort_csv`; rows of one id must be consecutive and time-ordered."""
    groups: OrderedDict[str, list[tuple[int, int, str]]] = OrderedDict()
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(COHORT_HEADER[:3]) - set(reader.fieldnames or ())
        if missing:
            raise ValidationError(f"{path}: missing columns {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            try:
                t, s = int(row["t"]), int(row["state"])
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"{path}:{line}: bad t/state ({exc})") from None
            groups.setdefault(row["id"], []).append((t, s, (row.get("true_class") or "").strip()))
    cohort = []
    for ident, rows in groups.items():
        times = np.array([r[0] for r in rows])
        if np.any(np.diff(times) != 1):
            raise ValidationError(f"{path}: times of id {ident!r} are not consecutive")
        labels = {r[2] for r in rows}
        if len(labels) != 1:
            raise ValidationError(f"{path}: id {ident!r} has conflicting true_class values")
        label = labels.pop()
        cohort.append(
            DiscreteSequence(
                id=ident,
                states=np.array([r[1] for r in rows]),
                true_class=int(label) if label else None,
                t0=int(times[0]),
            )
        )
    return cohort


def write_features_csv(fm: FeatureMatrix, path: str | Path) -> Path:
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FEATURE_HEADER)
        for ident, row, n in zip(fm.ids, fm.values, fm.n_obs):
            w.writerow((ident, *(_num(v) for v in row), int(n)))
    return Path(path)


def read_features_csv(path: str | Path) -> FeatureMatrix:
    ids, values, n_obs = [], [], []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != FEATURE_HEADER:
            raise ValidationError(f"{path}: expected header {','.join(FEATURE_HEADER)}")
        for row in reader:
            ids.append(row["id"])
            values.append([float(row[c]) for c in MATRIX_COLUMNS])
            n_obs.append(int(row["n_obs"]))
    return FeatureMatrix(tuple(ids), np.array(values).reshape(len(ids), len(MATRIX_COLUMNS)), np.array(n_obs))


def write_table_csv(header: Sequence[str], rows: Iterable[Sequence], path: str | Path) -> Path:
    """Generic writer; numeric cells go through ``repr`` for exact round trips."""
    with _open_out(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) if isinstance(v, (int, float, np.number)) and not isinstance(v, bool) else v for v in row])
    return Path(path)


def write_matrix_csv(ids: Sequence[str], matrix: np.ndarray, prefix: str, path: str | Path) -> Path:
    """``id,<prefix>1..<prefix>k`` rows, e.g. PCA scores or fuzzy memberships."""
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    header = ["id"] + [f"{prefix}{j + 1}" for j in range(M.shape[1])]
    return write_table_csv(header, ([i, *row] for i, row in zip(ids, M)), path)


def read_matrix_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    ids = [r[0] for r in rows]
    return ids, np.array([[float(v) for v in r[1:]] for r in rows]).reshape(len(rows), len(header) - 1)


def write_labels_csv(ids: Sequence[str], labels, path: str | Path, column: str = "cluster") -> Path:
    return write_table_csv(("id", column), zip(ids, (int(z) for z in labels)), path)


def read_labels_csv(path: str | Path) -> dict[str, int]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        return {r[0]: int(r[1]) for r in reader}
