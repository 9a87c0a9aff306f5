"""Simulation study: simulate labeled cohorts, recover classes, score them.

Every (setting, N, replicate) cell gets its own ``SeedSequence`` keyed by the
cell coordinates, so a cell's results do not depend on which other settings,
sizes or methods are in the run.  Results are collected into a tidy table with
one row per (cell, method, class, metric).
"""

from __future__ import annotations

import csv
import logging
import math
import platform
import time
import traceback
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from latentseq import __version__
from latentseq.clustering import kmeans
from latentseq.evaluation import METRICS, EvalReport, evaluate_assignments
from latentseq.exceptions import ValidationError
from latentseq.features import build_feature_matrix
from latentseq.io import read_json, write_json
from latentseq.lca import classify_lca, fit_lca
from latentseq.lta import assign_lta, fit_lta
from latentseq.markov_sim import DiscreteSequence, get_setting, simulate_cohort
from latentseq.pca import fit_pca, project

log = logging.getLogger(__name__)

METHODS = ("pca_kmeans", "lca", "lta")
RESULT_COLUMNS = ("setting", "N", "replicate", "method", "class", "metric", "value", "status")

# Study-wide fitting defaults.  LTA uses a looser tolerance than the
# stand-alone fit: on N=600 cohorts EM lands on the same optimum (to 0.1 in
# log-likelihood) in about a third of the iterations.
DEFAULT_METHOD_OPTIONS: dict[str, dict] = {
    "pca_kmeans": {"components": 2, "scale": True, "restarts": 25, "max_iter": 300},
    "lca": {"restarts": 10, "tol": 1e-6, "max_iter": 1000},
    "lta": {"restarts": 5, "tol": 1e-3, "max_iter": 1000, "start": "ordered", "assign": "profile"},
}


@dataclass
class StudyConfig:
    settings: tuple[int, ...] = (1, 2, 3, 4)
    n_total: tuple[int, ...] = (600, 900, 1200, 1500)
    T: int = 44
    replicates: int = 20
    methods: tuple[str, ...] = METHODS
    seed: int = 0
    out_dir: str | None = None
    init: tuple[float, ...] | None = None
    relabel_method: str = "greedy"
    method_options: dict[str, dict] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.settings = tuple(int(s) for s in self.settings)
        self.n_total = tuple(int(n) for n in self.n_total)
        self.methods = tuple(self.methods)
        if not self.settings or any(s not in (1, 2, 3, 4) for s in self.settings):
            raise ValidationError(f"settings must be a nonempty subset of 1..4, got {self.settings}")
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise ValidationError(f"methods must be a nonempty subset of {METHODS}, got {self.methods}")
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ValidationError("replicates must be at least 1")
        if int(self.T) != self.T or self.T < 2:
            raise ValidationError("T must be an integer of at least 2")
        if not self.n_total or any(n < 3 for n in self.n_total):
            raise ValidationError("every N must allow at least one individual per class")
        unknown = set(self.method_options) - set(METHODS)
        if unknown:
            raise ValidationError(f"options given for unknown methods {sorted(unknown)}")
        if self.relabel_method not in ("greedy", "hungarian"):
            raise ValidationError(f"unknown relabel method {self.relabel_method!r}")

    def options(self, method: str) -> dict:
        return {**DEFAULT_METHOD_OPTIONS[method], **self.method_options.get(method, {})}

    @classmethod
    def from_dict(cls, d: Mapping) -> "StudyConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValidationError(f"unknown study config keys {sorted(extra)}")
        d = dict(d)
        for key in ("settings", "n_total", "methods", "init"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["method_options"] = {m: self.options(m) for m in self.methods}
        return out


def class_sizes(n_total: int, K: int) -> list[int]:
    """Split ``n_total`` as evenly as possible, earlier classes taking the remainder."""
    base, extra = divmod(int(n_total), K)
    return [base + (k < extra) for k in range(K)]


def cell_seeds(seed: int, setting: int, n_total: int, replicate: int) -> dict[str, int]:
    """Integer seeds for the cohort and each method of one study cell."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(setting, n_total, replicate))
    names = ("cohort",) + METHODS
    return {name: int(child.generate_state(1, dtype=np.uint32)[0]) for name, child in zip(names, ss.spawn(len(names)))}


def _run_pca_kmeans(cohort, K, seed, components, scale, restarts, max_iter):
    fm = build_feature_matrix(cohort)
    model = fit_pca(fm, scale=scale)
    scores = project(model, fm, k=min(components, model.rank))
    return kmeans(scores, K=K, restarts=restarts, seed=seed, max_iter=max_iter).assignments


def _run_lca(cohort, K, seed, **opts):
    return classify_lca(fit_lca(cohort, K=K, seed=seed, **opts))


def _run_lta(cohort, K, seed, assign="profile", **opts):
    model = fit_lta(cohort, K=K, seed=seed, **opts)
    return assign_lta(model, cohort, method=assign)


RUNNERS: dict[str, Callable[..., np.ndarray]] = {
    "pca_kmeans": _run_pca_kmeans,
    "lca": _run_lca,
    "lta": _run_lta,
}


def run_method(method: str, cohort: Sequence[DiscreteSequence], K: int, seed: int, options: Mapping) -> np.ndarray:
    """Estimated 1-based class labels from one method."""
    return np.asarray(RUNNERS[method](cohort, K, seed, **options), dtype=np.int64)


def _report_rows(key: tuple, report: EvalReport | None, K: int, status: str) -> list[tuple]:
    rows = []
    for k in range(K):
        for metric in METRICS:
            value = float(report.metric(metric)[k]) if report is not None else math.nan
            rows.append((*key, k + 1, metric, value, status))
    return rows


@dataclass
class StudyResult:
    rows: list[tuple]
    reports: dict[tuple, EvalReport]
    manifest: dict
    paths: dict[str, Path] = field(default_factory=dict)


def run_simulation_study(cfg: StudyConfig) -> StudyResult:
    """Run every (setting, N, replicate, method) cell of the design.

    A method that raises is recorded with ``status="failed: <error>"`` and NaN
    values; the study carries on.  When ``cfg.out_dir`` is set, the tidy table
    (``results.csv``), per-cell reports and a run manifest are written there.
    """
    rows: list[tuple] = []
    reports: dict[tuple, EvalReport] = {}
    runs: list[dict] = []
    started = time.time()
    for setting_id in cfg.settings:
        setting = get_setting(setting_id)
        K = setting.n_classes
        for n_total in cfg.n_total:
            sizes = class_sizes(n_total, K)
            for rep in range(1, cfg.replicates + 1):
                seeds = cell_seeds(cfg.seed, setting_id, n_total, rep)
                cohort = simulate_cohort(setting, sizes, cfg.T, init=cfg.init, seed=seeds["cohort"])
                for method in cfg.methods:
                    key = (setting_id, n_total, rep, method)
                    t0 = time.perf_counter()
                    report, status, detail = None, "ok", None
                    try:
                        Zhat = run_method(method, cohort, K, seeds[method], cfg.options(method))
                        report = evaluate_assignments(cohort, Zhat, setting.matrices, method=cfg.relabel_method)
                    except Exception as exc:  # recorded, never fatal
                        status = f"failed: {type(exc).__name__}"
                        detail = "".join(traceback.format_exception_only(type(exc), exc)).strip()
                        log.warning("setting %s N=%s rep %s %s failed: %s", *key, detail)
                    elapsed = time.perf_counter() - t0
                    rows.extend(_report_rows(key, report, K, status))
                    if report is not None:
                        reports[key] = report
                    runs.append({
                        "setting": setting_id, "N": n_total, "replicate": rep, "method": method,
                        "seed": seeds[method], "cohort_seed": seeds["cohort"], "status": status,
                        "error": detail, "seconds": round(elapsed, 4),
                        "report": report.to_dict() if report is not None else None,
                    })
                    log.info("setting %s N=%s rep %s %-10s %s %.2fs", *key, status, elapsed)

    manifest = {
        "config": cfg.to_dict(),
        "versions": {"latentseq": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "total_seconds": round(time.time() - started, 3),
        "runs": runs,
    }
    result = StudyResult(rows, reports, manifest)
    if cfg.out_dir is not None:
        out = Path(cfg.out_dir)
        result.paths["results"] = write_results_csv(rows, out / "results.csv")
        result.paths["summary"] = write_summary_csv(summarize(rows), out / "summary.csv")
        result.paths["manifest"] = write_json(manifest, out / "manifest.json")
    return result


def write_results_csv(rows: Sequence[tuple], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for s, n, rep, method, k, metric, value, status in rows:
            w.writerow((s, n, rep, method, k, metric, repr(float(value)), status))
    return path


def read_results_csv(path: str | Path) -> list[tuple]:
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULT_COLUMNS:
            raise ValidationError(f"{path}: expected header {','.join(RESULT_COLUMNS)}")
        for r in reader:
            rows.append((
                int(r["setting"]), int(r["N"]), int(r["replicate"]), r["method"],
                int(r["class"]), r["metric"], float(r["value"]), r["status"],
            ))
    return rows


def reports_from_rows(rows: Sequence[tuple], runs: Sequence[Mapping]) -> dict[tuple, EvalReport]:
    """Rebuild EvalReports from the tidy metrics plus the manifest's relabelings and confusions."""
    metrics: dict[tuple, dict[str, dict[int, float]]] = {}
    for s, n, rep, method, k, metric, value, status in rows:
        if status == "ok":
            metrics.setdefault((s, n, rep, method), {}).setdefault(metric, {})[k] = value
    out = {}
    for run in runs:
        key = (run["setting"], run["N"], run["replicate"], run["method"])
        if run["report"] is None or key not in metrics:
            continue
        m = metrics[key]
        K = len(run["report"]["relabeling"])
        arrays = {name: np.array([m[name][k] for k in range(1, K + 1)]) for name in METRICS}
        out[key] = EvalReport(
            relabeling=tuple(run["report"]["relabeling"]),
            confusion=np.array(run["report"]["confusion"], dtype=np.int64),
            **arrays,
        )
    return out


def load_study(out_dir: str | Path) -> dict[tuple, EvalReport]:
    out_dir = Path(out_dir)
    return reports_from_rows(read_results_csv(out_dir / "results.csv"), read_json(out_dir / "manifest.json")["runs"])


def summarize(rows: Sequence[tuple]) -> list[tuple]:
    """Median (NaN-ignoring) and replicate count per (setting, N, method, class, metric)."""
    groups: dict[tuple, list[float]] = {}
    for s, n, rep, method, k, metric, value, status in rows:
        groups.setdefault((s, n, method, k, metric), [])
        if status == "ok" and not math.isnan(value):
            groups[(s, n, method, k, metric)].append(value)
    return [(*key, float(np.median(v)) if v else math.nan, len(v)) for key, v in groups.items()]


def medians(rows: Sequence[tuple]) -> dict[tuple, float]:
    """``{(setting, N, method, class, metric): median}``."""
    return {row[:5]: row[5] for row in summarize(rows)}


def write_summary_csv(summary: Sequence[tuple], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("setting", "N", "method", "class", "metric", "median", "n_replicates"))
        for *key, med, count in summary:
            w.writerow((*key, repr(float(med)), count))
    return path
