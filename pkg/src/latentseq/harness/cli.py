"""Command-line entry point.

Every subcommand accepts ``--seed``, ``--out`` (output directory) and
``--config`` (a JSON object whose keys set that subcommand's option defaults;
explicit flags still win).  Example::

    latentseq simulate --setting 1 --n-per-class 200 --T 44 --seed 7 --out run1
    latentseq analyze --cohort run1/cohort.csv --k 3 --silhouette --out run1
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from latentseq.clustering import fuzzy_cmeans, kmeans, silhouette
from latentseq.evaluation import evaluate_assignments
from latentseq.exceptions import ValidationError
from latentseq.features import build_feature_matrix
from latentseq.harness.analysis import PROFILE_COLUMNS, run_analysis
from latentseq.harness.ingest import GAP_MODES, IngestConfig, ingest_ema_csv
from latentseq.harness.study import METHODS, StudyConfig, run_simulation_study
from latentseq.io import (
    read_cohort_csv,
    read_features_csv,
    read_json,
    read_labels_csv,
    read_matrix_csv,
    write_cohort_csv,
    write_features_csv,
    write_json,
    write_labels_csv,
    write_matrix_csv,
    write_table_csv,
)
from latentseq.lca import classify_lca, fit_lca
from latentseq.lta import assign_lta, empirical_profile, fit_lta, profile_distances
from latentseq.markov_sim import get_setting, simulate_cohort
from latentseq.pca import fit_pca, project

log = logging.getLogger("latentseq")


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _cmd_simulate(args) -> None:
    setting = get_setting(args.setting)
    sizes = args.n_per_class if len(args.n_per_class) > 1 else args.n_per_class * setting.n_classes
    cohort = simulate_cohort(setting, sizes, args.T, init=args.init, seed=args.seed, sojourn=args.sojourn)
    out = Path(args.out)
    write_cohort_csv(cohort, out / "cohort.csv")
    write_json(
        {"setting": setting.name, "seed": args.seed, "T": args.T, "class_sizes": list(sizes),
         "init": args.init, "sojourn": args.sojourn, "sojourn_rate": setting.sojourn_rate},
        out / "cohort_manifest.json",
    )
    print(f"wrote {len(cohort)} sequences to {out / 'cohort.csv'}")


def _cmd_features(args) -> None:
    fm = build_feature_matrix(read_cohort_csv(args.cohort))
    path = write_features_csv(fm, Path(args.out) / "features.csv")
    print(f"wrote {fm.shape[0]} x {fm.shape[1]} feature matrix to {path}")


def _load_features(args):
    if args.features:
        return read_features_csv(args.features)
    if args.cohort:
        return build_feature_matrix(read_cohort_csv(args.cohort))
    raise ValidationError("give --features or --cohort")


def _cmd_pca(args) -> None:
    fm = _load_features(args)
    model = fit_pca(fm, scale=not args.no_scale)
    out = Path(args.out)
    write_json(model.to_dict(), out / "pca.json")
    write_matrix_csv(fm.ids, project(model, fm, k=min(args.components, model.rank)), "pc", out / "scores.csv")
    cum = np.cumsum(model.variance_explained)
    print("cumulative variance: " + " ".join(f"{c:.3f}" for c in cum))


def _cmd_cluster(args) -> None:
    if args.scores:
        ids, points = read_matrix_csv(args.scores)
    else:
        fm = _load_features(args)
        model = fit_pca(fm, scale=not args.no_scale)
        ids, points = list(fm.ids), project(model, fm, k=min(args.components, model.rank))
    out = Path(args.out)
    hard = kmeans(points, K=args.k, restarts=args.restarts, seed=args.seed)
    write_labels_csv(ids, hard.assignments, out / "clusters.csv")
    summary = {"k": args.k, "centroids": hard.centroids, "inertia": hard.inertia, "sizes": hard.sizes}
    if args.k >= 2:
        summary["mean_silhouette"] = silhouette(points, hard.assignments)[1]
    if args.fuzzifier is not None:
        soft = fuzzy_cmeans(points, K=args.k, m=args.fuzzifier, seed=args.seed)
        write_matrix_csv(ids, soft.membership, "m", out / "memberships.csv")
        summary["fuzzy"] = {"m": soft.m, "centroids": soft.centroids, "converged": soft.converged}
    write_json(summary, out / "clusters.json")
    print(f"k-means inertia {hard.inertia:.6g}; sizes {hard.sizes.tolist()}")


def _cmd_lca(args) -> None:
    cohort = read_cohort_csv(args.cohort)
    model = fit_lca(cohort, K=args.k, restarts=args.restarts, tol=args.tol, max_iter=args.max_iter, seed=args.seed)
    ids = [s.id for s in cohort]
    out = Path(args.out)
    write_json(model.to_dict(), out / "lca.json")
    write_matrix_csv(ids, model.posterior, "p", out / "lca_posterior.csv")
    write_labels_csv(ids, classify_lca(model), out / "lca_labels.csv", column="class")
    print(f"LCA loglik {model.loglik:.4f} after {model.n_iter} iterations")


def _cmd_lta(args) -> None:
    cohort = read_cohort_csv(args.cohort)
    model = fit_lta(cohort, K=args.k, restarts=args.restarts, tol=args.tol, max_iter=args.max_iter, seed=args.seed)
    ids = [s.id for s in cohort]
    out = Path(args.out)
    write_json(model.to_dict(), out / "lta.json")
    profiles = np.stack([empirical_profile(s, model.n_states) for s in cohort])
    write_matrix_csv(ids, profile_distances(model.emissions, profiles), "g", out / "lta_distances.csv")
    write_labels_csv(ids, assign_lta(model, cohort, method=args.assign), out / "lta_labels.csv", column="class")
    print(f"LTA loglik {model.loglik:.4f} after {model.n_iter} iterations")


def _cmd_evaluate(args) -> None:
    cohort = read_cohort_csv(args.cohort)
    if any(s.true_class is None for s in cohort):
        raise ValidationError("evaluation needs a cohort with true_class for every individual")
    labels = read_labels_csv(args.labels)
    missing = [s.id for s in cohort if s.id not in labels]
    if missing:
        raise ValidationError(f"no estimated label for ids {missing[:10]}")
    Zhat = np.array([labels[s.id] for s in cohort])
    report = evaluate_assignments(cohort, Zhat, get_setting(args.setting).matrices, method=args.relabel)
    write_json(report.to_dict(), Path(args.out) / "evaluation.json")
    for k in range(report.n_classes):
        print(
            f"class {k + 1}: precision {report.precision[k]:.3f} recall {report.recall[k]:.3f} "
            f"accuracy {report.accuracy[k]:.3f} size_ratio {report.size_ratio[k]:.3f}"
        )


def _cmd_study(args) -> None:
    fields = dict(args.study_config)
    overrides = {
        "settings": args.settings, "n_total": args.n_total, "replicates": args.replicates,
        "methods": args.methods, "T": args.T,
    }
    fields.update({k: v for k, v in overrides.items() if v is not None})
    fields["seed"] = args.seed
    fields["out_dir"] = args.out
    result = run_simulation_study(StudyConfig.from_dict(fields))
    failed = sum(1 for run in result.manifest["runs"] if run["status"] != "ok")
    print(f"{len(result.rows)} result rows ({failed} failed fits) in {result.paths['results']}")


def _cmd_ingest(args) -> None:
    out = Path(args.out)
    cfg = IngestConfig(
        path=args.input, gap_threshold_days=args.gap_days, min_obs=args.min_obs,
        n_states=args.n_states, gap_mode=args.gap_mode, rejects_path=out / "rejects.csv",
    )
    res = ingest_ema_csv(cfg)
    write_cohort_csv(res.cohort, out / "cohort.csv")
    write_json(res.report.to_dict(), out / "filter_report.json")
    r = res.report
    print(f"kept {r.kept} of {r.individuals} individuals; {r.rows_rejected} rows rejected")


def _cmd_analyze(args) -> None:
    cohort = read_cohort_csv(args.cohort)
    res = run_analysis(
        cohort, K=args.k, components=args.components, scale=not args.no_scale, restarts=args.restarts,
        seed=args.seed, fuzzy=args.fuzzifier is not None, fuzzifier=args.fuzzifier or 2.0,
        silhouette_ks=(2, 3, 4) if args.silhouette else (),
    )
    out = Path(args.out)
    write_labels_csv(res.ids, res.assignments, out / "assignments.csv")
    write_table_csv(PROFILE_COLUMNS, res.profile, out / "cluster_profile.csv")
    if res.memberships is not None:
        write_matrix_csv(res.ids, res.memberships, "m", out / "memberships.csv")
    if res.silhouettes:
        write_table_csv(("K", "kmeans", "fuzzy_cmeans"), res.silhouettes, out / "silhouette.csv")
    for row in res.profile:
        print(" ".join(f"{v:.3f}" if isinstance(v, float) else str(v) for v in row))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master random seed")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--config", default=None, help="JSON file of option defaults")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_pca_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--features", default=None, help="features CSV")
    p.add_argument("--cohort", default=None, help="cohort CSV (features are computed)")
    p.add_argument("--components", type=int, default=2)
    p.add_argument("--no-scale", action="store_true", help="PCA on the covariance instead of the correlation")


def _add_em_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cohort", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=1000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latentseq", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.set_defaults(func=func)
        return p

    p = add("simulate", _cmd_simulate, "simulate a labeled cohort")
    p.add_argument("--setting", default="1", choices=["1", "2", "3", "4"])
    p.add_argument("--n-per-class", type=_int_list, default=[200], help="one size, or one per class")
    p.add_argument("--T", type=int, default=44)
    p.add_argument("--init", type=_float_list, default=None, help="comma-separated initial state law")
    p.add_argument("--sojourn", choices=["exponential", "constant"], default="exponential")

    p = add("features", _cmd_features, "summary statistics per sequence")
    p.add_argument("--cohort", required=True)

    _add_pca_opts(add("pca", _cmd_pca, "principal components of the features"))

    p = add("cluster", _cmd_cluster, "k-means (and fuzzy C-means) on PCA scores")
    _add_pca_opts(p)
    p.add_argument("--scores", default=None, help="scores CSV from `pca`")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--restarts", type=int, default=25)
    p.add_argument("--fuzzifier", type=float, default=None, help="also run fuzzy C-means with this m")

    _add_em_opts(add("lca", _cmd_lca, "latent class analysis"))

    p = add("lta", _cmd_lta, "latent transition analysis")
    _add_em_opts(p)
    p.add_argument("--assign", choices=["profile", "viterbi"], default="profile")

    p = add("evaluate", _cmd_evaluate, "score labels against a simulated cohort")
    p.add_argument("--cohort", required=True)
    p.add_argument("--labels", required=True, help="CSV of id,label")
    p.add_argument("--setting", default="1", choices=["1", "2", "3", "4"])
    p.add_argument("--relabel", choices=["greedy", "hungarian"], default="greedy")

    p = add("study", _cmd_study, "run the simulation study")
    p.add_argument("--settings", type=_int_list, default=None)
    p.add_argument("--n-total", type=_int_list, default=None)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--methods", type=_str_list, default=None, help=f"subset of {','.join(METHODS)}")
    p.add_argument("--T", type=int, default=None)

    p = add("ingest", _cmd_ingest, "clean an EMA export into a cohort")
    p.add_argument("--input", required=True, help="CSV with id,timestamp,state")
    p.add_argument("--gap-days", type=float, default=7.0)
    p.add_argument("--min-obs", type=int, default=25)
    p.add_argument("--n-states", type=int, default=5)
    p.add_argument("--gap-mode", choices=GAP_MODES, default="truncate")

    p = add("analyze", _cmd_analyze, "cluster a cohort and profile the clusters")
    p.add_argument("--cohort", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--components", type=int, default=2)
    p.add_argument("--no-scale", action="store_true")
    p.add_argument("--restarts", type=int, default=25)
    p.add_argument("--fuzzifier", type=float, default=None)
    p.add_argument("--silhouette", action="store_true", help="silhouette scores for K = 2, 3, 4")

    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Parse twice: once to find the command and config file, then with config defaults."""
    first = parser.parse_args(argv)
    first.study_config = {}
    if first.config is None:
        return first
    cfg = read_json(first.config)
    if not isinstance(cfg, dict):
        raise ValidationError(f"{first.config}: config must be a JSON object")
    subparser = parser._subparsers._group_actions[0].choices[first.command]  # noqa: SLF001
    dests = {a.dest for a in subparser._actions}  # noqa: SLF001
    defaults, rest = {}, {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        (defaults if dest in dests else rest).__setitem__(dest, value)
    if rest and first.command != "study":
        raise ValidationError(f"{first.config}: unknown options for {first.command}: {sorted(rest)}")
    if "setting" in defaults:
        defaults["setting"] = str(defaults["setting"])
    subparser.set_defaults(**defaults)
    args = parser.parse_args(argv)
    args.study_config = rest
    return args


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        args.func(args)
    except (ValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
