"""End-to-end pipelines: the simulation study, EMA ingestion and real-data analysis."""

from latentseq.harness.analysis import AnalysisResult, characterize_clusters, run_analysis, silhouette_table
from latentseq.harness.ingest import FilterReport, IngestConfig, IngestResult, ingest_ema_csv
from latentseq.harness.study import StudyConfig, StudyResult, load_study, medians, run_simulation_study

__all__ = [
    "AnalysisResult",
    "FilterReport",
    "IngestConfig",
    "IngestResult",
    "StudyConfig",
    "StudyResult",
    "characterize_clusters",
    "ingest_ema_csv",
    "load_study",
    "medians",
    "run_analysis",
    "run_simulation_study",
    "silhouette_table",
]
