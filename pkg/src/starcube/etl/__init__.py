"""Extraction, statistical cleaning and loading of heterogeneous file sources."""

from .cleaning import impute_mean, impute_regression, smooth_bins, standardize
from .pipeline import EtlReport, parse_pipeline_config, resolve_conflicts, run_pipeline
from .sources import FixedWidthLayout, SourceSpec, StagingBatch, extract

__all__ = [
    "EtlReport",
    "FixedWidthLayout",
    "SourceSpec",
    "StagingBatch",
    "extract",
    "impute_mean",
    "impute_regression",
    "smooth_bins",
    "standardize",
    "parse_pipeline_config",
    "resolve_conflicts",
    "run_pipeline",
]
