"""Concept identification and drift forecasting for co-evolving time series."""

from .data import SeriesSet, Subseries, generate_syd, load_csv, realized_volatility, znormalize_window
from .kernels import GramMatrix, KernelSpec, gram, gram_alternative, gram_gaussian, nystrom_approximate
from .representation import RepresentationMatrix, SolverConfig, solve
from .concepts import ConceptCatalog, estimate_k, merge_into_catalog, spectral_cluster
from .segmentation import mdl_select, plan_windows, score_window
from .pipeline import OnlineState, RunConfig, analyze, forecast, online_step

__version__ = "0.1.0"

__all__ = [
    "SeriesSet", "Subseries", "generate_syd", "load_csv", "realized_volatility", "znormalize_window",
    "GramMatrix", "KernelSpec", "gram", "gram_alternative", "gram_gaussian", "nystrom_approximate",
    "RepresentationMatrix", "SolverConfig", "solve",
    "ConceptCatalog", "estimate_k", "merge_into_catalog", "spectral_cluster",
    "mdl_select", "plan_windows", "score_window",
    "OnlineState", "RunConfig", "analyze", "forecast", "online_step",
]
