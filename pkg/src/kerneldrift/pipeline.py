"""End-to-end analysis: window plan, per-window solves, concepts, trajectories, forecasts."""

from __future__ import annotations

import dataclasses
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .concepts import (ConceptCatalog, WindowClustering, auto_rho, estimate_k,
                       merge_into_catalog, spectral_cluster)
from .data import DataError, SeriesSet, Subseries, generate_syd, load_csv, znormalize
from .drift import (build_trajectories, evaluate_rmse, forecast_values,
                    occupancy, transition_scores)
from .kernels import KernelSpec, gram
from .representation import SolverConfig, solve
from .segmentation import WindowPlan, default_grid, plan_windows

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a run. The all-default config reproduces the SyD benchmark run."""

    input: Optional[str] = None
    has_header: bool = True
    syd_series: int = 500
    syd_segments: int = 10
    syd_segment_len: int = 78
    kernel: str = "gaussian"
    degree: int = 2
    offset: float = 0.0
    slope: float = 1.0
    alpha: float = 4.0
    beta: float = 60.0
    gamma: float = 0.8
    tol: float = 1e-5
    max_iter: int = 200
    k_init: int = 3
    tau_gap: float = 0.2
    rho: Optional[float] = None
    rho_scale: float = 0.5
    tau_decay: float = 0.5
    window: Optional[int] = None
    grid: Optional[tuple] = None
    epsilon: Optional[float] = None
    normalize: bool = True
    seed: int = 0
    threads: int = 1
    output: str = "kerneldrift-out"

    def __post_init__(self):
        if self.grid is not None:
            object.__setattr__(self, "grid", tuple(int(w) for w in self.grid))
        for name in ("syd_series", "syd_segments", "syd_segment_len"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        self.solver_config()
        self.kernel_spec()
        if not 0 < self.tau_gap < 1:
            raise ValueError(f"tau_gap must lie in (0, 1), got {self.tau_gap}")
        if not 0 < self.tau_decay < 1:
            raise ValueError(f"tau_decay must lie in (0, 1), got {self.tau_decay}")
        if self.rho is not None and not self.rho >= 0:
            raise ValueError("rho must be non-negative")
        if self.window is not None and self.window < 2:
            raise ValueError("window must be >= 2")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def solver_config(self, k: Optional[int] = None) -> SolverConfig:
        return SolverConfig(self.alpha, self.beta, self.gamma, self.k_init if k is None else k,
                            self.max_iter, self.tol)

    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(self.kernel, self.degree, self.offset, self.slope)

    def to_json(self) -> dict:
        doc = dataclasses.asdict(self)
        if doc["grid"] is not None:
            doc["grid"] = list(doc["grid"])
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


def window_seed(seed: int, window_index: int) -> int:
    """Per-window k-means seed; depends only on the run seed and the window index."""
    return int(np.random.SeedSequence([seed, window_index]).generate_state(1)[0])


def load_series(config: RunConfig) -> SeriesSet:
    if config.input:
        return load_csv(config.input, has_header=config.has_header)
    return generate_syd(config.syd_series, config.syd_segments, config.syd_segment_len, config.seed)


@dataclass(frozen=True)
class WindowResult:
    window_index: int
    k_hat: int
    z: np.ndarray
    clustering: WindowClustering
    values: np.ndarray  # preprocessed w x N window
    iterations: tuple
    objective_trace: tuple
    converged: bool


def process_window(sub: Subseries, config: RunConfig) -> WindowResult:
    """Solve with the initial k, estimate k-hat, re-solve once with k-hat and cluster."""
    x = znormalize(sub.values) if config.normalize else np.asarray(sub.values, dtype=np.float64)
    g = gram(x, config.kernel_spec())
    n = x.shape[1]
    k0 = min(config.k_init, n)
    first = solve(g, config.solver_config(k0))
    k_hat = estimate_k(first, config.tau_gap).k_hat
    rep = first if k_hat == k0 else solve(g, config.solver_config(k_hat), z0=first.z)
    clustering = spectral_cluster(rep, k_hat, window_seed(config.seed, sub.window_index),
                                  values=x, window_index=sub.window_index)
    iters = (first.iterations,) if rep is first else (first.iterations, rep.iterations)
    return WindowResult(sub.window_index, k_hat, rep.z, clustering, x, iters,
                        rep.objective_trace, rep.converged)


@contextmanager
def _mapper(threads: int):
    if threads <= 1:
        yield map
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            yield pool.map


@dataclass
class Analysis:
    config: RunConfig
    w: int
    plan: Optional[WindowPlan]
    windows: list
    catalog: ConceptCatalog
    labels: np.ndarray  # N x b global concept ids
    timing: dict = field(default_factory=dict)

    @property
    def b(self) -> int:
        return len(self.windows)

    @property
    def trajectories(self):
        return build_trajectories([self.labels[:, p] for p in range(self.b)])

    def occupancy(self) -> np.ndarray:
        return occupancy(self.labels, self.catalog.size)


def _catalog_for(first: WindowResult, config: RunConfig) -> ConceptCatalog:
    rho = config.rho if config.rho is not None else auto_rho(first.clustering.centroids, config.rho_scale)
    return ConceptCatalog(rho)


def assemble(results: Sequence[WindowResult], config: RunConfig,
             catalog: Optional[ConceptCatalog] = None):
    """Merge window clusterings into the catalog in window order and map labels to global ids."""
    results = sorted(results, key=lambda r: r.window_index)
    if catalog is None:
        catalog = _catalog_for(results[0], config)
    columns = []
    for res in results:
        catalog = merge_into_catalog(catalog, res.clustering)
        columns.append(catalog.global_labels(res.clustering))
    return catalog, np.stack(columns, axis=1)


def analyze(series: SeriesSet, config: RunConfig = RunConfig()) -> Analysis:
    series.check_analyzable()
    if series.N < 3:
        raise DataError(f"concept estimation needs at least 3 series, got N={series.N}")
    timing = {}
    t0 = time.perf_counter()
    with _mapper(config.threads) as mapper:
        plan = None
        if config.window is None:
            grid = config.grid if config.grid is not None else tuple(default_grid(series.T))
            plan = plan_windows(series, grid, config.solver_config(), config.tau_gap, config.epsilon,
                                config.kernel_spec(), config.normalize, mapper)
            w = plan.w_star
        else:
            w = config.window
            if series.T // w < 1:
                raise DataError(f"window {w} longer than the series (T={series.T})")
        timing["plan"] = time.perf_counter() - t0
        t1 = time.perf_counter()
        results = list(mapper(lambda sub: process_window(sub, config), series.windows(w)))
    timing["windows"] = time.perf_counter() - t1
    t2 = time.perf_counter()
    catalog, labels = assemble(results, config)
    timing["concepts"] = time.perf_counter() - t2
    return Analysis(config, w, plan, results, catalog, labels, timing)


@dataclass(frozen=True)
class ForecastResult:
    forecasts: list
    p: int
    rmse: Optional[float] = None
    per_series_rmse: Optional[np.ndarray] = None
    actual: Optional[np.ndarray] = None


def forecast_next(analysis: Analysis, series_indices: Optional[Sequence[int]] = None) -> list:
    """Predict each series' next window (p + 1) from all analyzed windows 1..p."""
    p = analysis.b
    if p < 2:
        raise DataError(f"forecasting needs at least 2 analyzed windows, got {p}")
    eta = analysis.occupancy()
    out = []
    idx = range(analysis.labels.shape[0]) if series_indices is None else series_indices
    for i in idx:
        labels = analysis.labels[i]
        scores = transition_scores(labels, eta, p)
        m = int(scores.predictions[labels[p - 1]])
        history = np.stack([res.values[:, i] for res in analysis.windows])
        out.append(forecast_values(labels, history, m, analysis.config.tau_decay,
                                   profile=analysis.catalog.profiles[m], series_index=i))
    return out


def forecast(series: SeriesSet, config: RunConfig = RunConfig(), holdout: bool = True):
    """Forecast every series' final window from the windows before it.

    With ``holdout`` the last full window is withheld from the analysis and
    the forecast is scored against it (on the preprocessed scale); without it
    all windows are analyzed and the window after them is predicted.
    """
    w = config.window
    if w is None:
        w = analyze(series, config).w if not holdout else _plan_only(series, config)
    b = series.T // w
    needed = 3 if holdout else 2
    if b < needed:
        raise DataError(f"forecasting needs at least {needed} windows of size {w}, series has {b}")
    cfg = dataclasses.replace(config, window=w)
    if holdout:
        train = SeriesSet(series.values[:(b - 1) * w], series.names)
        analysis = analyze(train, cfg)
        forecasts = forecast_next(analysis)
        final = series.values[(b - 1) * w:b * w]
        actual = znormalize(final) if config.normalize else final
        pred = np.stack([f.predicted_values for f in forecasts], axis=1)
        per_series = np.sqrt(np.mean((pred - actual) ** 2, axis=0))
        rmse = evaluate_rmse(pred, actual)
        return analysis, ForecastResult(forecasts, analysis.b, rmse, per_series, actual)
    analysis = analyze(series, cfg)
    return analysis, ForecastResult(forecast_next(analysis), analysis.b)


def _plan_only(series: SeriesSet, config: RunConfig) -> int:
    grid = config.grid if config.grid is not None else tuple(default_grid(series.T))
    with _mapper(config.threads) as mapper:
        return plan_windows(series, grid, config.solver_config(), config.tau_gap, config.epsilon,
                            config.kernel_spec(), config.normalize, mapper).w_star


class OnlineState:
    """Fixed-window incremental analysis: each new segment is solved once and appended.

    Not thread-safe; one owner feeds segments in order.
    """

    def __init__(self, config: RunConfig, w: int, warm_up: int = 2):
        if w < 2:
            raise ValueError("window must be >= 2")
        self.config = dataclasses.replace(config, window=w)
        self.w = w
        self.warm_up = warm_up
        self.windows: list = []
        self.catalog: Optional[ConceptCatalog] = None
        self.columns: list = []

    @property
    def b(self) -> int:
        return len(self.windows)

    @property
    def labels(self) -> np.ndarray:
        return np.stack(self.columns, axis=1)

    def analysis(self) -> Analysis:
        return Analysis(self.config, self.w, None, list(self.windows), self.catalog, self.labels)

    def step(self, segment) -> Optional[list]:
        """Ingest one w x N segment; return next-window forecasts once past warm-up."""
        segment = np.asarray(segment, dtype=np.float64)
        if segment.ndim != 2 or segment.shape[0] != self.w:
            raise DataError(f"segment must have {self.w} rows, got shape {segment.shape}")
        if self.windows and segment.shape[1] != self.windows[0].values.shape[1]:
            raise DataError("segment has a different number of series than earlier segments")
        if not np.all(np.isfinite(segment)):
            raise DataError("segment contains NaN or Inf")
        res = process_window(Subseries(self.b, segment, self.b * self.w), self.config)
        if self.catalog is None:
            self.catalog = _catalog_for(res, self.config)
        self.catalog = merge_into_catalog(self.catalog, res.clustering)
        self.windows.append(res)
        self.columns.append(self.catalog.global_labels(res.clustering))
        if self.b <= self.warm_up:
            return None
        return forecast_next(self.analysis())


def online_step(state: OnlineState, segment):
    forecasts = state.step(segment)
    return state, forecasts
