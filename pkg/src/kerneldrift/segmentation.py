"""Window-size selection: concept-consistency scores and a two-group MDL split."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .data import SeriesSet, znormalize
from .kernels import KernelSpec, gram
from .representation import SolverConfig, solve
from .concepts import estimate_k

logger = logging.getLogger(__name__)


class SegmentationError(ValueError):
    pass


@dataclass(frozen=True)
class WindowScore:
    w: int
    ws: float
    counts: tuple
    b: int


@dataclass(frozen=True)
class WindowScoreSet:
    entries: tuple
    candidate_grid: tuple

    def to_rows(self):
        return [(e.w, e.ws, e.b, max(e.counts)) for e in self.entries]


@dataclass(frozen=True)
class WindowPlan:
    w_star: int
    b: int
    mdl_value: float
    scores: Optional[WindowScoreSet] = None


def window_counts(series: SeriesSet, w: int, cfg: SolverConfig = SolverConfig(),
                  tau_gap: float = 0.2, kernel: Optional[KernelSpec] = None,
                  normalize: bool = True, mapper: Callable = map) -> list[int]:
    """Concept count of every full window of length ``w`` (k-hat from the first solve)."""
    if w < 2 or series.T // w < 1:
        raise SegmentationError(f"window size {w} cannot form one full window of a length-{series.T} series")

    def count(sub):
        x = znormalize(sub.values) if normalize else sub.values
        return estimate_k(solve(gram(x, kernel), cfg), tau_gap).k_hat

    return list(mapper(count, series.windows(w)))


def score_window(series: SeriesSet, w: int, cfg: SolverConfig = SolverConfig(),
                 tau_gap: float = 0.2, kernel: Optional[KernelSpec] = None,
                 normalize: bool = True, mapper: Callable = map):
    """WS(w) = max_p C_p / w, returned with the per-window counts C_1..C_b."""
    counts = window_counts(series, w, cfg, tau_gap, kernel, normalize, mapper)
    return max(counts) / w, counts


def code_length(group: np.ndarray) -> float:
    """Bits to encode a group: log2 of its mean plus log2(1 + |x - mean|) per member."""
    mu = float(np.mean(group))
    return float(np.log2(mu) + np.sum(np.log2(1.0 + np.abs(group - mu))))


def mdl_select(scores: WindowScoreSet) -> WindowPlan:
    """Split the WS values (sorted descending) into a high group E and a low group F.

    The split minimizing the total code length wins; the selected window is
    the first candidate of F, i.e. the one right after the border.
    """
    entries = list(scores.entries)
    if not entries:
        raise SegmentationError("no scored candidates")
    if len(entries) == 1:
        e = entries[0]
        return WindowPlan(e.w, e.b, 0.0, scores)
    # ties broken by window size so the result does not depend on insertion order
    entries.sort(key=lambda e: (-e.ws, e.w))
    ws = np.array([e.ws for e in entries])
    if np.all(ws == ws[0]):
        e = max(entries, key=lambda e: e.w)
        logger.warning("all window scores equal (%g); no informative split, using w=%d", ws[0], e.w)
        return WindowPlan(e.w, e.b, float("nan"), scores)
    costs = [code_length(ws[:s]) + code_length(ws[s:]) for s in range(1, len(ws))]
    s = int(np.argmin(costs)) + 1
    chosen = entries[s]
    return WindowPlan(chosen.w, chosen.b, float(costs[s - 1]), scores)


def default_grid(T: int, max_candidates: int = 12) -> list[int]:
    """Divisors of T within [max(8, T/40), T/3], thinned evenly to ``max_candidates``."""
    lo, hi = max(8, int(np.ceil(T / 40))), T // 3
    divs = [d for d in range(lo, hi + 1) if T % d == 0]
    if not divs:
        divs = sorted({max(2, min(T, v)) for v in np.linspace(lo, max(lo, hi), num=min(max_candidates, 5)).astype(int)})
    if len(divs) > max_candidates:
        idx = np.unique(np.round(np.linspace(0, len(divs) - 1, max_candidates)).astype(int))
        divs = [divs[i] for i in idx]
    return divs


def plan_windows(series: SeriesSet, grid: Optional[Sequence[int]] = None,
                 cfg: SolverConfig = SolverConfig(), tau_gap: float = 0.2,
                 epsilon: Optional[float] = None, kernel: Optional[KernelSpec] = None,
                 normalize: bool = True, mapper: Callable = map) -> WindowPlan:
    """Score candidate window sizes and pick one by MDL.

    With ``epsilon`` set, scanning follows the grid order and stops once two
    successive scores differ by less than ``epsilon`` (at least two candidates
    are always scored). ``epsilon=None`` scores the whole grid.
    """
    grid = list(grid) if grid is not None else default_grid(series.T)
    if not grid:
        raise SegmentationError("empty window grid")
    entries = []
    prev = None
    for w in grid:
        ws, counts = score_window(series, w, cfg, tau_gap, kernel, normalize, mapper)
        entries.append(WindowScore(int(w), float(ws), tuple(counts), len(counts)))
        logger.info("w=%d WS=%.6f max C_p=%d b=%d", w, ws, max(counts), len(counts))
        if epsilon is not None and prev is not None and abs(ws - prev) < epsilon:
            break
        prev = ws
    return mdl_select(WindowScoreSet(tuple(entries), tuple(int(w) for w in grid)))
