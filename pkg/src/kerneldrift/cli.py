"""Command-line entry point: ``kerneldrift {synth,analyze,forecast,online,eval}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import adjusted_rand_score

from .concepts import ConceptError
from .data import DataError, SeriesSet, generate_syd, save_csv, save_ground_truth
from .drift import DriftError, occupancy
from .export import (write_heatmap, write_json, write_matrix_csv, write_rows_csv,
                     write_trace_csv)
from .pipeline import Analysis, OnlineState, RunConfig, analyze, forecast, load_series
from .representation import NumericalError
from .segmentation import SegmentationError

logger = logging.getLogger("kerneldrift")

OUTPUT_ENV = "KERNELDRIFT_OUTPUT"
EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class StageError(Exception):
    def __init__(self, stage: str, exc: Exception, code: int):
        super().__init__(f"[{stage}] {exc}")
        self.code = code


def _classify(exc: Exception) -> int:
    if isinstance(exc, (NumericalError, scipy.linalg.LinAlgError, np.linalg.LinAlgError,
                        FloatingPointError)):
        return EXIT_NUMERIC
    if isinstance(exc, (DataError, ConceptError, SegmentationError, DriftError, OSError)):
        return EXIT_DATA
    return EXIT_CONFIG


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (ValueError, ArithmeticError, OSError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc, _classify(exc)) from exc


# --- configuration -------------------------------------------------------------------

_FLAGS = [
    ("input", str, "CSV file, one column per series (default: synthesize SyD)"),
    ("syd_series", int, "SyD series count"),
    ("syd_segments", int, "SyD segments per series"),
    ("syd_segment_len", int, "SyD segment length"),
    ("kernel", str, "gaussian | linear | polynomial | sigmoid"),
    ("degree", int, "polynomial degree"),
    ("offset", float, "polynomial/sigmoid offset c"),
    ("slope", float, "sigmoid slope"),
    ("alpha", float, "fidelity weight"),
    ("beta", float, "relaxation weight"),
    ("gamma", float, "block-diagonal regularizer weight"),
    ("tol", float, "convergence threshold on max |dZ|"),
    ("max_iter", int, "solver iteration cap"),
    ("k_init", int, "block count for the first solve of each window"),
    ("tau_gap", float, "eigengap significance threshold in (0, 1)"),
    ("rho", float, "concept distinctness threshold (default: automatic)"),
    ("rho_scale", float, "automatic rho = scale * median centroid distance"),
    ("tau_decay", float, "forecast recency decay in (0, 1)"),
    ("window", int, "fixed window size (default: MDL selection)"),
    ("epsilon", float, "early-stop threshold on successive WS changes"),
    ("seed", int, "run seed"),
    ("threads", int, "worker threads (1 = serial, canonical)"),
    ("output", str, "output directory"),
]


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; flags override it")
    for name, typ, text in _FLAGS:
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None, help=text)
    p.add_argument("--grid", default=None, help="comma-separated candidate window sizes")
    p.add_argument("--no-header", dest="has_header", action="store_false", default=None,
                   help="input CSV has no header row")
    p.add_argument("--no-normalize", dest="normalize", action="store_false", default=None,
                   help="skip per-window z-normalization")


def build_config(args) -> RunConfig:
    doc = {}
    if args.config:
        doc.update(json.loads(Path(args.config).read_text()))
    for f in dataclasses.fields(RunConfig):
        val = getattr(args, f.name, None)
        if val is None:
            continue
        if f.name == "grid":
            val = [int(v) for v in str(val).split(",") if v.strip()]
        doc[f.name] = val
    if "output" not in doc and os.environ.get(OUTPUT_ENV):
        doc["output"] = os.environ[OUTPUT_ENV]
    return RunConfig.from_json(doc)


# --- reports -----------------------------------------------------------------------

def _transition_highlights(labels: np.ndarray, k: int, top: int = 10):
    counts = np.zeros((k, k), dtype=np.int64)
    for p in range(labels.shape[1] - 1):
        np.add.at(counts, (labels[:, p], labels[:, p + 1]), 1)
    flat = sorted(((int(counts[r, m]), r, m) for r in range(k) for m in range(k) if counts[r, m]),
                  key=lambda t: (-t[0], t[1], t[2]))
    return [{"from": r, "to": m, "count": c} for c, r, m in flat[:top]]


def analysis_report(series: SeriesSet, analysis: Analysis) -> dict:
    labels = analysis.labels
    k = analysis.catalog.size
    switches = int(np.sum(labels[:, 1:] != labels[:, :-1])) if labels.shape[1] > 1 else 0
    report = {
        "config": analysis.config.to_json(),
        "input": {"T": series.T, "N": series.N},
        "window": {"w_star": analysis.w, "b": analysis.b},
        "windows": [{"index": r.window_index, "k_hat": r.k_hat, "iterations": list(r.iterations),
                     "converged": r.converged} for r in analysis.windows],
        "catalog": {"size": k, "rho": analysis.catalog.rho,
                    "first_seen": [int(f) for f in analysis.catalog.first_seen]},
        "trajectories": {"switches": switches,
                         "switch_rate": switches / max(1, labels.size - labels.shape[0]),
                         "occupancy": occupancy(labels, k).tolist()},
        "transitions": _transition_highlights(labels, k),
    }
    if analysis.plan is not None:
        report["window"]["mdl_value"] = analysis.plan.mdl_value
        report["window"]["scores"] = [{"w": w, "ws": ws, "b": b, "max_c": c}
                                      for w, ws, b, c in analysis.plan.scores.to_rows()]
    return report


def write_analysis(out: Path, series: SeriesSet, analysis: Analysis) -> list:
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for res in analysis.windows:
        stem = f"window_{res.window_index:03d}"
        paths.append(write_matrix_csv(res.z, out / f"{stem}_z.csv"))
        paths.append(write_rows_csv(["series", "local", "concept"],
                                    [(series.names[i], int(res.clustering.labels[i]),
                                      int(analysis.labels[i, res.window_index]))
                                     for i in range(series.N)],
                                    out / f"{stem}_labels.csv"))
        paths.append(write_trace_csv(res.objective_trace, out / f"{stem}_trace.csv"))
        paths.append(write_heatmap(res.z, res.clustering.labels, out / f"{stem}_heatmap.pgm"))
    if analysis.plan is not None:
        paths.append(write_rows_csv(["w", "ws", "b", "max_c"], analysis.plan.scores.to_rows(),
                                    out / "scores.csv"))
    paths.append(write_json(analysis.catalog.to_json(), out / "catalog.json"))
    paths.append(write_rows_csv(["series"] + [f"w{p}" for p in range(analysis.b)],
                                [[series.names[i]] + [int(c) for c in analysis.labels[i]]
                                 for i in range(series.N)], out / "trajectories.csv"))
    return paths


# --- subcommands -------------------------------------------------------------------

def cmd_synth(args) -> list:
    cfg = _stage("config", build_config, args)
    series = _stage("synth", generate_syd, cfg.syd_series, cfg.syd_segments, cfg.syd_segment_len,
                    cfg.seed)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    save_csv(series, out / "series.csv")
    save_ground_truth(series, out / "ground_truth.csv")
    return [out / "series.csv", out / "ground_truth.csv"]


def cmd_analyze(args) -> list:
    cfg = _stage("config", build_config, args)
    series = _stage("load", load_series, cfg)
    t0 = time.perf_counter()
    analysis = _stage("analyze", analyze, series, cfg)
    out = Path(cfg.output)
    paths = write_analysis(out, series, analysis)
    paths.append(write_json(analysis_report(series, analysis), out / "report.json"))
    timing = {k: round(v, 3) for k, v in analysis.timing.items()}
    timing["total"] = round(time.perf_counter() - t0, 3)
    paths.append(write_json(timing, out / "timing.json"))
    return paths


def _forecast_rows(series, fr):
    rows = []
    for f in fr.forecasts:
        for t, v in enumerate(f.predicted_values):
            rows.append((series.names[f.series_index], f.predicted_concept, int(f.fallback), t, repr(float(v))))
    return rows


def cmd_forecast(args) -> list:
    cfg = _stage("config", build_config, args)
    series = _stage("load", load_series, cfg)
    t0 = time.perf_counter()
    analysis, fr = _stage("forecast", forecast, series, cfg, holdout=args.holdout)
    out = Path(cfg.output)
    paths = write_analysis(out, series, analysis)
    report = analysis_report(series, analysis)
    report["forecast"] = {
        "target_window": fr.p,
        "holdout": bool(args.holdout),
        "fallbacks": int(sum(f.fallback for f in fr.forecasts)),
        "predicted_concepts": [int(f.predicted_concept) for f in fr.forecasts],
    }
    if fr.rmse is not None:
        report["forecast"]["rmse"] = fr.rmse
        report["forecast"]["mean_series_rmse"] = float(np.mean(fr.per_series_rmse))
    paths.append(write_rows_csv(["series", "concept", "fallback", "t", "value"],
                                _forecast_rows(series, fr), out / "forecasts.csv"))
    paths.append(write_json(report, out / "report.json"))
    paths.append(write_json({"total": round(time.perf_counter() - t0, 3)}, out / "timing.json"))
    return paths


def iter_segments(path, w: int, has_header: bool):
    """Yield w-row segments from a CSV stream; a trailing partial segment is an error."""
    with open(path, "rb") as fh:
        offset = 0
        if has_header:
            offset += len(fh.readline())
        rows = []
        seg_start = offset
        for line in fh:
            text = line.decode().strip()
            if text:
                try:
                    rows.append([float(c) for c in next(csv.reader([text]))])
                except ValueError:
                    raise DataError(f"malformed row at byte offset {offset}") from None
                if len(rows) == 1:
                    seg_start = offset
            offset += len(line)
            if len(rows) == w:
                widths = {len(r) for r in rows}
                if len(widths) != 1:
                    raise DataError(f"ragged segment starting at byte offset {seg_start}")
                yield np.array(rows)
                rows = []
        if rows:
            raise DataError(f"stream ended mid-segment: {len(rows)} of {w} rows "
                            f"starting at byte offset {seg_start}, ending at byte offset {offset}")


def cmd_online(args) -> list:
    cfg = _stage("config", build_config, args)
    if cfg.window is None:
        raise StageError("config", ValueError("online mode needs --window"), EXIT_CONFIG)
    source = args.stream or cfg.input
    if not source:
        raise StageError("config", ValueError("online mode needs --stream or --input"), EXIT_CONFIG)
    state = OnlineState(cfg, cfg.window)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "online.jsonl"
    segments = iter_segments(source, cfg.window, cfg.has_header)
    with log_path.open("w") as log:
        while True:
            try:
                segment = next(segments)
            except StopIteration:
                break
            except (DataError, OSError, UnicodeDecodeError) as exc:
                raise StageError("stream", exc, EXIT_DATA) from exc
            forecasts = _stage("online", state.step, segment)
            rec = {"window": state.b - 1, "catalog_size": state.catalog.size}
            if forecasts is not None:
                rec["forecast_window"] = state.b
                rec["predicted_concepts"] = [int(f.predicted_concept) for f in forecasts]
                rec["fallbacks"] = int(sum(f.fallback for f in forecasts))
            line = json.dumps(rec, sort_keys=True)
            log.write(line + "\n")
            log.flush()
            print(line, flush=True)
    if state.b == 0:
        raise StageError("stream", DataError(f"{source}: no complete segment"), EXIT_DATA)
    analysis = state.analysis()
    paths = [log_path, write_json(analysis.catalog.to_json(), out / "catalog.json")]
    paths.append(write_rows_csv(["series"] + [f"w{p}" for p in range(analysis.b)],
                                [[f"s{i}"] + [int(c) for c in row]
                                 for i, row in enumerate(analysis.labels)], out / "trajectories.csv"))
    return paths


def read_ground_truth(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{path}: no ground-truth rows")
    n = max(int(r["series"]) for r in rows) + 1
    b = max(int(r["segment"]) for r in rows) + 1
    gt = np.zeros((n, b), dtype=np.int64)
    for r in rows:
        gt[int(r["series"]), int(r["segment"])] = int(r["label"])
    return gt


def matched_accuracy(pred: np.ndarray, truth: np.ndarray) -> float:
    """Share of cells agreeing after the best one-to-one label matching."""
    pu, pi = np.unique(pred, return_inverse=True)
    tu, ti = np.unique(truth, return_inverse=True)
    conf = np.zeros((len(pu), len(tu)), dtype=np.int64)
    np.add.at(conf, (pi.ravel(), ti.ravel()), 1)
    rows, cols = linear_sum_assignment(-conf)
    return float(conf[rows, cols].sum() / pred.size)


def cmd_eval(args) -> list:
    run = Path(args.run)
    truth = _stage("load", read_ground_truth, args.ground_truth)
    with (run / "trajectories.csv").open(newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    labels = np.array([[int(v) for v in r[1:]] for r in rows], dtype=np.int64)
    report = json.loads((run / "report.json").read_text())
    w = report["window"]["w_star"]
    seg_len = int(args.segment_len)
    if w % seg_len and seg_len % w:
        raise StageError("eval", DataError(f"window {w} not aligned with segment length {seg_len}"),
                         EXIT_DATA)
    # ground truth per analyzed window (window inside one segment, or the first segment it covers)
    per_window = np.array([truth[:, min(p * w // seg_len, truth.shape[1] - 1)]
                           for p in range(labels.shape[1])]).T
    ari = [float(adjusted_rand_score(per_window[:, p], labels[:, p])) for p in range(labels.shape[1])]
    doc = {"ari": ari, "min_ari": min(ari), "trajectory_accuracy": matched_accuracy(labels, per_window)}
    path = write_json(doc, run / "eval.json")
    print(json.dumps(doc, sort_keys=True))
    return [path]


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kerneldrift", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("synth", help="write the synthetic SyD benchmark")
    _add_config_flags(p)
    p.set_defaults(func=cmd_synth)
    p = sub.add_parser("analyze", help="identify concepts and trajectories")
    _add_config_flags(p)
    p.set_defaults(func=cmd_analyze)
    p = sub.add_parser("forecast", help="predict the next (or held-out final) window")
    _add_config_flags(p)
    p.add_argument("--holdout", action=argparse.BooleanOptionalAction, default=True,
                   help="withhold the final window and report RMSE against it")
    p.set_defaults(func=cmd_forecast)
    p = sub.add_parser("online", help="ingest a CSV stream segment by segment")
    _add_config_flags(p)
    p.add_argument("--stream", help="CSV stream (defaults to --input)")
    p.set_defaults(func=cmd_online)
    p = sub.add_parser("eval", help="score an analyze run against SyD ground truth")
    p.add_argument("run", help="output directory of an analyze run")
    p.add_argument("ground_truth", help="ground_truth.csv from synth")
    p.add_argument("--segment-len", default=78, type=int)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        paths = args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
