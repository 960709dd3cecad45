"""Scoring of heart-rate estimates and QRS detections against annotations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "QrsScore",
    "EvalReport",
    "mape",
    "hr_diff_histogram",
    "annotations_to_bpm",
    "qrs_score",
    "save_report_json",
    "save_histogram_csv",
]

OFFSET_BUCKETS_MS = ((0.0, 50.0), (50.0, 100.0), (100.0, 200.0))


@dataclass(frozen=True)
class QrsScore:
    accuracy_pct: float
    fp_pct: float
    fn_pct: float
    offsets_pct: tuple[float, float, float]  # share of matches in 0-50 / 50-100 / 100-200 ms
    n_golden: int
    n_detected: int
    n_matched: int


@dataclass(frozen=True)
class EvalReport:
    mape_pct: float
    per_window_abs_diff: list[float]
    histogram: list[tuple[float, float, int]]  # (bin_start, bin_end, count)
    qrs: QrsScore | None = None
    extras: dict = field(default_factory=dict)


def mape(actual: np.ndarray, predicted: np.ndarray) -> float:
    """Mean absolute percentage error between actual and predicted bpm."""
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if actual.shape != predicted.shape or actual.size == 0:
        raise ValueError("actual and predicted must be equal-length, nonempty sequences")
    if np.any(actual <= 0):
        raise ValueError("actual rates must be positive")
    return float(np.mean(np.abs(actual - predicted) / actual) * 100.0)


def hr_diff_histogram(abs_diffs: np.ndarray, bin_width: float) -> list[tuple[float, float, int]]:
    """Histogram of absolute bpm differences over [k*bw, (k+1)*bw) bins.

    Only nonempty bins are listed; counts sum to the input length.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    abs_diffs = np.asarray(abs_diffs, dtype=float)
    if abs_diffs.size == 0:
        return []
    idx = np.floor(abs_diffs / bin_width).astype(int)
    out = []
    for k in np.unique(idx):
        out.append((k * bin_width, (k + 1) * bin_width, int(np.sum(idx == k))))
    return out


def annotations_to_bpm(annotations_s: np.ndarray, hi_ms: float, n_windows: int | None = None) -> np.ndarray:
    """Golden per-window rates: R-peak count in each half-open window
    [k*hi, (k+1)*hi). Windows are inferred from the last annotation unless
    n_windows is given."""
    ann = np.asarray(annotations_s, dtype=float)
    hi_s = hi_ms / 1000.0
    if n_windows is None:
        n_windows = int(ann[-1] // hi_s) + 1 if ann.size else 0
    counts = np.zeros(n_windows, dtype=int)
    if ann.size:
        idx = (ann // hi_s).astype(int)
        keep = idx < n_windows
        np.add.at(counts, idx[keep], 1)
    return counts


def qrs_score(detected_ms: np.ndarray, golden_ms: np.ndarray, match_window_ms: float = 200.0) -> QrsScore:
    """Greedy nearest-first one-to-one matching of detections to golden peaks.

    Accuracy, false positives and false negatives are all expressed as
    percentages of the golden count; matched offsets are bucketed into
    0-50 / 50-100 / 100-200 ms shares of the matched count.
    """
    detected = np.sort(np.asarray(detected_ms, dtype=float))
    golden = np.sort(np.asarray(golden_ms, dtype=float))
    n_d, n_g = len(detected), len(golden)
    if n_g == 0:
        raise ValueError("no golden events to score against")

    pairs = []
    for i, t_d in enumerate(detected):
        lo = np.searchsorted(golden, t_d - match_window_ms)
        hi = np.searchsorted(golden, t_d + match_window_ms, side="right")
        for j in range(lo, hi):
            pairs.append((abs(t_d - golden[j]), i, j))
    pairs.sort()

    used_d = np.zeros(n_d, dtype=bool)
    used_g = np.zeros(n_g, dtype=bool)
    offsets = []
    for off, i, j in pairs:
        if used_d[i] or used_g[j]:
            continue
        used_d[i] = True
        used_g[j] = True
        offsets.append(off)

    n_matched = len(offsets)
    offsets = np.array(offsets)
    bucket_counts = [
        int(np.sum((offsets >= lo) & (offsets < hi))) if n_matched else 0
        for lo, hi in OFFSET_BUCKETS_MS[:-1]
    ]
    lo, hi = OFFSET_BUCKETS_MS[-1]
    bucket_counts.append(int(np.sum((offsets >= lo) & (offsets <= hi))) if n_matched else 0)
    shares = tuple(100.0 * c / n_matched if n_matched else 0.0 for c in bucket_counts)

    return QrsScore(
        accuracy_pct=100.0 * n_matched / n_g,
        fp_pct=100.0 * (n_d - n_matched) / n_g,
        fn_pct=100.0 * (n_g - n_matched) / n_g,
        offsets_pct=shares,  # type: ignore[arg-type]
        n_golden=n_g,
        n_detected=n_d,
        n_matched=n_matched,
    )


def save_report_json(report: EvalReport, path: str | Path) -> None:
    payload: dict = {
        "mape_pct": report.mape_pct,
        "per_window_abs_diff": report.per_window_abs_diff,
        "histogram": [{"bin_start": a, "bin_end": b, "count": c} for a, b, c in report.histogram],
    }
    if report.qrs is not None:
        payload["qrs"] = {
            "accuracy_pct": report.qrs.accuracy_pct,
            "fp_pct": report.qrs.fp_pct,
            "fn_pct": report.qrs.fn_pct,
            "offsets_pct": {
                "0-50ms": report.qrs.offsets_pct[0],
                "50-100ms": report.qrs.offsets_pct[1],
                "100-200ms": report.qrs.offsets_pct[2],
            },
            "n_golden": report.qrs.n_golden,
            "n_detected": report.qrs.n_detected,
            "n_matched": report.qrs.n_matched,
        }
    payload.update(report.extras)
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def save_histogram_csv(histogram: list[tuple[float, float, int]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin_start,bin_end,count\n")
        for a, b, c in histogram:
            fh.write(f"{a:g},{b:g},{c}\n")
