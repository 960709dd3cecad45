"""ECG record loading, resampling, and synthetic test-signal generation.

The file formats are deliberately primitive: an ECG file carries one decimal
voltage (mV) per line with ``#`` comment lines ignored, and an annotation file
carries one R-peak time (seconds) per line. The sampling rate travels
out-of-band (config or CLI) because public-database CSV exports disagree on
headers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "EcgRecord",
    "SynthConfig",
    "load_csv",
    "load_annotations",
    "resample",
    "synth_ecg",
    "save_record_csv",
    "save_annotations",
]


@dataclass(frozen=True)
class EcgRecord:
    """A uniformly sampled voltage trace with optional golden R-peak times.

    Immutable after construction; safe to share between threads.
    """

    samples: np.ndarray  # voltage, mV
    fs: float  # Hz
    annotations: np.ndarray | None = None  # R-peak times, seconds, strictly increasing
    subject_id: str = ""

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        if not self.fs > 0:
            raise ValueError(f"sampling rate must be positive, got {self.fs}")
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples contain non-finite values")
        if self.annotations is not None:
            ann = np.asarray(self.annotations, dtype=float)
            ann.setflags(write=False)
            object.__setattr__(self, "annotations", ann)
            if ann.size and (np.any(np.diff(ann) <= 0)):
                raise ValueError("annotations must be strictly increasing")
            if ann.size and (ann[0] < 0 or ann[-1] > self.duration_s):
                raise ValueError("annotations must lie within [0, duration]")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.fs


@dataclass(frozen=True)
class SynthConfig:
    """Parameters for the synthetic PQRST generator used as a test fixture."""

    bpm: float = 72.0
    duration_s: float = 360.0
    fs: float = 256.0
    noise_std: float = 0.03  # mV
    baseline_drift_amp: float = 0.1  # mV
    seed: int = 0

    def __post_init__(self) -> None:
        if not 30.0 <= self.bpm <= 220.0:
            raise ValueError(f"bpm must be in [30, 220], got {self.bpm}")
        if not self.duration_s > 0:
            raise ValueError("duration_s must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        if not self.fs > 0:
            raise ValueError("fs must be positive")


def _parse_value_lines(path: str | Path, what: str) -> list[float]:
    values: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                value = float(text)
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: cannot parse {what} {text!r}") from None
            if not math.isfinite(value):
                raise ValueError(f"{path}: line {lineno}: non-finite {what}")
            values.append(value)
    return values


def load_csv(path: str | Path, fs: float, subject_id: str = "") -> EcgRecord:
    """Load a one-voltage-per-line CSV export at the given sampling rate.

    Raises on a missing file, a malformed line (with its line number), a
    non-finite value, or an empty file.
    """
    samples = _parse_value_lines(path, "voltage")
    if not samples:
        raise ValueError(f"{path}: no samples")
    return EcgRecord(samples=np.array(samples), fs=fs, subject_id=subject_id or Path(path).stem)


def load_annotations(path: str | Path) -> np.ndarray:
    """Load R-peak times (one decimal seconds value per line), strictly increasing."""
    times = np.array(_parse_value_lines(path, "time"), dtype=float)
    if times.size and np.any(np.diff(times) <= 0):
        raise ValueError(f"{path}: annotation times are not strictly increasing")
    return times


def save_record_csv(record: EcgRecord, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in record.samples:
            fh.write(f"{v:.6f}\n")


def save_annotations(annotations: np.ndarray, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in np.asarray(annotations, dtype=float):
            fh.write(f"{t:.6f}\n")


def resample(record: EcgRecord, target_fs: float) -> EcgRecord:
    """Linearly interpolate the record onto a new sampling grid.

    Annotations are times and therefore unchanged. Duration is preserved to
    within one sample period.
    """
    if not target_fs > 0:
        raise ValueError(f"target sampling rate must be positive, got {target_fs}")
    if target_fs == record.fs:
        return record
    n_new = int(round(record.duration_s * target_fs))
    n_new = max(n_new, 1)
    t_old = np.arange(len(record.samples)) / record.fs
    t_new = np.arange(n_new) / target_fs
    samples = np.interp(t_new, t_old, record.samples)
    return EcgRecord(samples=samples, fs=target_fs, annotations=record.annotations, subject_id=record.subject_id)


# PQRST bump shapes relative to the R deflection: (center, width, amplitude),
# center and width as fractions of the beat period, amplitude relative to R.
_BEAT_BUMPS = (
    (-0.20, 0.040, 0.10),  # P
    (-0.035, 0.010, -0.15),  # Q
    (0.0, 0.018, 1.00),  # R
    (0.035, 0.012, -0.25),  # S
    (0.22, 0.055, 0.30),  # T
)

_R_AMPLITUDE_MV = 1.0
_DRIFT_FREQ_HZ = 0.2


def synth_ecg(cfg: SynthConfig) -> EcgRecord:
    """Generate a periodic PQRST-like trace with exact R-peak annotations.

    Each beat is a fixed sum of Gaussian bumps whose widths scale with the
    beat period; white noise and a slow sinusoidal drift are added on top.
    Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(cfg.seed)
    period = 60.0 / cfg.bpm
    n = int(round(cfg.duration_s * cfg.fs))
    t = np.arange(n) / cfg.fs
    signal = np.zeros(n)

    # First R centered half a period in; include one beat of margin on each
    # side so edge bumps (P of the first beat, T of the last) are not cut off.
    k_max = int(math.ceil(cfg.duration_s / period)) + 1
    r_times = []
    for k in range(-1, k_max + 1):
        center = (0.5 + k) * period
        if 0.0 <= center < cfg.duration_s:
            r_times.append(center)
        for frac, width_frac, amp in _BEAT_BUMPS:
            c = center + frac * period
            sigma = width_frac * period
            lo = np.searchsorted(t, c - 5 * sigma)
            hi = np.searchsorted(t, c + 5 * sigma)
            if lo >= hi:
                continue
            window = t[lo:hi] - c
            signal[lo:hi] += amp * _R_AMPLITUDE_MV * np.exp(-0.5 * (window / sigma) ** 2)

    if cfg.baseline_drift_amp:
        signal += cfg.baseline_drift_amp * np.sin(2.0 * np.pi * _DRIFT_FREQ_HZ * t)
    if cfg.noise_std:
        signal += rng.normal(0.0, cfg.noise_std, size=n)

    return EcgRecord(samples=signal, fs=cfg.fs, annotations=np.array(r_times), subject_id=f"synth-{cfg.bpm:g}bpm")
