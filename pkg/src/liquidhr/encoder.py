"""Delta-threshold spike encoding of an ECG trace.

A sampled comparator fires at fixed timer intervals and tracks the signal with
two thresholds a fixed gap apart. A rising signal that clears the upper
threshold shifts both thresholds up by the gap and emits one spike; a falling
signal that clears the lower threshold shifts both down silently; a stable
signal leaves the state untouched. Only rising activity produces spikes, so
the steep QRS upstroke turns into a dense burst while flat stretches stay
quiet.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from liquidhr.ecg import EcgRecord

__all__ = [
    "EncoderConfig",
    "EncoderState",
    "SpikeTrain",
    "default_delta",
    "encoder_step",
    "encode",
    "data_density",
    "save_spike_csv",
    "load_spike_csv",
]


@dataclass(frozen=True)
class EncoderConfig:
    """Comparator settings. ``initial_lthr``/``initial_uthr`` of None means
    the thresholds start at the first sample value."""

    delta: float  # threshold gap, mV
    timer_interval_ms: float = 2.0
    initial_lthr: float | None = None
    initial_uthr: float | None = None

    def __post_init__(self) -> None:
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.timer_interval_ms > 0:
            raise ValueError("timer_interval_ms must be positive")
        if (self.initial_lthr is None) != (self.initial_uthr is None):
            raise ValueError("initial_lthr and initial_uthr must be given together")
        if self.initial_lthr is not None:
            gap = self.initial_uthr - self.initial_lthr
            if abs(gap - self.delta) > 1e-12 * max(1.0, abs(self.delta)):
                raise ValueError("initial_uthr must equal initial_lthr + delta")


@dataclass(frozen=True)
class EncoderState:
    lthr: float
    uthr: float


@dataclass(frozen=True)
class SpikeTrain:
    """Strictly increasing spike timestamps (ms) for one channel."""

    times_ms: np.ndarray
    duration_ms: float

    def __post_init__(self) -> None:
        times = np.asarray(self.times_ms, dtype=float)
        times.setflags(write=False)
        object.__setattr__(self, "times_ms", times)
        if times.size and np.any(np.diff(times) <= 0):
            raise ValueError("spike timestamps must be strictly increasing")
        if not self.duration_ms >= 0:
            raise ValueError("duration_ms must be nonnegative")

    def __len__(self) -> int:
        return len(self.times_ms)


def default_delta(record: EcgRecord, levels: int = 40) -> float:
    """Percentile-scaled threshold gap: (p99 - p1) of the signal split into
    ``levels`` steps. Robust to outliers and baseline drift."""
    lo, hi = np.percentile(record.samples, [1.0, 99.0])
    if hi <= lo:
        raise ValueError("signal has no dynamic range; specify delta explicitly")
    return float(hi - lo) / levels


def encoder_step(state: EncoderState, v: float, cfg: EncoderConfig) -> tuple[EncoderState, bool]:
    """Advance the comparator by one timer tick for voltage ``v``.

    Returns the new state and whether a spike was emitted. Total on finite v.
    """
    if v > state.uthr:
        return EncoderState(lthr=state.uthr, uthr=state.uthr + cfg.delta), True
    if v < state.lthr:
        return EncoderState(lthr=state.lthr - cfg.delta, uthr=state.lthr), False
    return state, False


def encode(record: EcgRecord, cfg: EncoderConfig) -> SpikeTrain:
    """Run the comparator over the record at timer-tick instants.

    The signal is read with nearest-sample lookup (the comparator samples, it
    does not interpolate). At most one spike per tick; timestamps are
    multiples of the timer interval.
    """
    samples = record.samples
    n = len(samples)
    step_samples = cfg.timer_interval_ms * record.fs / 1000.0
    if cfg.initial_lthr is not None:
        state = EncoderState(lthr=cfg.initial_lthr, uthr=cfg.initial_uthr)
    else:
        state = EncoderState(lthr=float(samples[0]), uthr=float(samples[0]) + cfg.delta)

    times: list[float] = []
    k = 0
    while True:
        idx = int(round(k * step_samples))
        if idx >= n:
            break
        state, spiked = encoder_step(state, float(samples[idx]), cfg)
        if spiked:
            times.append(k * cfg.timer_interval_ms)
        k += 1
    return SpikeTrain(times_ms=np.array(times), duration_ms=record.duration_s * 1000.0)


def data_density(record: EcgRecord, train: SpikeTrain, adc_bits: int) -> float:
    """Raw ADC bits represented per emitted spike: samples * bits / spikes."""
    if len(train) == 0:
        raise ValueError("empty spike train: data density undefined")
    return len(record.samples) * adc_bits / len(train)


def save_spike_csv(train: SpikeTrain, path: str | Path) -> None:
    """One timestamp (ms) per line; a leading comment records the duration so
    downstream stages can window the train without the source record."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# duration_ms={train.duration_ms:.6f}\n")
        for t in train.times_ms:
            fh.write(f"{t:.6f}\n")


def load_spike_csv(path: str | Path) -> SpikeTrain:
    duration: float | None = None
    times: list[float] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                if "duration_ms=" in text:
                    duration = float(text.split("duration_ms=", 1)[1])
                continue
            try:
                times.append(float(text))
            except ValueError:
                raise ValueError(f"{path}: line {lineno}: cannot parse timestamp {text!r}") from None
    if duration is None:
        duration = times[-1] if times else 0.0
    return SpikeTrain(times_ms=np.array(times), duration_ms=duration)
