"""Heart-rate inference from per-window QRS probabilities.

Each spike-integrate window contributes an independent Bernoulli trial whose
success probability is its QRS-cluster membership; the beat count over the
inference interval is then Poisson-binomial. The PMF is recovered by sampling
the characteristic function at the H roots of unity and applying a DFT, with
brute-force oracles (subset enumeration and iterated convolution) kept
alongside for verification.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from liquidhr.readout import ReadoutConfig, ReadoutModel, qrs_probabilities

__all__ = [
    "HeartRatePmf",
    "pbd_pmf_dft",
    "pbd_pmf_oracle",
    "expected_heart_rate",
    "estimate_window",
    "qrs_detect",
    "PLAUSIBLE_BPM_RANGE",
]

logger = logging.getLogger(__name__)

PLAUSIBLE_BPM_RANGE = (30.0, 220.0)

_ENUMERATION_LIMIT = 20
_IMAG_RESIDUE_TOL = 1e-9


@dataclass(frozen=True)
class HeartRatePmf:
    """Discrete probability mass over beat counts 0..h_max-1."""

    lam: np.ndarray
    h_max: int

    def __post_init__(self) -> None:
        lam = np.asarray(self.lam, dtype=float)
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        if len(lam) != self.h_max:
            raise ValueError("pmf length must equal h_max")
        if np.any(lam < -1e-12):
            raise ValueError("pmf has negative mass beyond numerical floor")
        total = lam.sum()
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"pmf mass {total} is not 1 within 1e-6")


def _validate_probs(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probability vector must be one-dimensional and nonempty")
    if np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    return p


def _char_fn_pmf(p: np.ndarray, h: int, log_space: bool = False) -> np.ndarray:
    """PMF via DFT of the characteristic function, without the anti-aliasing
    guard. Exact only when h exceeds the support size len(p) + 1."""
    half = h // 2 + 1
    factor = 1.0 - np.exp(2j * np.pi * np.arange(half) / h)  # 1 - e^{i*2*pi*n/h}
    if log_space:
        z = 1.0 - p[None, :] * factor[:, None]
        with np.errstate(divide="ignore"):
            log_mag = np.log(np.abs(z)).sum(axis=1)
        phase = np.angle(z).sum(axis=1)
        lam_half = np.exp(log_mag) * np.exp(1j * phase) / h
    else:
        # Iterating over factors keeps the working set at h/2 complex values,
        # which is both faster and as accurate as the log-space route at the
        # tolerances used here; underflow merely flushes sub-1e-300 terms to 0.
        acc = np.ones(half, dtype=complex)
        for pk in p:
            acc *= 1.0 - pk * factor
        lam_half = acc / h
    lam = np.empty(h, dtype=complex)
    lam[:half] = lam_half
    lam[half:] = np.conj(lam[1 : h - half + 1][::-1])
    pmf = np.fft.fft(lam)
    residue = float(np.abs(pmf.imag).max())
    if residue > _IMAG_RESIDUE_TOL:
        raise ValueError(f"imaginary residue {residue:.3e} exceeds {_IMAG_RESIDUE_TOL}")
    out = np.clip(pmf.real, 0.0, None)
    return out / out.sum()


def pbd_pmf_dft(p: np.ndarray, h_max: int = 1024, log_space: bool = False) -> HeartRatePmf:
    """Poisson-binomial PMF of sum(Bernoulli(p_i)) over 0..h_max-1.

    Requires h_max > len(p): the DFT recovers the PMF exactly only when the
    transform length exceeds the distribution's support, otherwise mass folds
    mod h_max.
    """
    p = _validate_probs(p)
    if h_max <= len(p):
        raise ValueError(f"h_max ({h_max}) must exceed the number of trials ({len(p)})")
    return HeartRatePmf(lam=_char_fn_pmf(p, h_max, log_space=log_space), h_max=h_max)


def _pmf_enumerate(p: np.ndarray) -> np.ndarray:
    n = len(p)
    if n > _ENUMERATION_LIMIT:
        raise ValueError(f"enumeration limited to {_ENUMERATION_LIMIT} trials, got {n}")
    outcomes = (np.arange(1 << n)[:, None] >> np.arange(n)) & 1
    probs = np.where(outcomes == 1, p, 1.0 - p).prod(axis=1)
    pmf = np.zeros(n + 1)
    np.add.at(pmf, outcomes.sum(axis=1), probs)
    return pmf


def _pmf_convolve(p: np.ndarray) -> np.ndarray:
    pmf = np.array([1.0 - p[0], p[0]])
    for pk in p[1:]:
        pmf = np.convolve(pmf, [1.0 - pk, pk])
    return pmf


def pbd_pmf_oracle(p: np.ndarray, method: str = "auto") -> HeartRatePmf:
    """Exact reference PMF by subset enumeration or iterated convolution.

    Enumeration evaluates every one of the 2^n outcomes and is capped at
    n = 20; convolution folds [1-p_k, p_k] factors and has no size limit.
    """
    p = _validate_probs(p)
    if method == "auto":
        method = "enumerate" if len(p) <= _ENUMERATION_LIMIT else "convolve"
    if method == "enumerate":
        pmf = _pmf_enumerate(p)
    elif method == "convolve":
        pmf = _pmf_convolve(p)
    else:
        raise ValueError(f"unknown oracle method {method!r}")
    return HeartRatePmf(lam=np.clip(pmf, 0.0, None), h_max=len(p) + 1)


def expected_heart_rate(pmf: HeartRatePmf) -> float:
    """Mean of the beat-count distribution."""
    return float(np.arange(pmf.h_max) @ pmf.lam)


def estimate_window(
    y: np.ndarray, model: ReadoutModel, cfg: ReadoutConfig, h_max: int = 1024
) -> tuple[float, HeartRatePmf]:
    """Expected bpm and full PMF for one inference window of liquid states."""
    p = qrs_probabilities(y, model, cfg.m)
    pmf = pbd_pmf_dft(p, h_max=h_max)
    bpm = expected_heart_rate(pmf)
    if not PLAUSIBLE_BPM_RANGE[0] <= bpm <= PLAUSIBLE_BPM_RANGE[1]:
        logger.warning("estimated %.1f bpm is outside the plausible range %s", bpm, PLAUSIBLE_BPM_RANGE)
    return bpm, pmf


def qrs_detect(p: np.ndarray, si_ms: float, window_start_ms: float = 0.0) -> np.ndarray:
    """Hard-assignment QRS event times from per-window probabilities.

    Windows with p >= 0.5 are marked; each maximal run of consecutive marked
    windows is merged into one event placed at the center of the run's
    highest-probability window.
    """
    p = _validate_probs(np.asarray(p, dtype=float)) if len(p) else np.asarray(p, dtype=float)
    marked = p >= 0.5
    events: list[float] = []
    i = 0
    while i < len(marked):
        if not marked[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(marked) and marked[j + 1]:
            j += 1
        peak = i + int(np.argmax(p[i : j + 1]))
        events.append(window_start_ms + (peak + 0.5) * si_ms)
        i = j + 1
    return np.array(events)
