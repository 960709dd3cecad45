"""Probabilistic readout: state binning, fuzzy two-cluster analysis, and
particle-swarm selection of the neuron subset plus cluster centers.

Liquid activity is summarized as a state matrix of per-window spike counts
(rows = spike-integrate windows, columns = output neurons). A swarm searches
jointly over a soft column mask and the two cluster centers (QRS / no-QRS),
scoring each candidate with the fuzzy within-cluster squared error on the
masked columns. The fitted model is frozen once and reused for every later
inference window.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ReadoutConfig",
    "PsoConfig",
    "FcmModel",
    "ReadoutModel",
    "bin_states",
    "fcm_memberships",
    "fcm_centers",
    "fcm_objective",
    "fcm_fit",
    "binarize",
    "pso_optimize",
    "fit_readout",
    "qrs_probabilities",
    "save_model",
    "load_model",
]


@dataclass(frozen=True)
class ReadoutConfig:
    """Windowing and fuzziness settings.

    The state matrix for one inference window has hi_ms / si_ms rows; columns
    are the output (excitatory) neurons.
    """

    si_ms: float = 100.0
    hi_ms: float = 60_000.0
    m: float = 2.0
    fcm_max_iter: int = 100
    fcm_tol: float = 1e-5

    def __post_init__(self) -> None:
        if not self.si_ms > 0 or not self.hi_ms > 0:
            raise ValueError("si_ms and hi_ms must be positive")
        ratio = self.hi_ms / self.si_ms
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("hi_ms must be divisible by si_ms")
        if not self.m > 1:
            raise ValueError("fuzziness m must exceed 1")

    @property
    def n_s(self) -> int:
        return int(round(self.hi_ms / self.si_ms))


@dataclass(frozen=True)
class PsoConfig:
    n_p: int = 30
    phi1: float = 1.5
    phi2: float = 1.5
    max_iter: int = 100
    tol: float = 1e-4
    v_clamp: float = 0.2  # fraction of per-dimension search range
    seed: int = 0
    stochastic_binarize: bool = False

    def __post_init__(self) -> None:
        if self.n_p < 2:
            raise ValueError("swarm needs at least 2 particles")
        if self.phi1 <= 0 or self.phi2 <= 0:
            raise ValueError("acceleration constants must be positive")


@dataclass(frozen=True)
class FcmModel:
    """Two-cluster fuzzy model: centers plus per-row QRS memberships."""

    c0: np.ndarray
    c1: np.ndarray
    delta: np.ndarray
    j_m: float


@dataclass(frozen=True)
class ReadoutModel:
    """Frozen readout: column mask, oriented centers (c1 = QRS), fitness."""

    mask: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    j_star: float
    m: float


def bin_states(raster: np.ndarray, cfg: ReadoutConfig, window_start_ms: float, n_neurons: int) -> np.ndarray:
    """Count output-neuron spikes per spike-integrate window.

    ``raster`` is an (N, 2) array of (time_ms, neuron_id) events, all of which
    must fall inside [window_start_ms, window_start_ms + hi_ms).
    """
    raster = np.asarray(raster, dtype=float).reshape(-1, 2)
    y = np.zeros((cfg.n_s, n_neurons), dtype=int)
    if raster.size == 0:
        return y
    times = raster[:, 0]
    ids = raster[:, 1].astype(int)
    if np.any(times < window_start_ms) or np.any(times >= window_start_ms + cfg.hi_ms):
        raise ValueError("raster events outside the inference window")
    if np.any(ids < 0) or np.any(ids >= n_neurons):
        raise ValueError("neuron id out of range")
    rows = ((times - window_start_ms) // cfg.si_ms).astype(int)
    np.add.at(y, (rows, ids), 1)
    return y


def _sq_distances(y: np.ndarray, center: np.ndarray) -> np.ndarray:
    diff = y - center[None, :]
    return np.einsum("ij,ij->i", diff, diff)


def fcm_memberships(y_masked: np.ndarray, c0: np.ndarray, c1: np.ndarray, m: float) -> np.ndarray:
    """QRS-cluster membership of every row for fixed centers.

    A row at zero distance from a center belongs to it outright; a row at zero
    distance from both (coincident centers) splits evenly.
    """
    if not m > 1:
        raise ValueError("fuzziness m must exceed 1")
    d0 = _sq_distances(y_masked, np.asarray(c0, dtype=float))
    d1 = _sq_distances(y_masked, np.asarray(c1, dtype=float))
    power = 1.0 / (m - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        a0 = d0**power
        a1 = d1**power
        delta = a0 / (a0 + a1)
    delta = np.where((d0 == 0) & (d1 == 0), 0.5, delta)
    delta = np.where((d1 == 0) & (d0 > 0), 1.0, delta)
    delta = np.where((d0 == 0) & (d1 > 0), 0.0, delta)
    return delta


def fcm_centers(y_masked: np.ndarray, delta: np.ndarray, m: float) -> tuple[np.ndarray, np.ndarray]:
    """Membership-weighted means of the two clusters."""
    w1 = np.asarray(delta, dtype=float) ** m
    w0 = (1.0 - np.asarray(delta, dtype=float)) ** m
    s0, s1 = w0.sum(), w1.sum()
    if s0 == 0.0 or s1 == 0.0:
        raise ValueError("empty cluster: all memberships of one cluster are zero")
    c0 = (w0[:, None] * y_masked).sum(axis=0) / s0
    c1 = (w1[:, None] * y_masked).sum(axis=0) / s1
    return c0, c1


def fcm_objective(y_masked: np.ndarray, delta: np.ndarray, c0: np.ndarray, c1: np.ndarray, m: float) -> float:
    """Fuzzy within-cluster squared error for the two-cluster split."""
    d0 = _sq_distances(y_masked, np.asarray(c0, dtype=float))
    d1 = _sq_distances(y_masked, np.asarray(c1, dtype=float))
    delta = np.asarray(delta, dtype=float)
    return float(((1.0 - delta) ** m @ d0) + (delta**m @ d1))


def fcm_fit(
    y: np.ndarray,
    m: float = 2.0,
    max_iter: int = 100,
    tol: float = 1e-5,
    init_centers: tuple[np.ndarray, np.ndarray] | None = None,
    seed: int = 0,
) -> FcmModel:
    """Plain alternating fuzzy two-means on all columns (no column selection).

    Used as the full-dimension comparator for the swarm-selected readout and
    by tests of the descent property.
    """
    y = np.asarray(y, dtype=float)
    if init_centers is None:
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(y), size=2, replace=False)
        c0, c1 = y[picks[0]].astype(float), y[picks[1]].astype(float)
    else:
        c0, c1 = (np.asarray(c, dtype=float) for c in init_centers)
    prev = np.inf
    delta = fcm_memberships(y, c0, c1, m)
    for _ in range(max_iter):
        c0, c1 = fcm_centers(y, delta, m)
        delta = fcm_memberships(y, c0, c1, m)
        j = fcm_objective(y, delta, c0, c1, m)
        if prev - j <= tol * max(abs(prev), 1.0):
            prev = j
            break
        prev = j
    return FcmModel(c0=c0, c1=c1, delta=delta, j_m=prev)


def binarize(w: np.ndarray, rng: np.random.Generator | None = None, stochastic: bool = False) -> np.ndarray:
    """Turn soft column weights into an on/off mask.

    Deterministic rule: on iff w >= 0.5 (round-half-up). Stochastic rule: on
    with probability sigmoid(w). Either way, an all-zero mask would leave
    nothing to cluster, so the largest-weight column is forced on.
    """
    w = np.asarray(w, dtype=float)
    if stochastic:
        if rng is None:
            raise ValueError("stochastic binarization needs an rng")
        mask = (rng.random(w.shape) < 1.0 / (1.0 + np.exp(-w))).astype(int)
    else:
        mask = (w >= 0.5).astype(int)
    if mask.sum() == 0:
        mask[int(np.argmax(w))] = 1
    return mask


def _decode(theta: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return theta[:n], theta[n : 2 * n], theta[2 * n : 3 * n]


def _fitness(y: np.ndarray, theta: np.ndarray, m: float, rng, stochastic: bool) -> tuple[float, np.ndarray]:
    n = y.shape[1]
    w, c0, c1 = _decode(theta, n)
    mask = binarize(w, rng=rng, stochastic=stochastic)
    yh = y * mask[None, :]
    delta = fcm_memberships(yh, c0, c1, m)
    return fcm_objective(yh, delta, c0, c1, m), mask


def pso_optimize(
    y: np.ndarray, rcfg: ReadoutConfig, pcfg: PsoConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Swarm search over (column weights, center 0, center 1).

    Particles carry a 3n-dimensional position <w, c0, c1>. Velocity and
    position follow the bare update rule (no inertia weight, no random
    multipliers) with per-dimension velocity clamping and reflection at the
    search bounds. Minimizes the masked fuzzy objective; stops at max_iter or
    when the best fitness improves by less than tol (relative) over 10
    iterations. Returns (mask, c0, c1, best fitness).
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or y.shape[0] == 0:
        raise ValueError("state matrix must be a nonempty 2-d array")
    n = y.shape[1]
    rng = np.random.default_rng(pcfg.seed)

    col_lo = y.min(axis=0)
    col_hi = y.max(axis=0)
    lower = np.concatenate([np.zeros(n), col_lo, col_lo])
    upper = np.concatenate([np.ones(n), col_hi, col_hi])
    span = upper - lower
    v_max = pcfg.v_clamp * span

    # Column weights start uniform in [0, 1]; center segments start on data
    # rows rather than uniform in the bounding box, which in a high-dimension
    # count space would place every center far from the data manifold and
    # flatten all memberships to 0.5.
    # Column weights start uniform in [0, 1]. Center segments start on data
    # rows (uniform draws in the bounding box would land every center far off
    # the data manifold in this dimensionality and flatten all memberships to
    # 0.5): c1 candidates come from the high-norm third of rows and c0
    # candidates from the low-norm third, mirroring the larger-norm-is-QRS
    # orientation convention. Coordinates of initially masked columns start
    # at zero so they carry no distance penalty.
    order = np.argsort(np.linalg.norm(y, axis=1))
    third = max(1, len(order) // 3)
    lo_rows = order[:third]
    hi_rows = order[-third:]
    pos = np.empty((pcfg.n_p, 3 * n))
    pos[:, :n] = rng.uniform(0.0, 1.0, size=(pcfg.n_p, n))
    init_mask = pos[:, :n] >= 0.5
    pos[:, n : 2 * n] = y[rng.choice(lo_rows, size=pcfg.n_p)] * init_mask
    pos[:, 2 * n :] = y[rng.choice(hi_rows, size=pcfg.n_p)] * init_mask
    vel = np.zeros_like(pos)

    fits = np.empty(pcfg.n_p)
    for i in range(pcfg.n_p):
        fits[i], _ = _fitness(y, pos[i], rcfg.m, rng, pcfg.stochastic_binarize)
    p_best_pos = pos.copy()
    p_best_fit = fits.copy()
    g_idx = int(np.argmin(p_best_fit))
    g_best_pos = p_best_pos[g_idx].copy()
    g_best_fit = float(p_best_fit[g_idx])
    history = [g_best_fit]

    for _ in range(pcfg.max_iter):
        vel += pcfg.phi1 * (p_best_pos - pos) + pcfg.phi2 * (g_best_pos[None, :] - pos)
        np.clip(vel, -v_max, v_max, out=vel)
        pos += vel
        over = pos > upper
        pos = np.where(over, 2.0 * upper - pos, pos)
        under = pos < lower
        pos = np.where(under, 2.0 * lower - pos, pos)
        vel = np.where(over | under, -vel, vel)
        np.clip(pos, lower, upper, out=pos)

        for i in range(pcfg.n_p):
            f, _ = _fitness(y, pos[i], rcfg.m, rng, pcfg.stochastic_binarize)
            if f < p_best_fit[i]:
                p_best_fit[i] = f
                p_best_pos[i] = pos[i]
        g_idx = int(np.argmin(p_best_fit))
        if p_best_fit[g_idx] < g_best_fit:
            g_best_fit = float(p_best_fit[g_idx])
            g_best_pos = p_best_pos[g_idx].copy()
        history.append(g_best_fit)
        if len(history) > 10:
            old = history[-11]
            if (old - g_best_fit) < pcfg.tol * max(abs(old), 1e-30):
                break

    w, c0, c1 = _decode(g_best_pos, n)
    mask = binarize(w)  # final mask is always the deterministic decode
    return mask, c0.copy(), c1.copy(), g_best_fit


def fit_readout(y_train: np.ndarray, rcfg: ReadoutConfig, pcfg: PsoConfig) -> ReadoutModel:
    """Fit the readout once on the training window's state matrix.

    Cluster labels are exchangeable, so the QRS center (c1) is fixed by
    convention to the one with the larger Euclidean norm: QRS windows carry
    spike bursts and dominate in magnitude.
    """
    y_train = np.asarray(y_train, dtype=float)
    if not np.any(y_train):
        raise ValueError("state matrix is all zeros: nothing to cluster")
    mask, c0, c1, j_star = pso_optimize(y_train, rcfg, pcfg)
    if np.linalg.norm(c0) > np.linalg.norm(c1):
        c0, c1 = c1, c0
    return ReadoutModel(mask=mask, c0=c0, c1=c1, j_star=j_star, m=rcfg.m)


def qrs_probabilities(y: np.ndarray, model: ReadoutModel, m: float | None = None) -> np.ndarray:
    """Per-row probability of belonging to the QRS cluster, using the frozen
    centers on the masked columns."""
    m = model.m if m is None else m
    yh = np.asarray(y, dtype=float) * model.mask[None, :]
    return fcm_memberships(yh, model.c0, model.c1, m)


def save_model(model: ReadoutModel, path: str | Path, config: dict | None = None) -> None:
    payload = {
        "mask": model.mask.astype(int).tolist(),
        "c0": model.c0.tolist(),
        "c1": model.c1.tolist(),
        "j_star": model.j_star,
        "m": model.m,
        "config": config or {},
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> tuple[ReadoutModel, dict]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    model = ReadoutModel(
        mask=np.array(payload["mask"], dtype=int),
        c0=np.array(payload["c0"], dtype=float),
        c1=np.array(payload["c1"], dtype=float),
        j_star=float(payload["j_star"]),
        m=float(payload["m"]),
    )
    return model, payload.get("config", {})
