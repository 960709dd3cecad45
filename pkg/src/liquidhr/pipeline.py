"""Stage orchestration: synth -> encode -> train -> estimate -> qrs -> eval.

Each stage reads and writes plain files so stages can run and cache
independently; `run_pipeline` chains the same stage functions, which keeps a
single-shot run and a stage-wise run byte-identical for a given config and
seed. Estimation replays the input spike train from time zero through the
frozen trained network so the liquid is warm when the first inference window
opens. All artifacts are written atomically.
"""

from __future__ import annotations

import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from liquidhr import ecg, encoder, inference, liquid, metrics, plasticity, readout
from liquidhr.config import PipelineConfig

__all__ = [
    "StageError",
    "PipelineResult",
    "stage_synth",
    "stage_encode",
    "stage_train",
    "stage_estimate",
    "stage_qrs",
    "stage_eval",
    "run_pipeline",
]

logger = logging.getLogger(__name__)

PSO_SEED_OFFSET = 1  # swarm rng decoupled from the topology rng


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require(path: str | Path, stage: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise StageError(stage, f"input file not found: {p}")
    return p


def stage_synth(cfg_synth: ecg.SynthConfig, out_dir: str | Path) -> tuple[Path, Path]:
    """Write a synthetic record and its exact annotations."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    record = ecg.synth_ecg(cfg_synth)
    record_path = out / "record.csv"
    ann_path = out / "annotations.csv"
    _atomic_write(record_path, "".join(f"{v:.6f}\n" for v in record.samples))
    _atomic_write(ann_path, "".join(f"{t:.6f}\n" for t in record.annotations))
    return record_path, ann_path


def _auto_encoder_config(cfg: PipelineConfig, record: ecg.EcgRecord) -> encoder.EncoderConfig:
    delta = cfg["encoder.delta"]
    if delta <= 0:
        delta = encoder.default_delta(record, levels=cfg["encoder.levels"])
    return cfg.encoder(delta)


def stage_encode(cfg: PipelineConfig, record_path: str | Path, out_dir: str | Path) -> tuple[Path, float]:
    """Encode a record into a spike-train CSV; returns the path and the
    achieved data density (bits per spike)."""
    record_path = _require(record_path, "encode")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    record = ecg.load_csv(record_path, fs=cfg["io.fs"])
    ecfg = _auto_encoder_config(cfg, record)
    train_ = encoder.encode(record, ecfg)
    if len(train_) == 0:
        raise StageError("encode", "no spikes produced; check delta against the signal range")
    density = encoder.data_density(record, train_, adc_bits=cfg["io.adc_bits"])
    spikes_path = out / "spikes.csv"
    lines = [f"# duration_ms={train_.duration_ms:.6f}\n"]
    lines += [f"{t:.6f}\n" for t in train_.times_ms]
    _atomic_write(spikes_path, "".join(lines))
    logger.info("encoded %d spikes, data density %.1f bits/spike", len(train_), density)
    return spikes_path, density


def _build_network(cfg: PipelineConfig) -> liquid.LiquidNetwork:
    exc, inh = cfg.neuron_params()
    return liquid.build_liquid(
        cfg.topology(seed=cfg.seed),
        model=cfg.synapse_model(),
        exc_params=exc,
        inh_params=inh,
        rate_tau_exc_s=cfg["homeo.t_avg_exc_s"],
        rate_tau_inh_s=cfg["homeo.t_avg_inh_s"],
        dt_ms=cfg["liquid.dt_ms"],
    )


def stage_train(cfg: PipelineConfig, spikes_path: str | Path, out_dir: str | Path) -> tuple[Path, Path]:
    """Train the liquid over [0, t_i], fit the readout on the training
    window, and export the weight snapshot plus the readout model."""
    spikes_path = _require(spikes_path, "train")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spikes = encoder.load_spike_csv(spikes_path)
    net = _build_network(cfg)
    sched = cfg.schedule()
    rcfg = cfg.readout()
    if sched.t_i_ms < rcfg.hi_ms:
        raise StageError("train", "t_i_ms must cover at least one inference window for readout fitting")

    raster_events: list = []
    plasticity.train(net, spikes, sched, stdp=cfg.stdp_params(), homeo=cfg.homeo_params(),
                     record_raster=raster_events)
    raster = np.array(raster_events, dtype=float).reshape(-1, 2)
    exc_events = raster[(raster[:, 1] < net.n_exc) & (raster[:, 0] < rcfg.hi_ms)] if raster.size else raster
    y_train = readout.bin_states(exc_events, rcfg, window_start_ms=0.0, n_neurons=net.n_exc)
    try:
        model = readout.fit_readout(y_train, rcfg, cfg.pso(seed=cfg.seed + PSO_SEED_OFFSET))
    except ValueError as exc:
        raise StageError("train", str(exc)) from exc

    weights_path = out / "weights.csv"
    model_path = out / "model.json"
    tmp = out / ".weights.tmp.csv"
    liquid.save_weights_csv(net, tmp)
    os.replace(tmp, weights_path)
    readout.save_model(model, model_path, config=cfg.values)
    logger.info("trained liquid over %.0f ms; readout fitness %.3f, %d/%d columns kept",
                sched.t_i_ms, model.j_star, int(model.mask.sum()), net.n_exc)
    return weights_path, model_path


def stage_estimate(
    cfg: PipelineConfig,
    spikes_path: str | Path,
    weights_path: str | Path,
    model_path: str | Path,
    out_dir: str | Path,
) -> Path:
    """Replay the spike train through the frozen network and write one JSON
    line per inference window, plus a diagnostics sidecar."""
    spikes_path = _require(spikes_path, "estimate")
    weights_path = _require(weights_path, "estimate")
    model_path = _require(model_path, "estimate")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    spikes = encoder.load_spike_csv(spikes_path)
    net = _build_network(cfg)
    liquid.load_weights_csv(net, weights_path)
    net.syn_plastic[:] = False
    net.in_plastic[:] = False
    model, _ = readout.load_model(model_path)
    rcfg = cfg.readout()
    sched = cfg.schedule()

    dt = net.dt_ms
    n_ticks = int(math.floor(spikes.duration_ms / dt))
    k0 = int(math.ceil(sched.t_i_ms / rcfg.hi_ms))
    n_windows = int(math.floor(spikes.duration_ms / rcfg.hi_ms))
    if n_windows <= k0:
        raise StageError("estimate", "record too short: no complete inference window after training")

    inp = liquid.spike_ticks(spikes, dt, n_ticks)
    est_start_ms = k0 * rcfg.hi_ms
    raster = _run_recording_from(net, inp, est_start_ms)

    lines = []
    for k in range(k0, n_windows):
        start = k * rcfg.hi_ms
        events = raster[(raster[:, 0] >= start) & (raster[:, 0] < start + rcfg.hi_ms)] if raster.size else raster
        exc_events = events[events[:, 1] < net.n_exc] if events.size else events
        y = readout.bin_states(exc_events, rcfg, window_start_ms=start, n_neurons=net.n_exc)
        p = readout.qrs_probabilities(y, model)
        pmf = inference.pbd_pmf_dft(p, h_max=cfg["inference.h_max"])
        bpm = inference.expected_heart_rate(pmf)
        events_ms = inference.qrs_detect(p, rcfg.si_ms, window_start_ms=start)
        line = {
            "window_index": k,
            "start_ms": start,
            "expected_bpm": round(bpm, 6),
            "qrs_event_times_ms": [round(t, 3) for t in events_ms],
            "plausible": bool(inference.PLAUSIBLE_BPM_RANGE[0] <= bpm <= inference.PLAUSIBLE_BPM_RANGE[1]),
        }
        if cfg["inference.emit_pmf"]:
            line["pmf"] = [float(x) for x in pmf.lam]
        lines.append(json.dumps(line))

    results_path = out / "results.jsonl"
    _atomic_write(results_path, "".join(line + "\n" for line in lines))

    span_s = (n_windows * rcfg.hi_ms - est_start_ms) / 1000.0
    in_window = raster[(raster[:, 0] >= est_start_ms) & (raster[:, 0] < n_windows * rcfg.hi_ms)] if raster.size else raster
    n_exc_spikes = int(np.sum(in_window[:, 1] < net.n_exc)) if in_window.size else 0
    n_inh_spikes = int(np.sum(in_window[:, 1] >= net.n_exc)) if in_window.size else 0
    diagnostics = {
        "mean_excitatory_rate_hz": n_exc_spikes / (net.n_exc * span_s),
        "mean_inhibitory_rate_hz": n_inh_spikes / (net.n_inh * span_s),
        "n_windows": n_windows - k0,
        "estimation_span_s": span_s,
    }
    _atomic_write(out / "diagnostics.json", json.dumps(diagnostics, indent=2) + "\n")
    logger.info("estimated %d windows; mean excitatory rate %.1f Hz",
                n_windows - k0, diagnostics["mean_excitatory_rate_hz"])
    return results_path


def _run_recording_from(net: liquid.LiquidNetwork, inp: np.ndarray, record_from_ms: float) -> np.ndarray:
    events: list[tuple[float, int]] = []
    for tick in range(len(inp)):
        fired = liquid.network_step(net, bool(inp[tick]), tick)
        t_ms = tick * net.dt_ms
        if t_ms >= record_from_ms:
            events.extend((t_ms, int(i)) for i in fired)
    return np.array(events, dtype=float).reshape(-1, 2)


def stage_qrs(results_path: str | Path, out_dir: str | Path) -> Path:
    """Extract the detected QRS event times into a flat one-per-line CSV."""
    results_path = _require(results_path, "qrs")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    times: list[float] = []
    with open(results_path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                times.extend(json.loads(line)["qrs_event_times_ms"])
    qrs_path = out / "qrs_events.csv"
    _atomic_write(qrs_path, "".join(f"{t:.3f}\n" for t in sorted(times)))
    return qrs_path


def stage_eval(
    cfg: PipelineConfig, results_path: str | Path, annotations_path: str | Path, out_dir: str | Path
) -> tuple[Path, Path]:
    """Score the per-window estimates and pooled QRS detections against the
    golden annotations, over the evaluated span only."""
    results_path = _require(results_path, "eval")
    annotations_path = _require(annotations_path, "eval")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    windows = []
    with open(results_path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                windows.append(json.loads(line))
    if not windows:
        raise StageError("eval", "results file has no windows")
    annotations = ecg.load_annotations(annotations_path)
    rcfg = cfg.readout()

    indices = [w["window_index"] for w in windows]
    golden_all = metrics.annotations_to_bpm(annotations, rcfg.hi_ms, n_windows=max(indices) + 1)
    actual = np.array([golden_all[i] for i in indices], dtype=float)
    predicted = np.array([w["expected_bpm"] for w in windows], dtype=float)
    if np.any(actual <= 0):
        raise StageError("eval", "a scored window has no golden beats; annotations do not cover the record")
    mape_pct = metrics.mape(actual, predicted)
    diffs = np.abs(actual - predicted)
    hist = metrics.hr_diff_histogram(diffs, bin_width=cfg["eval.hist_bin_width_bpm"])

    span_lo = min(w["start_ms"] for w in windows)
    span_hi = max(w["start_ms"] for w in windows) + rcfg.hi_ms
    detected = np.array(sorted(t for w in windows for t in w["qrs_event_times_ms"]))
    golden_ms = annotations * 1000.0
    golden_ms = golden_ms[(golden_ms >= span_lo) & (golden_ms < span_hi)]
    qrs = metrics.qrs_score(detected, golden_ms, match_window_ms=cfg["eval.match_window_ms"]) if golden_ms.size else None

    report = metrics.EvalReport(
        mape_pct=mape_pct,
        per_window_abs_diff=[float(d) for d in diffs],
        histogram=hist,
        qrs=qrs,
        extras={"n_windows": len(windows)},
    )
    report_path = out / "report.json"
    hist_path = out / "histogram.csv"
    metrics.save_report_json(report, report_path)
    metrics.save_histogram_csv(hist, hist_path)
    logger.info("MAPE %.2f%% over %d windows", mape_pct, len(windows))
    return report_path, hist_path


@dataclass(frozen=True)
class PipelineResult:
    results_path: Path
    report_path: Path | None
    data_density: float
    diagnostics: dict


def run_pipeline(cfg: PipelineConfig, record_path: str | Path, out_dir: str | Path,
                 annotations_path: str | Path | None = None) -> PipelineResult:
    """Run every stage in order on one record. Raises StageError on the first
    failing stage; artifacts of completed stages remain in out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _require(record_path, "config")
    if annotations_path is not None:
        _require(annotations_path, "config")

    spikes_path, density = stage_encode(cfg, record_path, out)
    weights_path, model_path = stage_train(cfg, spikes_path, out)
    results_path = stage_estimate(cfg, spikes_path, weights_path, model_path, out)
    stage_qrs(results_path, out)
    report_path = None
    if annotations_path is not None:
        report_path, _ = stage_eval(cfg, results_path, annotations_path, out)
    diagnostics = json.loads((out / "diagnostics.json").read_text(encoding="utf-8"))
    return PipelineResult(results_path=results_path, report_path=report_path,
                          data_density=density, diagnostics=diagnostics)
