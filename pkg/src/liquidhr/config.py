"""Flat key=value pipeline configuration.

One namespace for every stage; a config file holds `key = value` lines with
`#` comments, and any key can be overridden on the command line with
`--set key=value`. Values are coerced to the type of the key's default.
Defaults follow the published simulation parameters where those exist and the
documented package choices otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

from liquidhr.encoder import EncoderConfig
from liquidhr.liquid import NeuronParams, SynapseModel, TopologyConfig
from liquidhr.plasticity import HomeostasisParams, StdpParams, TrainSchedule
from liquidhr.readout import PsoConfig, ReadoutConfig

__all__ = ["PipelineConfig", "DEFAULTS", "load_config", "parse_overrides"]

DEFAULTS: dict[str, Any] = {
    "seed": 42,
    # io
    "io.fs": 256.0,
    "io.adc_bits": 12,
    # encoder
    "encoder.timer_interval_ms": 2.0,
    "encoder.delta": 0.0,  # 0 = auto: (p99 - p1) / encoder.levels
    "encoder.levels": 40,
    # topology
    "topology.n_exc": 64,
    "topology.n_inh": 16,
    "topology.p_ee": 0.01,
    "topology.p_ei": 0.1,
    "topology.p_ie": 0.1,
    "topology.p_input": 1.0,
    "topology.w0_mean": 0.1,
    "topology.w0_jitter": 0.05,
    "topology.input_w0_mean": 1.2,
    "topology.input_w0_jitter": 0.6,
    # neuron (regular spiking / fast spiking)
    "neuron.a_exc": 0.02,
    "neuron.b_exc": 0.2,
    "neuron.c_exc": -65.0,
    "neuron.d_exc": 8.0,
    "neuron.a_inh": 0.1,
    "neuron.b_inh": 0.2,
    "neuron.c_inh": -65.0,
    "neuron.d_inh": 2.0,
    # synapse / liquid dynamics
    "liquid.dt_ms": 1.0,
    "liquid.tau_exc_ms": 5.0,
    "liquid.tau_inh_ms": 6.0,
    "liquid.e_exc_mv": 0.0,
    "liquid.e_inh_mv": -70.0,
    "liquid.current_scale": 10.0,
    "liquid.inh_gain": 2.0,
    # plasticity
    "stdp.a_plus_exc": 0.1,
    "stdp.a_minus_exc": -0.1,
    "stdp.a_plus_inh": -0.1,
    "stdp.a_minus_inh": 0.1,
    "stdp.tau_plus_ms": 20.0,
    "stdp.tau_minus_ms": 20.0,
    "homeo.alpha_exc": 0.1,
    "homeo.r_target_exc_hz": 35.0,
    "homeo.t_avg_exc_s": 10.0,
    "homeo.alpha_inh": 0.1,
    "homeo.r_target_inh_hz": 3.5,
    "homeo.t_avg_inh_s": 2.0,
    "homeo.beta": 1.0,
    "homeo.gamma": 50.0,
    "train.t_i_ms": 60_000.0,
    "train.stdp_window_ms": 100.0,
    # readout
    "readout.si_ms": 100.0,
    "readout.hi_ms": 60_000.0,
    "readout.m": 2.0,
    "readout.fcm_max_iter": 100,
    "readout.fcm_tol": 1e-5,
    "pso.n_p": 30,
    "pso.phi1": 1.5,
    "pso.phi2": 1.5,
    "pso.max_iter": 100,
    "pso.tol": 1e-4,
    "pso.v_clamp": 0.2,
    "pso.stochastic_binarize": False,
    # inference
    "inference.h_max": 1024,
    "inference.emit_pmf": False,
    # evaluation
    "eval.match_window_ms": 200.0,
    "eval.hist_bin_width_bpm": 0.7,
}


def _coerce(key: str, raw: str) -> Any:
    if key not in DEFAULTS:
        raise KeyError(f"unknown config key {key!r}")
    default = DEFAULTS[key]
    raw = raw.strip()
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"{key}: cannot parse boolean {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


@dataclass(frozen=True)
class PipelineConfig:
    """Typed view over the flat key space, plus builders for stage configs."""

    values: dict[str, Any]

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    def encoder(self, delta: float) -> EncoderConfig:
        return EncoderConfig(delta=delta, timer_interval_ms=self.values["encoder.timer_interval_ms"])

    def topology(self, seed: int) -> TopologyConfig:
        v = self.values
        return TopologyConfig(
            n_exc=v["topology.n_exc"],
            n_inh=v["topology.n_inh"],
            p_ee=v["topology.p_ee"],
            p_ei=v["topology.p_ei"],
            p_ie=v["topology.p_ie"],
            p_input=v["topology.p_input"],
            w0_mean=v["topology.w0_mean"],
            w0_jitter=v["topology.w0_jitter"],
            input_w0_mean=v["topology.input_w0_mean"],
            input_w0_jitter=v["topology.input_w0_jitter"],
            seed=seed,
        )

    def synapse_model(self) -> SynapseModel:
        v = self.values
        return SynapseModel(
            tau_exc_ms=v["liquid.tau_exc_ms"],
            tau_inh_ms=v["liquid.tau_inh_ms"],
            e_exc_mv=v["liquid.e_exc_mv"],
            e_inh_mv=v["liquid.e_inh_mv"],
            current_scale=v["liquid.current_scale"],
            inh_gain=v["liquid.inh_gain"],
        )

    def neuron_params(self) -> tuple[NeuronParams, NeuronParams]:
        v = self.values
        exc = NeuronParams(a=v["neuron.a_exc"], b=v["neuron.b_exc"], c=v["neuron.c_exc"], d=v["neuron.d_exc"],
                           kind="excitatory")
        inh = NeuronParams(a=v["neuron.a_inh"], b=v["neuron.b_inh"], c=v["neuron.c_inh"], d=v["neuron.d_inh"],
                           kind="inhibitory")
        return exc, inh

    def stdp_params(self) -> tuple[StdpParams, StdpParams]:
        v = self.values
        exc = StdpParams(a_plus=v["stdp.a_plus_exc"], a_minus=v["stdp.a_minus_exc"],
                         tau_plus=v["stdp.tau_plus_ms"], tau_minus=v["stdp.tau_minus_ms"], kind="excitatory")
        inh = StdpParams(a_plus=v["stdp.a_plus_inh"], a_minus=v["stdp.a_minus_inh"],
                         tau_plus=v["stdp.tau_plus_ms"], tau_minus=v["stdp.tau_minus_ms"], kind="inhibitory")
        return exc, inh

    def homeo_params(self) -> tuple[HomeostasisParams, HomeostasisParams]:
        v = self.values
        exc = HomeostasisParams(alpha=v["homeo.alpha_exc"], beta=v["homeo.beta"],
                                r_target=v["homeo.r_target_exc_hz"], t_avg=v["homeo.t_avg_exc_s"],
                                gamma=v["homeo.gamma"])
        inh = HomeostasisParams(alpha=v["homeo.alpha_inh"], beta=v["homeo.beta"],
                                r_target=v["homeo.r_target_inh_hz"], t_avg=v["homeo.t_avg_inh_s"],
                                gamma=v["homeo.gamma"])
        return exc, inh

    def schedule(self) -> TrainSchedule:
        return TrainSchedule(t_i_ms=self.values["train.t_i_ms"], stdp_window_ms=self.values["train.stdp_window_ms"])

    def readout(self) -> ReadoutConfig:
        v = self.values
        return ReadoutConfig(si_ms=v["readout.si_ms"], hi_ms=v["readout.hi_ms"], m=v["readout.m"],
                             fcm_max_iter=v["readout.fcm_max_iter"], fcm_tol=v["readout.fcm_tol"])

    def pso(self, seed: int) -> PsoConfig:
        v = self.values
        return PsoConfig(n_p=v["pso.n_p"], phi1=v["pso.phi1"], phi2=v["pso.phi2"], max_iter=v["pso.max_iter"],
                         tol=v["pso.tol"], v_clamp=v["pso.v_clamp"], seed=seed,
                         stochastic_binarize=v["pso.stochastic_binarize"])

    def dump(self) -> str:
        return "".join(f"{k} = {self.values[k]}\n" for k in sorted(self.values))


def parse_overrides(pairs: list[str]) -> dict[str, Any]:
    """Parse repeated `--set key=value` arguments."""
    out: dict[str, Any] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"override {pair!r} is not of the form key=value")
        key, raw = pair.split("=", 1)
        out[key.strip()] = _coerce(key.strip(), raw)
    return out


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None,
                seed: int | None = None) -> PipelineConfig:
    """Defaults, then the config file, then --set overrides, then --seed."""
    values = dict(DEFAULTS)
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.split("#", 1)[0].strip()
                if not text:
                    continue
                if "=" not in text:
                    raise ValueError(f"{path}: line {lineno}: expected key = value")
                key, raw = text.split("=", 1)
                values[key.strip()] = _coerce(key.strip(), raw)
    if overrides:
        values.update(overrides)
    if seed is not None:
        values["seed"] = int(seed)
    return PipelineConfig(values=values)
