"""Unsupervised heart-rate estimation from ECG with a spiking liquid and a probabilistic readout.

Pipeline stages: delta-threshold spike encoding of the raw ECG, a recurrent
network of Izhikevich neurons trained with STDP plus homeostatic scaling, a
fuzzy two-cluster readout whose neuron subset and cluster centers are picked by
particle swarm search, and a Poisson-binomial decoder that turns per-window
QRS probabilities into an expected beats-per-minute figure.
"""

from liquidhr.ecg import EcgRecord, SynthConfig, load_annotations, load_csv, resample, synth_ecg
from liquidhr.encoder import EncoderConfig, EncoderState, SpikeTrain, data_density, encode, encoder_step
from liquidhr.inference import HeartRatePmf, expected_heart_rate, pbd_pmf_dft, pbd_pmf_oracle, qrs_detect
from liquidhr.liquid import LiquidNetwork, TopologyConfig, build_liquid, network_step, neuron_step
from liquidhr.metrics import annotations_to_bpm, hr_diff_histogram, mape, qrs_score
from liquidhr.plasticity import HomeostasisParams, StdpParams, TrainSchedule, homeostatic_update, stdp_delta, train
from liquidhr.readout import PsoConfig, ReadoutConfig, ReadoutModel, bin_states, fit_readout, pso_optimize

__all__ = [
    "EcgRecord",
    "EncoderConfig",
    "EncoderState",
    "HeartRatePmf",
    "HomeostasisParams",
    "LiquidNetwork",
    "PsoConfig",
    "ReadoutConfig",
    "ReadoutModel",
    "SpikeTrain",
    "StdpParams",
    "SynthConfig",
    "TopologyConfig",
    "TrainSchedule",
    "annotations_to_bpm",
    "bin_states",
    "build_liquid",
    "data_density",
    "encode",
    "encoder_step",
    "expected_heart_rate",
    "fit_readout",
    "homeostatic_update",
    "hr_diff_histogram",
    "load_annotations",
    "load_csv",
    "mape",
    "network_step",
    "neuron_step",
    "pbd_pmf_dft",
    "pbd_pmf_oracle",
    "pso_optimize",
    "qrs_detect",
    "qrs_score",
    "resample",
    "stdp_delta",
    "synth_ecg",
    "train",
]
