"""Spike-timing-dependent plasticity with homeostatic synaptic scaling.

Weight changes combine two forces: an exponential STDP kernel over nearest
pre/post spike pairings, and a multiplicative scaling term that pushes each
neuron's average firing rate toward a target. Both are modulated by a
rate-dependent factor K that freezes silent neurons and damps updates far
from the target rate. Learning runs only over an initial training interval;
afterwards every synapse is frozen.

Pairing rule (nearest neighbor, one pairing per spike): a post spike pairs
with the most recent pre spike strictly before it, and a pre spike pairs with
the most recent post spike at or before it, so simultaneous spikes are
counted once through the depression branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from liquidhr.encoder import SpikeTrain
from liquidhr.liquid import LiquidNetwork, network_step, spike_ticks

__all__ = [
    "StdpParams",
    "HomeostasisParams",
    "TrainSchedule",
    "stdp_delta",
    "homeostatic_update",
    "train",
]


@dataclass(frozen=True)
class StdpParams:
    a_plus: float
    a_minus: float
    tau_plus: float = 20.0
    tau_minus: float = 20.0
    kind: str = "excitatory"

    @staticmethod
    def excitatory() -> "StdpParams":
        return StdpParams(a_plus=0.1, a_minus=-0.1, kind="excitatory")

    @staticmethod
    def inhibitory() -> "StdpParams":
        return StdpParams(a_plus=-0.1, a_minus=0.1, kind="inhibitory")


@dataclass(frozen=True)
class HomeostasisParams:
    alpha: float  # homeostatic scaling factor
    beta: float  # STDP scaling factor
    r_target: float  # Hz
    t_avg: float  # averaging horizon, seconds
    gamma: float  # damping constant inside K

    def __post_init__(self) -> None:
        if self.beta <= 0 or self.gamma <= 0:
            raise ValueError("beta and gamma must be positive")
        if self.r_target <= 0 or self.t_avg <= 0:
            raise ValueError("r_target and t_avg must be positive")

    @staticmethod
    def excitatory() -> "HomeostasisParams":
        return HomeostasisParams(alpha=0.1, beta=1.0, r_target=35.0, t_avg=10.0, gamma=50.0)

    @staticmethod
    def inhibitory() -> "HomeostasisParams":
        return HomeostasisParams(alpha=0.1, beta=1.0, r_target=3.5, t_avg=2.0, gamma=50.0)


@dataclass(frozen=True)
class TrainSchedule:
    t_i_ms: float = 60_000.0  # learning window: [0, t_i_ms]
    stdp_window_ms: float = 100.0  # pairing horizon

    def __post_init__(self) -> None:
        if self.t_i_ms < 0:
            raise ValueError("t_i_ms must be nonnegative")
        if self.stdp_window_ms <= 0:
            raise ValueError("stdp_window_ms must be positive")


def _stdp_kernel(dt_ms, a_plus, a_minus, tau_plus, tau_minus):
    """Pairing contribution for dt = t_post - t_pre. The depression branch
    uses |dt| in the exponent so the magnitude decays for large separations."""
    dt_ms = np.asarray(dt_ms, dtype=float)
    return np.where(
        dt_ms > 0,
        a_plus * np.exp(-dt_ms / tau_plus),
        a_minus * np.exp(-np.abs(dt_ms) / tau_minus),
    )


def stdp_delta(dt_ms: float, p: StdpParams) -> float:
    """Weight change for a single pre/post pairing, dt = t_post - t_pre."""
    return float(_stdp_kernel(dt_ms, p.a_plus, p.a_minus, p.tau_plus, p.tau_minus))


def _homeostasis(w, r_avg, stdp_accum, alpha, beta, r_target, t_avg, gamma, dt_s, w_max):
    ratio = r_avg / r_target
    k = r_avg / (t_avg * (1.0 + np.abs(1.0 - ratio) * gamma))
    dw = (alpha * w * (1.0 - ratio) + beta * stdp_accum) * k
    return np.clip(w + dw * dt_s, 0.0, w_max)


def homeostatic_update(
    w: float, r_avg: float, stdp_accum: float, h: HomeostasisParams, dt_s: float, w_max: float = 1.0
) -> float:
    """One homeostatically scaled weight update over dt_s seconds."""
    return float(_homeostasis(w, r_avg, stdp_accum, h.alpha, h.beta, h.r_target, h.t_avg, h.gamma, dt_s, w_max))


class _SynapseTable:
    """Per-tick plasticity bookkeeping for one synapse array.

    `w` aliases the network's weight array, so updates apply in place.
    pre = None marks the input channel (treated as an excitatory source).
    """

    def __init__(
        self,
        net: LiquidNetwork,
        pre: np.ndarray | None,
        post: np.ndarray,
        w: np.ndarray,
        plastic: np.ndarray,
        w_max: np.ndarray,
        stdp_exc: StdpParams,
        stdp_inh: StdpParams,
        homeo_exc: HomeostasisParams,
        homeo_inh: HomeostasisParams,
    ) -> None:
        self.pre = pre
        self.post = post
        self.w = w
        self.plastic = plastic
        self.w_max = w_max
        self.accum = np.zeros(len(post))
        pre_inh = np.zeros(len(post), dtype=bool) if pre is None else pre >= net.n_exc
        self.a_plus = np.where(pre_inh, stdp_inh.a_plus, stdp_exc.a_plus)
        self.a_minus = np.where(pre_inh, stdp_inh.a_minus, stdp_exc.a_minus)
        self.tau_plus = np.where(pre_inh, stdp_inh.tau_plus, stdp_exc.tau_plus)
        self.tau_minus = np.where(pre_inh, stdp_inh.tau_minus, stdp_exc.tau_minus)
        post_inh = post >= net.n_exc
        self.alpha = np.where(post_inh, homeo_inh.alpha, homeo_exc.alpha)
        self.beta = np.where(post_inh, homeo_inh.beta, homeo_exc.beta)
        self.r_target = np.where(post_inh, homeo_inh.r_target, homeo_exc.r_target)
        self.t_avg = np.where(post_inh, homeo_inh.t_avg, homeo_exc.t_avg)
        self.gamma = np.where(post_inh, homeo_inh.gamma, homeo_exc.gamma)

    def accumulate(
        self,
        t_ms: float,
        window_ms: float,
        fired: np.ndarray,
        last_spike_ms: np.ndarray,
        pre_fired_now: np.ndarray | bool,
        last_pre_ms: np.ndarray | float,
    ) -> None:
        post_fired = fired[self.post] & self.plastic
        if np.any(post_fired):
            pre_time = np.broadcast_to(last_pre_ms, self.post.shape) if self.pre is None else last_pre_ms[self.pre]
            dt = t_ms - pre_time
            hit = post_fired & (dt > 0) & (dt <= window_ms)
            if np.any(hit):
                self.accum[hit] += self.a_plus[hit] * np.exp(-dt[hit] / self.tau_plus[hit])

        pre_now = (pre_fired_now if self.pre is None else pre_fired_now[self.pre]) & self.plastic
        if np.any(pre_now):
            post_time = np.where(fired[self.post], t_ms, last_spike_ms[self.post])
            gap = t_ms - post_time
            hit = pre_now & (gap >= 0) & (gap <= window_ms)
            if np.any(hit):
                self.accum[hit] += self.a_minus[hit] * np.exp(-gap[hit] / self.tau_minus[hit])

    def apply(self, avg_rate: np.ndarray, dt_s: float) -> None:
        p = self.plastic
        if not np.any(p):
            return
        self.w[p] = _homeostasis(
            self.w[p],
            avg_rate[self.post[p]],
            self.accum[p],
            self.alpha[p],
            self.beta[p],
            self.r_target[p],
            self.t_avg[p],
            self.gamma[p],
            dt_s,
            self.w_max[p],
        )
        self.accum[:] = 0.0


def train(
    net: LiquidNetwork,
    input_train: SpikeTrain,
    sched: TrainSchedule = TrainSchedule(),
    stdp: tuple[StdpParams, StdpParams] | None = None,
    homeo: tuple[HomeostasisParams, HomeostasisParams] | None = None,
    record_raster: list | None = None,
) -> LiquidNetwork:
    """Run the learning phase over [0, t_i_ms] and freeze all synapses.

    Mutates and returns `net`. Pass a list as `record_raster` to collect the
    training-phase spike raster as (time_ms, neuron_id) tuples.
    """
    stdp_exc, stdp_inh = stdp if stdp is not None else (StdpParams.excitatory(), StdpParams.inhibitory())
    homeo_exc, homeo_inh = homeo if homeo is not None else (HomeostasisParams.excitatory(), HomeostasisParams.inhibitory())

    n_ticks = int(round(sched.t_i_ms / net.dt_ms))
    inp = spike_ticks(input_train, net.dt_ms, n_ticks)
    tables = [
        _SynapseTable(net, net.syn_pre, net.syn_post, net.syn_w, net.syn_plastic, net.syn_wmax,
                      stdp_exc, stdp_inh, homeo_exc, homeo_inh),
        _SynapseTable(net, None, net.in_post, net.in_w, net.in_plastic, net.in_wmax,
                      stdp_exc, stdp_inh, homeo_exc, homeo_inh),
    ]

    never = -1e18
    last_spike_ms = np.full(net.n_total, never)
    last_input_ms = never
    fired_mask = np.zeros(net.n_total, dtype=bool)
    dt_s = net.dt_ms / 1000.0

    for tick in range(n_ticks):
        fired_ids = network_step(net, bool(inp[tick]), tick)
        t_ms = tick * net.dt_ms
        fired_mask[:] = False
        fired_mask[fired_ids] = True

        tables[0].accumulate(t_ms, sched.stdp_window_ms, fired_mask, last_spike_ms, fired_mask, last_spike_ms)
        tables[1].accumulate(t_ms, sched.stdp_window_ms, fired_mask, last_spike_ms, bool(inp[tick]), last_input_ms)
        for table in tables:
            table.apply(net.avg_rate, dt_s)

        last_spike_ms[fired_ids] = t_ms
        if inp[tick]:
            last_input_ms = t_ms
        if record_raster is not None:
            record_raster.extend((t_ms, int(i)) for i in fired_ids)

    net.syn_plastic[:] = False
    net.in_plastic[:] = False
    return net
