"""Recurrent spiking network: Izhikevich neurons, conductance synapses with
1-2 ms delays, and a sparsely connected excitatory/inhibitory topology.

Wiring follows cortical ratios: four excitatory neurons per inhibitory one,
excitatory neurons may target anybody, inhibitory neurons target only
excitatory neurons, and any inhibitory-to-excitatory synapse whose reverse
excitatory-to-inhibitory synapse exists is pruned. The surviving reciprocal
structure plus a global inhibitory gain realizes a soft winner-take-all.

The network state is stored as flat arrays and advanced one millisecond per
tick; membrane potentials integrate with two half-millisecond forward-Euler
substeps, the standard stable scheme for this neuron model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from liquidhr.encoder import SpikeTrain

__all__ = [
    "NeuronParams",
    "NeuronState",
    "Synapse",
    "TopologyConfig",
    "SynapseModel",
    "LiquidNetwork",
    "build_liquid",
    "neuron_step",
    "synaptic_current",
    "network_step",
    "run_network",
    "spike_ticks",
    "save_weights_csv",
    "load_weights_csv",
    "save_raster_csv",
]

V_PEAK = 30.0  # mV, spike cutoff


@dataclass(frozen=True)
class NeuronParams:
    a: float
    b: float
    c: float
    d: float
    kind: str = "excitatory"

    @staticmethod
    def excitatory() -> "NeuronParams":
        # regular spiking
        return NeuronParams(a=0.02, b=0.2, c=-65.0, d=8.0, kind="excitatory")

    @staticmethod
    def inhibitory() -> "NeuronParams":
        # fast spiking
        return NeuronParams(a=0.1, b=0.2, c=-65.0, d=2.0, kind="inhibitory")


@dataclass
class NeuronState:
    v: float = -65.0
    u: float = -13.0
    g_exc: float = 0.0
    g_inh: float = 0.0
    avg_rate: float = 0.0


@dataclass(frozen=True)
class Synapse:
    pre: int  # -1 marks the input channel
    post: int
    weight: float
    delay: int  # ms, 1 or 2
    plastic: bool
    w_max: float


@dataclass(frozen=True)
class TopologyConfig:
    n_exc: int = 64
    n_inh: int = 16
    p_ee: float = 0.01
    p_ei: float = 0.1
    p_ie: float = 0.1
    p_input: float = 1.0
    w0_mean: float = 0.1
    w0_jitter: float = 0.05
    input_w0_mean: float = 1.2
    input_w0_jitter: float = 0.6
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_inh != round(0.25 * self.n_exc):
            raise ValueError("n_inh must equal round(0.25 * n_exc)")
        for name in ("p_ee", "p_ei", "p_ie", "p_input"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        if self.w0_mean - self.w0_jitter < 0 or self.input_w0_mean - self.input_w0_jitter < 0:
            raise ValueError("weight jitter would produce negative initial weights")


@dataclass(frozen=True)
class SynapseModel:
    """Conductance kinetics: single-exponential decay toward zero, reversal
    potentials, a global current scale, and the soft-WTA inhibitory gain."""

    tau_exc_ms: float = 5.0
    tau_inh_ms: float = 6.0
    e_exc_mv: float = 0.0
    e_inh_mv: float = -70.0
    current_scale: float = 10.0
    inh_gain: float = 2.0


@dataclass
class LiquidNetwork:
    """Mutable network state; step it from exactly one thread at a time."""

    n_exc: int
    n_inh: int
    dt_ms: float
    model: SynapseModel
    # per neuron
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    v: np.ndarray
    u: np.ndarray
    g_exc: np.ndarray
    g_inh: np.ndarray
    avg_rate: np.ndarray
    rate_tau_s: np.ndarray
    # per synapse (recurrent)
    syn_pre: np.ndarray
    syn_post: np.ndarray
    syn_w: np.ndarray
    syn_delay: np.ndarray
    syn_plastic: np.ndarray
    syn_wmax: np.ndarray
    # input channel fan-out
    in_post: np.ndarray
    in_w: np.ndarray
    in_delay: np.ndarray
    in_plastic: np.ndarray
    in_wmax: np.ndarray
    # pending conductance increments: [slot (tick mod 2), exc/inh, neuron]
    buf: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.buf is None:
            self.buf = np.zeros((2, 2, self.n_total))

    @property
    def n_total(self) -> int:
        return self.n_exc + self.n_inh

    @property
    def is_exc(self) -> np.ndarray:
        return np.arange(self.n_total) < self.n_exc

    def synapses(self) -> list[Synapse]:
        """Read-only snapshot of all synapses, input channel rows first
        (pre = -1), then recurrent rows in build order."""
        out = [
            Synapse(-1, int(p), float(w), int(dl), bool(pl), float(wm))
            for p, w, dl, pl, wm in zip(self.in_post, self.in_w, self.in_delay, self.in_plastic, self.in_wmax)
        ]
        out += [
            Synapse(int(pr), int(po), float(w), int(dl), bool(pl), float(wm))
            for pr, po, w, dl, pl, wm in zip(
                self.syn_pre, self.syn_post, self.syn_w, self.syn_delay, self.syn_plastic, self.syn_wmax
            )
        ]
        return out


def _izhikevich(v, u, a, b, c, d, i_syn, dt):
    """Core integration shared by the scalar op and the network step.

    Two 0.5 ms membrane substeps per 1 ms tick, one recovery update per tick;
    threshold crossing resets v to c and bumps u by d.
    """
    n_sub = int(round(dt / 0.5))
    if n_sub not in (1, 2):
        raise ValueError("dt must be 0.5 or 1.0 ms")
    for _ in range(n_sub):
        v = v + 0.5 * (0.04 * v * v + 5.0 * v + 140.0 - u + i_syn)
        # strong hyperpolarizing currents would otherwise shoot v past the
        # lower branch of the quadratic and blow up the Euler step
        v = np.maximum(v, -90.0)
    u = u + dt * a * (b * v - u)
    fired = v >= V_PEAK
    v = np.where(fired, c, v)
    u = np.where(fired, u + d, u)
    return v, u, fired


def neuron_step(state: NeuronState, params: NeuronParams, i_syn: float, dt: float = 1.0) -> tuple[NeuronState, bool]:
    """Advance one neuron by one tick under constant synaptic current."""
    v, u, fired = _izhikevich(state.v, state.u, params.a, params.b, params.c, params.d, i_syn, dt)
    new = NeuronState(v=float(v), u=float(u), g_exc=state.g_exc, g_inh=state.g_inh, avg_rate=state.avg_rate)
    return new, bool(fired)


def synaptic_current(state: NeuronState, model: SynapseModel = SynapseModel()) -> float:
    """Instantaneous conductance-based current into a neuron."""
    drive = state.g_exc * (model.e_exc_mv - state.v)
    brake = model.inh_gain * state.g_inh * (state.v - model.e_inh_mv)
    return (drive - brake) / model.current_scale


def build_liquid(
    cfg: TopologyConfig,
    model: SynapseModel = SynapseModel(),
    exc_params: NeuronParams | None = None,
    inh_params: NeuronParams | None = None,
    rate_tau_exc_s: float = 10.0,
    rate_tau_inh_s: float = 2.0,
    dt_ms: float = 1.0,
) -> LiquidNetwork:
    """Wire a liquid deterministically from the config seed.

    Every ordered E->E, E->I and I->E pair connects independently with its
    probability (no self-loops, never I->I); any I_j -> E_i synapse for which
    E_i -> I_j exists is then pruned. Weights draw uniformly around w0_mean,
    delays uniformly from {1, 2} ms. One input channel fans out to each
    excitatory neuron with probability p_input through plastic synapses.
    """
    rng = np.random.default_rng(cfg.seed)
    n_e, n_i = cfg.n_exc, cfg.n_inh
    n = n_e + n_i
    exc_params = exc_params or NeuronParams.excitatory()
    inh_params = inh_params or NeuronParams.inhibitory()

    ee = rng.random((n_e, n_e)) < cfg.p_ee
    np.fill_diagonal(ee, False)
    ei = rng.random((n_e, n_i)) < cfg.p_ei
    ie = rng.random((n_i, n_e)) < cfg.p_ie
    ie &= ~ei.T  # soft-WTA pruning: no reciprocal I->E for an existing E->I

    pre_list, post_list = [], []
    for i, j in np.argwhere(ee):
        pre_list.append(i)
        post_list.append(j)
    for i, j in np.argwhere(ei):
        pre_list.append(i)
        post_list.append(n_e + j)
    for i, j in np.argwhere(ie):
        pre_list.append(n_e + i)
        post_list.append(j)
    syn_pre = np.array(pre_list, dtype=int)
    syn_post = np.array(post_list, dtype=int)
    n_syn = len(syn_pre)
    syn_w = rng.uniform(cfg.w0_mean - cfg.w0_jitter, cfg.w0_mean + cfg.w0_jitter, size=n_syn)
    syn_delay = rng.integers(1, 3, size=n_syn)

    in_mask = rng.random(n_e) < cfg.p_input
    in_post = np.flatnonzero(in_mask)
    in_w = rng.uniform(cfg.input_w0_mean - cfg.input_w0_jitter, cfg.input_w0_mean + cfg.input_w0_jitter, size=len(in_post))
    in_delay = rng.integers(1, 3, size=len(in_post))

    kind = np.arange(n) < n_e
    a = np.where(kind, exc_params.a, inh_params.a).astype(float)
    b = np.where(kind, exc_params.b, inh_params.b).astype(float)
    c = np.where(kind, exc_params.c, inh_params.c).astype(float)
    d = np.where(kind, exc_params.d, inh_params.d).astype(float)
    v = c.copy()
    u = b * v

    return LiquidNetwork(
        n_exc=n_e,
        n_inh=n_i,
        dt_ms=dt_ms,
        model=model,
        a=a,
        b=b,
        c=c,
        d=d,
        v=v,
        u=u,
        g_exc=np.zeros(n),
        g_inh=np.zeros(n),
        avg_rate=np.zeros(n),
        rate_tau_s=np.where(kind, rate_tau_exc_s, rate_tau_inh_s).astype(float),
        syn_pre=syn_pre,
        syn_post=syn_post,
        syn_w=syn_w,
        syn_delay=syn_delay.astype(int),
        syn_plastic=np.ones(n_syn, dtype=bool),
        syn_wmax=10.0 * syn_w,
        in_post=in_post,
        in_w=in_w,
        in_delay=in_delay.astype(int),
        in_plastic=np.ones(len(in_post), dtype=bool),
        in_wmax=10.0 * in_w,
    )


def network_step(net: LiquidNetwork, input_spike: bool, tick: int) -> np.ndarray:
    """Advance the whole network by one tick; returns the fired neuron ids.

    Per tick: decay conductances, deliver due events from the ring buffer,
    compute currents, integrate all neurons, enqueue outgoing events of the
    neurons that fired (and of the input channel if it spiked) at
    tick + delay, and refresh each neuron's average-rate estimate.
    """
    m = net.model
    net.g_exc *= np.exp(-net.dt_ms / m.tau_exc_ms)
    net.g_inh *= np.exp(-net.dt_ms / m.tau_inh_ms)

    slot = tick % 2
    net.g_exc += net.buf[slot, 0]
    net.g_inh += net.buf[slot, 1]
    net.buf[slot] = 0.0

    i_syn = (net.g_exc * (m.e_exc_mv - net.v) - m.inh_gain * net.g_inh * (net.v - m.e_inh_mv)) / m.current_scale
    net.v, net.u, fired = _izhikevich(net.v, net.u, net.a, net.b, net.c, net.d, i_syn, net.dt_ms)

    if np.any(fired):
        live = fired[net.syn_pre]
        if np.any(live):
            idx = np.flatnonzero(live)
            slots = (tick + net.syn_delay[idx]) % 2
            kinds = (net.syn_pre[idx] >= net.n_exc).astype(int)
            np.add.at(net.buf, (slots, kinds, net.syn_post[idx]), net.syn_w[idx])
    if input_spike and len(net.in_post):
        slots = (tick + net.in_delay) % 2
        np.add.at(net.buf, (slots, 0, net.in_post), net.in_w)

    dt_s = net.dt_ms / 1000.0
    alpha = 1.0 - np.exp(-dt_s / net.rate_tau_s)
    net.avg_rate += alpha * (fired / dt_s - net.avg_rate)

    return np.flatnonzero(fired)


def spike_ticks(train: SpikeTrain, dt_ms: float, n_ticks: int) -> np.ndarray:
    """Boolean input-drive array: True at ticks where the train spikes."""
    ticks = np.zeros(n_ticks, dtype=bool)
    idx = np.round(np.asarray(train.times_ms) / dt_ms).astype(int)
    idx = idx[(idx >= 0) & (idx < n_ticks)]
    ticks[idx] = True
    return ticks


def run_network(
    net: LiquidNetwork, input_ticks: np.ndarray, start_tick: int = 0, record: bool = True
) -> np.ndarray:
    """Step the network over input_ticks[start_tick:]; optionally collect the
    spike raster as an (N, 2) array of (time_ms, neuron_id)."""
    events: list[tuple[float, int]] = []
    for tick in range(start_tick, len(input_ticks)):
        fired = network_step(net, bool(input_ticks[tick]), tick)
        if record:
            t_ms = tick * net.dt_ms
            events.extend((t_ms, int(i)) for i in fired)
    return np.array(events, dtype=float).reshape(-1, 2)


def save_weights_csv(net: LiquidNetwork, path: str | Path) -> None:
    """Snapshot `pre,post,weight,delay` rows; input-channel rows use pre=-1."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("pre,post,weight,delay\n")
        for post, w, dl in zip(net.in_post, net.in_w, net.in_delay):
            fh.write(f"-1,{post},{w!r},{dl}\n")
        for pre, post, w, dl in zip(net.syn_pre, net.syn_post, net.syn_w, net.syn_delay):
            fh.write(f"{pre},{post},{w!r},{dl}\n")


def load_weights_csv(net: LiquidNetwork, path: str | Path) -> None:
    """Install weights from a snapshot into a network with identical wiring
    (same topology config and seed). Raises if the wiring does not line up."""
    rows: list[tuple[int, int, float, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "pre,post,weight,delay":
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            pre_s, post_s, w_s, d_s = line.strip().split(",")
            rows.append((int(pre_s), int(post_s), float(w_s), int(d_s)))
    n_in = len(net.in_post)
    if len(rows) != n_in + len(net.syn_pre):
        raise ValueError(f"{path}: synapse count does not match the network")
    for k, (pre, post, w, dl) in enumerate(rows[:n_in]):
        if pre != -1 or post != net.in_post[k] or dl != net.in_delay[k]:
            raise ValueError(f"{path}: input synapse {k} does not match the network wiring")
        net.in_w[k] = w
    for k, (pre, post, w, dl) in enumerate(rows[n_in:]):
        if pre != net.syn_pre[k] or post != net.syn_post[k] or dl != net.syn_delay[k]:
            raise ValueError(f"{path}: synapse {k} does not match the network wiring")
        net.syn_w[k] = w


def save_raster_csv(raster: np.ndarray, path: str | Path) -> None:
    """Spike raster as `tick_ms,neuron_id` lines."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("tick_ms,neuron_id\n")
        for t, i in np.asarray(raster).reshape(-1, 2):
            fh.write(f"{t:g},{int(i)}\n")
