"""Slotted simulation loop and replication runner.

Random streams are split once per run from the scenario seed with
``np.random.SeedSequence(seed).spawn(6)``, in the order topology, fading,
success, clocks, problem, errors. Each stream is consumed in a fixed order,
so a run depends only on the seed and the config.

Default within-slot order (``rx-tick-tx``):

1. draw the topology and the per-edge success events;
2. ticking agents update from their current beliefs and schedule the new value;
3. every successful active edge sends its waiting components, with values
   read before any of this slot's merges;
4. receivers merge in ascending sender order and flood what changed;
5. ages and metrics are recorded.

A component received in slot ``n`` is forwarded in slot ``n + 1`` at the
earliest. ``deliver-first`` moves step 3-4 ahead of step 2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from .optimizer import AgentState, ball_error, poisson_clock_ticks, sgd_step
from .protocol import (AoiBook, AoiTrace, BeliefVector, TransmissionPlan, flood_on_change,
                       merge_incoming, on_local_update, transmit_slot)
from .scenario import Scenario

STREAMS = ("topology", "fading", "success", "clocks", "problem", "errors")


def spawn_streams(seed: int) -> dict[str, np.random.Generator]:
    children = np.random.SeedSequence(int(seed)).spawn(len(STREAMS))
    return {name: np.random.default_rng(c) for name, c in zip(STREAMS, children)}


def replication_seeds(master: int, count: int) -> list[int]:
    """Seed ``r`` is the first 64-bit word of the ``r``-th child of ``SeedSequence(master)``."""
    kids = np.random.SeedSequence(int(master)).spawn(count)
    return [int(k.generate_state(1, np.uint64)[0]) for k in kids]


@dataclass
class ChannelRecord:
    topology: np.ndarray  # (N,) sampled graph index
    success: np.ndarray  # (N, K) success per edge slot of the sampled graph
    edge_count: np.ndarray  # (N,) edges in the sampled graph
    latent: np.ndarray | None = None  # (N,)
    states: np.ndarray | None = None  # (N, C)
    success_probability: np.ndarray | None = None  # (N, C)


@dataclass
class RunTrace:
    slot_count: int
    objective: np.ndarray
    penalty: np.ndarray
    max_target_error: np.ndarray
    target_error_final: np.ndarray
    nu: np.ndarray  # (N, D) local updates completed by end of slot
    positions: np.ndarray  # (N, D, dim) own iterates at end of slot
    aoi: AoiTrace
    success_count: np.ndarray
    channels: ChannelRecord
    optimizer_log: list = field(default_factory=list)
    message_log: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    coalesced_fraction: np.ndarray | None = None
    sup_norm: float = 0.0
    seed: int = 0

    @property
    def final_positions(self) -> np.ndarray:
        return self.positions[-1]

    @property
    def mean_aoi(self) -> np.ndarray:
        return self.aoi.mean_offdiag()

    @property
    def max_aoi(self) -> np.ndarray:
        return self.aoi.max_offdiag()


# --------------------------------------------------------------------------
# Pre-drawn randomness


def draw_ticks(sc: Scenario, rng: np.random.Generator):
    """(N, D) tick mask and per-agent coalesced fractions."""
    N, D = sc.slot_count, sc.agent_count
    mask = np.zeros((N, D), dtype=bool)
    coalesced = np.zeros(D)
    notes = []
    if sc.clock_kind == "every_slot":
        mask[:] = True
    elif sc.clock_kind == "poisson":
        for i in range(D):
            if sc.clock_rates[i] <= 0:
                continue
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                tr = poisson_clock_ticks(float(sc.clock_rates[i]), N, sc.slot_duration, rng)
            mask[tr.slots - 1, i] = True
            coalesced[i] = tr.coalesced_fraction
            if caught:
                notes.append(i)
        if notes:
            notes = [f"clock ticks coalesced into shared slots for {len(notes)} of {D} agents "
                     f"(worst {coalesced.max():.1%}); the slot duration is coarse for the "
                     f"clock rate"]
    return mask, coalesced, notes


def _draw_channels(sc: Scenario, streams) -> ChannelRecord:
    N = sc.slot_count
    graphs = sc.topology.graphs
    from .graph import sample_topology_indices
    topo = sample_topology_indices(sc.topology, N, streams["topology"])
    counts = np.array([len(g.edges) for g in graphs], dtype=np.int64)[topo]
    K = max(len(g.edges) for g in graphs)
    setup = sc.channel
    rec = ChannelRecord(topo, np.zeros((N, K), dtype=bool), counts)
    if setup.mode == "lossless":
        rec.success[:] = np.arange(K)[None, :] < counts[:, None]
    elif setup.mode == "probability":
        bank = setup.bank.copy()
        ft = ch.simulate_fading(bank, np.arange(1, N + 1), streams["fading"])
        rec.latent, rec.states, rec.success_probability = ft.latent, ft.states, ft.success_probability
        u = streams["success"].random((N, K))
        chan = np.arange(K) % setup.channel_count
        p = ft.success_probability[:, chan]
        rec.success[:] = (u < p) & (np.arange(K)[None, :] < counts[:, None])
    else:
        rec.success[:] = _sinr_success(sc, topo, streams["success"])
    return rec


def _sinr_success(sc: Scenario, topo: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Per-slot SINR events with exponential attenuations and epsilon-greedy powers.

    Every sender of an active edge transmits. Draw order per slot: one power
    draw per transmitter (ascending id), then for each edge in declared order
    one attenuation per transmitter (ascending id).
    """
    model = sc.channel.sinr_model
    phys = model.physics
    graphs = sc.topology.graphs
    K = max(len(g.edges) for g in graphs)
    out = np.zeros((len(topo), K), dtype=bool)
    for n, gi in enumerate(topo):
        g = graphs[gi]
        senders = sorted({e[0] for e in g.edges})
        others = len(senders) - 1
        mean_in = others * model.fallback_power * model.interference_mean + phys.noise_floor
        power = {s: ch.epsilon_greedy_power(mean_in, model.signal_mean, phys.sinr_threshold,
                                            model.epsilon, model.delta, model.fallback_power, rng)
                 for s in senders}
        for k, (i, j) in enumerate(g.edges):
            tx = {}
            for s in senders:
                mean = model.signal_mean if s == i else model.interference_mean
                tx[s] = (power[s], rng.exponential(mean))
            out[n, k] = ch.success_event(ch.sinr((i, j), tx, phys), phys.sinr_threshold)
    return out


# --------------------------------------------------------------------------
# Main loop


def run(sc: Scenario, *, record_log: bool | None = None) -> RunTrace:
    """Simulate ``sc`` and return its trace. Deterministic given the scenario."""
    N, D = sc.slot_count, sc.agent_count
    if N < 1:
        raise ValueError("slot_count must be at least 1")
    record_log = sc.record_log if record_log is None else record_log
    streams = spawn_streams(sc.seed)
    chan = _draw_channels(sc, streams)
    ticks, coalesced, notes = draw_ticks(sc, streams["clocks"])
    prob_rng, err_rng = streams["problem"], streams["errors"]

    union = sc.topology.union()
    succ = union.successors()
    x0 = np.asarray(sc.initial_positions, dtype=float)
    dim = x0.shape[1]
    agents = [AgentState(x0[i].copy(), 1, float(sc.clock_rates[i]), sc.error_bound) for i in range(D)]
    beliefs = [BeliefVector(i, x0) for i in range(D)]
    plans = [TransmissionPlan(i, succ[i]) for i in range(D)]
    book = AoiBook(D, union.edges, N)
    graph_edges = [g.edges for g in sc.topology.graphs]

    objective = np.empty(N)
    penalty = np.empty(N)
    max_te = np.empty(N)
    nu = np.empty((N, D), dtype=np.int32)
    positions = np.empty((N, D, dim))
    success_count = np.zeros(N, dtype=np.int64)
    opt_log: list = []
    msg_log: list = []
    problem = sc.problem
    shared_xi = sc.xi_mode == "shared"
    sup = float(np.max(np.linalg.norm(x0, axis=1)))
    own = x0.copy()
    cached = problem.evaluate(own)
    last_te = cached["target_error"]
    capacity = sc.channel.capacity
    deliver_first = sc.event_order == "deliver-first"

    def tick_phase(n):
        nonlocal sup
        tickers = np.flatnonzero(ticks[n - 1])
        xi = problem.sample_xi(prob_rng) if shared_xi else None
        for i in tickers:
            ag = agents[i]
            nu_before = ag.nu
            xi_i = xi if shared_xi else problem.sample_xi(prob_rng)
            new_x, info = sgd_step(ag, beliefs[i], xi_i, problem, sc.schedule, prob_rng, err_rng)
            on_local_update(beliefs[i], new_x, plans[i])
            book.produced(i, ag.nu, n)
            own[i] = new_x
            norm = float(np.linalg.norm(new_x))
            sup = max(sup, norm)
            opt_log.append((n, int(i), nu_before, info.a, info.b, norm, info.grad_f_norm,
                            info.grad_p_norm))
            if record_log:
                msg_log.append(("produce", n, int(i)))
        return len(tickers)

    def transmit_phase(n):
        edges = graph_edges[chan.topology[n - 1]]
        ok = chan.success[n - 1]
        outgoing = []
        for k, (s, r) in enumerate(edges):
            if not ok[k]:
                continue
            comps = transmit_slot(plans[s], (s, r), True, capacity)
            flushed = not plans[s].queues[r]
            msgs = [beliefs[s].message(c) for c in comps]
            outgoing.append((s, r, msgs, flushed))
        success_count[n - 1] = len(outgoing)
        outgoing.sort(key=lambda t: t[0])
        for s, r, msgs, flushed in outgoing:
            changed = merge_incoming(beliefs[r], msgs)
            own_ts = None
            for m in msgs:
                if m.origin == s:
                    own_ts = m.timestamp
                if m.origin in changed:
                    book.arrived(r, m.origin, m.timestamp)
            book.edge_delivery(s, r, n, own_ts, flushed)
            if changed:
                flood_on_change(plans[r], changed, sender=s)
            if record_log:
                items = [(m.origin, book.production[m.origin][m.timestamp]) for m in msgs]
                msg_log.append(("deliver", n, s, r, items))
                if flushed:
                    msg_log.append(("flush", n, s, r))

    for n in range(1, N + 1):
        if deliver_first:
            transmit_phase(n)
            changed_x = tick_phase(n)
        else:
            changed_x = tick_phase(n)
            transmit_phase(n)
        book.record(n)
        if changed_x:
            cached = problem.evaluate(own)
            last_te = cached["target_error"]
        objective[n - 1] = cached["objective"]
        penalty[n - 1] = cached["penalty"]
        max_te[n - 1] = float(np.max(last_te)) if len(last_te) else 0.0
        for i in range(D):
            nu[n - 1, i] = agents[i].nu - 1
        positions[n - 1] = own

    return RunTrace(N, objective, penalty, max_te, np.asarray(last_te), nu, positions,
                    book.trace(), success_count, chan, opt_log, msg_log, notes, coalesced,
                    sup, sc.seed)


# --------------------------------------------------------------------------
# Reference and replication


@dataclass
class ReferenceTrace:
    objective: np.ndarray
    penalty: np.ndarray
    positions: np.ndarray
    nu: np.ndarray


def centralized_reference(sc: Scenario) -> ReferenceTrace:
    """Zero-delay form of the update: every ticking agent steps from the true
    iterates of the previous slot. Consumes the clock, problem and error
    streams exactly as :func:`run` does."""
    N, D = sc.slot_count, sc.agent_count
    streams = spawn_streams(sc.seed)
    ticks, _, _ = draw_ticks(sc, streams["clocks"])
    prob_rng, err_rng = streams["problem"], streams["errors"]
    problem = sc.problem
    x = np.asarray(sc.initial_positions, dtype=float).copy()
    dim = x.shape[1]
    counts = np.ones(D, dtype=np.int64)
    objective = np.empty(N)
    penalty = np.empty(N)
    positions = np.empty((N, D, dim))
    nu = np.empty((N, D), dtype=np.int32)
    cached = problem.evaluate(x)
    shared_xi = sc.xi_mode == "shared"
    for n in range(1, N + 1):
        tickers = np.flatnonzero(ticks[n - 1])
        xi = problem.sample_xi(prob_rng) if shared_xi else None
        prev = x.copy()
        for i in tickers:
            xi_i = xi if shared_xi else problem.sample_xi(prob_rng)
            gf, gp = problem.agent_gradients(prev, i, xi_i, prob_rng)
            err = ball_error(dim, sc.error_bound, err_rng)
            a = sc.schedule.a(int(counts[i]))
            b = sc.schedule.b(int(counts[i]))
            x[i] = prev[i] - a * (b * gf + gp + err)
            counts[i] += 1
        if len(tickers):
            cached = problem.evaluate(x)
        objective[n - 1] = cached["objective"]
        penalty[n - 1] = cached["penalty"]
        positions[n - 1] = x
        nu[n - 1] = counts - 1
    return ReferenceTrace(objective, penalty, positions, nu)


@dataclass
class Aggregate:
    columns: dict[str, np.ndarray]  # name -> (N,) mean
    stderr: dict[str, np.ndarray]
    replications: int


SERIES = ("objective", "penalty", "max_target_error", "mean_aoi", "max_aoi")


def _series(tr: RunTrace, name: str) -> np.ndarray:
    return np.asarray(getattr(tr, name), dtype=float)


def aggregate(traces: list[RunTrace]) -> Aggregate:
    R = len(traces)
    means, ses = {}, {}
    for name in SERIES:
        stack = np.array([_series(t, name) for t in traces])
        means[name] = stack.mean(axis=0)
        ses[name] = stack.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.zeros(stack.shape[1])
    return Aggregate(means, ses, R)


def replicate(sc: Scenario, replication_count: int, **run_kwargs):
    """Independent runs with seeds from :func:`replication_seeds`; returns
    ``(traces, aggregate, seeds)``. Runs are sequential; each is independent,
    so the order does not affect results."""
    if replication_count < 1:
        raise ValueError("replication_count must be at least 1")
    seeds = replication_seeds(sc.seed, replication_count)
    traces = [run(sc.with_seed(s), **run_kwargs) for s in seeds]
    return traces, aggregate(traces), seeds
