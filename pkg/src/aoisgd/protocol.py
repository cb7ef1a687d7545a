"""Belief vectors, event-driven flooding and age-of-information bookkeeping.

Everything an agent may look at lives in :class:`BeliefVector` and
:class:`TransmissionPlan`. Global slot indices and ages live in
:class:`AoiBook`, which is owned by the engine and never handed to agents.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInput


@dataclass
class Component:
    value: np.ndarray
    timestamp: int
    origin: int


@dataclass(frozen=True)
class Message:
    origin: int
    value: np.ndarray
    timestamp: int


class BeliefVector:
    """Agent ``owner``'s timestamped copies of every agent's variable."""

    def __init__(self, owner: int, initial_values: Sequence[np.ndarray], timestamp: int = 1):
        self.owner = owner
        self.components = [
            Component(np.array(v, dtype=float), timestamp, j)
            for j, v in enumerate(initial_values)
        ]

    def __len__(self):
        return len(self.components)

    @property
    def nu(self) -> int:
        return self.components[self.owner].timestamp

    def values(self) -> np.ndarray:
        return np.array([c.value for c in self.components])

    def timestamps(self) -> list[int]:
        return [c.timestamp for c in self.components]

    def message(self, origin: int) -> Message:
        c = self.components[origin]
        return Message(origin, c.value, c.timestamp)


def merge_incoming(belief: BeliefVector, received: Iterable[Message]) -> set[int]:
    """Newest-timestamp-wins merge, in place. Returns the changed component ids.

    Stale or equal timestamps are discarded, so the final state does not
    depend on the order of ``received``.
    """
    changed = set()
    n = len(belief)
    for msg in received:
        if not 0 <= msg.origin < n:
            raise InvalidInput(f"origin {msg.origin} out of range")
        stored = belief.components[msg.origin]
        if msg.timestamp > stored.timestamp:
            belief.components[msg.origin] = Component(np.array(msg.value, dtype=float),
                                                      msg.timestamp, msg.origin)
            changed.add(msg.origin)
    return changed


class TransmissionPlan:
    """Per-neighbour FIFO of component ids, at most one entry per id.

    Re-enqueueing an id that is already waiting keeps its place; the value
    sent is read from the belief at transmission time, so it is always the
    newest one.
    """

    def __init__(self, owner: int, neighbors: Iterable[int]):
        self.owner = owner
        self.queues: dict[int, dict[int, None]] = {j: {} for j in sorted(set(neighbors))}

    @property
    def neighbors(self) -> list[int]:
        return list(self.queues)

    def enqueue(self, neighbor: int, component: int) -> None:
        self.queues[neighbor].setdefault(component, None)

    def pending(self, neighbor: int) -> list[int]:
        return list(self.queues[neighbor])

    def dequeue(self, neighbor: int, count: int) -> list[int]:
        q = self.queues[neighbor]
        out = list(q)[:count]
        for c in out:
            del q[c]
        return out


def on_local_update(belief: BeliefVector, new_value, plan: TransmissionPlan | None = None
                    ) -> BeliefVector:
    """Store the owner's new variable with timestamp ``nu + 1`` and schedule it
    toward every neighbour."""
    own = belief.components[belief.owner]
    belief.components[belief.owner] = Component(np.array(new_value, dtype=float),
                                                own.timestamp + 1, belief.owner)
    if plan is not None:
        for j in plan.neighbors:
            plan.enqueue(j, belief.owner)
    return belief


def flood_on_change(plan: TransmissionPlan, changed, neighbors: Iterable[int] | None = None,
                    sender: int | None = None) -> TransmissionPlan:
    """Schedule changed components toward neighbours.

    ``changed`` is a set of component ids (all received from ``sender``) or a
    mapping ``component -> sender``. A component is not sent back to its
    origin nor to the neighbour it arrived from.
    """
    if not isinstance(changed, Mapping):
        changed = {c: sender for c in sorted(changed)}
    targets = plan.neighbors if neighbors is None else [j for j in neighbors if j in plan.queues]
    for comp in sorted(changed):
        src = changed[comp]
        for j in targets:
            if j == comp or j == src:
                continue
            plan.enqueue(j, comp)
    return plan


def transmit_slot(plan: TransmissionPlan, edge: tuple[int, int], success: bool,
                  capacity: int) -> list[int]:
    """Dequeue up to ``capacity`` component ids toward ``edge[1]`` on success."""
    if not success:
        return []
    return plan.dequeue(edge[1], capacity)


# --------------------------------------------------------------------------
# Simulation-side age bookkeeping


@dataclass
class AoiTrace:
    """Ages recorded at the end of every slot ``1..N``.

    ``pair_aoi[n-1, src, dst]`` is the age at ``dst`` of the newest value of
    ``src``, over any path. ``edge_aoi[n-1, e]`` is the same age counting only
    deliveries on edge ``e``. ``link_aoi[n-1, e]`` is the age of the newest
    sender state conveyed over ``e``: a delivery in slot ``t`` carries the
    sender's belief as of the end of slot ``t - 1``.
    """

    edges: list[tuple[int, int]]
    pair_aoi: np.ndarray
    edge_aoi: np.ndarray
    link_aoi: np.ndarray

    @property
    def slots(self) -> np.ndarray:
        return np.arange(1, self.pair_aoi.shape[0] + 1)

    def mean_offdiag(self) -> np.ndarray:
        D = self.pair_aoi.shape[1]
        if D < 2:
            return np.zeros(self.pair_aoi.shape[0])
        total = self.pair_aoi.sum(axis=(1, 2), dtype=np.int64) - np.trace(self.pair_aoi, axis1=1, axis2=2)
        return total / (D * (D - 1))

    def max_offdiag(self) -> np.ndarray:
        D = self.pair_aoi.shape[1]
        if D < 2:
            return np.zeros(self.pair_aoi.shape[0], dtype=np.int64)
        a = self.pair_aoi.copy()
        idx = np.arange(D)
        a[:, idx, idx] = 0
        return a.max(axis=(1, 2))

    def success_age(self) -> np.ndarray:
        """Slots since the last successful slot on each edge (``link_aoi - 1``)."""
        return self.link_aoi - 1


class AoiBook:
    """Production-slot metadata and per-slot age recording for one run."""

    def __init__(self, agent_count: int, edges: Sequence[tuple[int, int]], slot_count: int):
        self.D = agent_count
        self.edges = list(edges)
        self.edge_index = {e: k for k, e in enumerate(self.edges)}
        # production[origin][timestamp] -> global slot the value was produced in
        self.production = [{1: 0} for _ in range(agent_count)]
        self.held = np.zeros((agent_count, agent_count), dtype=np.int64)  # [src, dst]
        self.edge_held = np.zeros(len(self.edges), dtype=np.int64)
        self.link_snapshot = np.zeros(len(self.edges), dtype=np.int64)
        self.pair = np.zeros((slot_count, agent_count, agent_count), dtype=np.int32)
        self.edge = np.zeros((slot_count, len(self.edges)), dtype=np.int32)
        self.link = np.zeros((slot_count, len(self.edges)), dtype=np.int32)

    def produced(self, agent: int, timestamp: int, slot: int) -> None:
        self.production[agent][timestamp] = slot
        self.held[agent, agent] = slot

    def arrived(self, dst: int, origin: int, timestamp: int) -> None:
        self.held[origin, dst] = self.production[origin][timestamp]

    def edge_delivery(self, src: int, dst: int, slot: int, own_timestamp: int | None,
                      flushed: bool) -> None:
        k = self.edge_index[(src, dst)]
        if own_timestamp is not None:
            self.edge_held[k] = max(self.edge_held[k], self.production[src][own_timestamp])
        if flushed:
            self.link_snapshot[k] = slot - 1

    def record(self, slot: int) -> None:
        row = slot - 1
        self.pair[row] = slot - self.held
        if self.edges:
            self.edge[row] = slot - self.edge_held
            self.link[row] = slot - self.link_snapshot

    def trace(self, rows: int | None = None) -> AoiTrace:
        rows = self.pair.shape[0] if rows is None else rows
        return AoiTrace(self.edges, self.pair[:rows], self.edge[:rows], self.link[:rows])


def record_aoi(held_production: np.ndarray, slot: int) -> np.ndarray:
    """Ages ``slot - production slot`` for a matrix of held production slots."""
    return slot - np.asarray(held_production)
