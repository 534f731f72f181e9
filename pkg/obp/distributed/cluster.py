"""
Simulated cluster of nodes, each owning one address interval of a distributed Pauli sum.

Node-local work runs between barriers (optionally on a thread pool in a seeded order); every
cross-node effect is a message on the bus. Node 0 doubles as the master for collective
operations.
"""

import logging
import math
from bisect import bisect_left, bisect_right
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import accumulate

import numpy as np

from obp.circuit.gates import Slice
from obp.distributed.bus import Message, MessageBus, MessageKind, MessageRecord, TransportKind
from obp.distributed.partition import PartitionMap, route
from obp.distributed.wire import TermBatch
from obp.engine.conjugation import conjugate_slice
from obp.engine.truncation import Norm, check_budget, fits_budget, term_weight, weight_to_norm
from obp.errors import ClusterStateError
from obp.pauli.core import PauliAddress, PauliSum
from obp.utils.log_utils import MASTER_NODE, master_log

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

SortKey = tuple[float, PauliAddress]


@dataclass
class NodeState:
    node_id: int
    local: PauliSum
    sent_messages: int = 0
    received_messages: int = 0


@dataclass(frozen=True)
class TruncationRecord:
    rounds: int
    bisections: int
    removed_terms: int
    removed_weight: float


class ClusterRun:
    def __init__(self, nodes: list[NodeState], partition: PartitionMap, bus: MessageBus, seed: int = 0, workers: int = 1):
        if len(nodes) != partition.R:
            raise ClusterStateError(f"{len(nodes)} nodes for a partition into {partition.R} intervals")
        self.nodes = nodes
        self.partition = partition
        self.bus = bus
        self.seed = seed
        self.workers = workers
        self.truncations: list[TruncationRecord] = []
        self.last_removed: PauliSum = PauliSum(partition.n)

    @classmethod
    def create(cls, observable: PauliSum, R: int, transport: TransportKind | str = TransportKind.inproc, seed: int = 0, workers: int = 1) -> "ClusterRun":
        """Even partition of the address space; the master scatters ``observable`` to the owners."""
        n = observable.n
        partition = PartitionMap.even(n, R)
        cluster = cls([NodeState(r, PauliSum(n)) for r in range(R)], partition, MessageBus(n, transport), seed, workers)
        keep, outgoing = _split_by_owner(observable.items(), partition, MASTER_NODE)
        cluster.nodes[MASTER_NODE].local = PauliSum.adopt(n, keep)
        for owner in sorted(outgoing):
            cluster.send(MASTER_NODE, owner, MessageKind.scatter, TermBatch(n, tuple(outgoing[owner])))
        inboxes = cluster.barrier()
        cluster.run_nodes(lambda node: _merge_terms(node, inboxes.get(node.node_id, [])))
        cluster.check_ownership()
        return cluster

    @property
    def n(self) -> int:
        return self.partition.n

    @property
    def R(self) -> int:
        return self.partition.R

    @property
    def message_log(self) -> list[MessageRecord]:
        return self.bus.log

    def send(self, sender: int, recipient: int, kind: MessageKind, payload) -> None:
        self.nodes[sender].sent_messages += 1
        self.bus.post(sender, recipient, kind, payload)

    def barrier(self) -> dict[int, list[Message]]:
        inboxes = self.bus.barrier()
        for recipient, messages in inboxes.items():
            self.nodes[recipient].received_messages += len(messages)
        return inboxes

    def run_nodes(self, step: Callable[[NodeState], object]) -> list:
        """Run ``step`` on every node in a seeded order; results are returned by node id."""
        order = np.random.default_rng([self.seed, self.bus.round]).permutation(self.R).tolist()
        if self.workers > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                futures = {r: pool.submit(step, self.nodes[r]) for r in order}
                return [futures[r].result() for r in range(self.R)]
        results = {r: step(self.nodes[r]) for r in order}
        return [results[r] for r in range(self.R)]

    def loads(self) -> list[int]:
        return [len(node.local) for node in self.nodes]

    def total_terms(self) -> int:
        return sum(self.loads())

    def gather(self) -> PauliSum:
        """Global sum in ascending address order."""
        merged: dict[PauliAddress, float] = {}
        for node in self.nodes:
            merged.update(node.local.items())
        return PauliSum.adopt(self.n, dict(sorted(merged.items())))

    def check_ownership(self) -> None:
        for node in self.nodes:
            lo, hi = self.partition.interval(node.node_id)
            stray = [a for a in node.local.addresses() if not lo <= a < hi]
            if stray:
                raise ClusterStateError(f"Node {node.node_id} holds {len(stray)} addresses outside [{lo}, {hi}), e.g. {stray[0]}")

    def close(self):
        self.bus.close()


def _split_by_owner(items, partition: PartitionMap, me: int) -> tuple[dict[PauliAddress, float], dict[int, list[tuple[PauliAddress, float]]]]:
    lo, hi = partition.interval(me)
    keep: dict[PauliAddress, float] = {}
    outgoing: dict[int, list[tuple[PauliAddress, float]]] = {}
    for address, coeff in items:
        if lo <= address < hi:
            keep[address] = coeff
        else:
            outgoing.setdefault(route(address, partition), []).append((address, coeff))
    return keep, outgoing


def _merge_terms(node: NodeState, inbox: list[Message]) -> None:
    for message in inbox:
        for address, coeff in message.payload.items:
            node.local.add(address, coeff)


def _exchange(cluster: ClusterRun, kind: MessageKind, partition: PartitionMap) -> int:
    """Route every node's terms to their owners under ``partition``; returns the message count."""
    start = len(cluster.message_log)

    def send_step(node: NodeState):
        keep, outgoing = _split_by_owner(node.local.items(), partition, node.node_id)
        node.local = PauliSum.adopt(cluster.n, keep)
        for owner in sorted(outgoing):
            cluster.send(node.node_id, owner, kind, TermBatch(cluster.n, tuple(outgoing[owner])))

    cluster.run_nodes(send_step)
    inboxes = cluster.barrier()
    cluster.run_nodes(lambda node: _merge_terms(node, inboxes.get(node.node_id, [])))
    return len(cluster.message_log) - start


def parallel_conjugate_slice(cluster: ClusterRun, slice_: Slice) -> ClusterRun:
    """
    Every node conjugates its own terms, then sends at most one batch to each other node with
    the emitted terms that node owns; duplicates are summed on arrival.
    """
    cluster.run_nodes(lambda node: setattr(node, "local", conjugate_slice(node.local, slice_)))
    _exchange(cluster, MessageKind.terms, cluster.partition)
    cluster.check_ownership()
    return cluster


def _balanced_ranks(loads: list[int]) -> list[int]:
    """Global rank of the first term of every node after balancing: floor/ceil(L/R) per node."""
    total, R = sum(loads), len(loads)
    targets = [total // R + (1 if r < total % R else 0) for r in range(R)]
    return list(accumulate(targets, initial=0))


def rebalance(cluster: ClusterRun) -> ClusterRun:
    """
    Move boundaries so every node holds floor(L/R) or ceil(L/R) terms.

    The master gathers loads and broadcasts them together with the order statistics each node
    has to look up; the node holding the term of global rank C_b reports its address as the new
    boundary B'_b; the master broadcasts the final boundaries and terms migrate to their new
    owners. At most 6(R - 1) messages are exchanged in total. With fewer terms than nodes the
    partition is kept after the load gather.
    """
    R, n = cluster.R, cluster.n

    for node in cluster.nodes:
        if node.node_id != MASTER_NODE:
            cluster.send(node.node_id, MASTER_NODE, MessageKind.load, [len(node.local)])
    inbox = cluster.barrier().get(MASTER_NODE, [])
    loads = [len(cluster.nodes[MASTER_NODE].local)] + [0] * (R - 1)
    for message in inbox:
        loads[message.sender] = int(message.payload[0])
    total = sum(loads)
    if total == 0:
        raise ClusterStateError("Cannot rebalance an empty cluster")
    if total < R:
        # strictly increasing boundaries need a term to start every node
        master_log(logger, f"Kept the partition: {total} terms cannot cover {R} nodes", level=logging.DEBUG)
        return cluster

    ranks = _balanced_ranks(loads)
    held = list(accumulate(loads, initial=0))
    requests: dict[int, list[list[int]]] = {r: [] for r in range(R)}
    for b in range(1, R):
        holder = bisect_right(held, ranks[b]) - 1
        requests[holder].append([b, ranks[b] - held[holder]])
    for r in range(1, R):
        cluster.send(MASTER_NODE, r, MessageKind.load, {"loads": loads, "requests": requests[r]})
    inboxes = cluster.barrier()

    def lookup(node: NodeState, wanted: list[list[int]]) -> list[list[int]]:
        ordered = sorted(node.local.addresses())
        return [[b, ordered[offset]] for b, offset in wanted]

    found = {MASTER_NODE: lookup(cluster.nodes[MASTER_NODE], requests[MASTER_NODE])}

    def report(node: NodeState):
        if node.node_id == MASTER_NODE:
            return
        wanted = next(m.payload["requests"] for m in inboxes.get(node.node_id, []))
        values = lookup(node, wanted)
        if values:
            cluster.send(node.node_id, MASTER_NODE, MessageKind.boundary, values)

    cluster.run_nodes(report)
    for message in cluster.barrier().get(MASTER_NODE, []):
        found[message.sender] = message.payload

    boundaries = [0] * R + [1 << (2 * n)]
    for values in found.values():
        for b, address in values:
            boundaries[b] = address
    partition = PartitionMap(n, tuple(boundaries))
    for r in range(1, R):
        cluster.send(MASTER_NODE, r, MessageKind.boundary, list(partition.boundaries))
    cluster.barrier()

    cluster.partition = partition
    _exchange(cluster, MessageKind.migrate, partition)
    cluster.check_ownership()
    master_log(logger, f"Rebalanced {total} terms over {R} nodes: loads {cluster.loads()}", level=logging.DEBUG)
    return cluster


@dataclass
class _TruncationView:
    """One node's sorted truncation keys with its window [lo, hi) of undecided keys."""

    keys: list[SortKey]
    prefix: list[float]
    lo: int = 0
    hi: int = 0
    pending: tuple[int, int] = (0, 0)

    @classmethod
    def build(cls, s: PauliSum, norm: Norm) -> "_TruncationView":
        keys = sorted((abs(c), a) for a, c in s.items())
        prefix = list(accumulate((term_weight(m, norm) for m, _ in keys), initial=0.0))
        return cls(keys, prefix, 0, len(keys))

    def median(self, lo: int, hi: int) -> dict:
        key = list(self.keys[lo + (hi - lo - 1) // 2]) if hi > lo else None
        return {"median": key, "size": hi - lo}

    def apply(self, decision: str | None):
        match decision:
            case None:
                pass
            case "lo":
                self.lo = self.pending[1]
            case "hi":
                self.hi = self.pending[0]
            case _:
                raise ClusterStateError(f"Unknown truncation decision {decision!r}")

    def propose(self, key: SortKey) -> dict:
        left = bisect_left(self.keys, key, self.lo, self.hi)
        right = bisect_right(self.keys, key, self.lo, self.hi)
        self.pending = (left, right)
        return {"weight": self.prefix[right], "left": self.median(self.lo, left), "right": self.median(right, self.hi)}


def _weighted_median(summaries: list[dict]) -> SortKey:
    entries = sorted((tuple(s["median"]), s["size"]) for s in summaries if s["size"] > 0)
    half = sum(size for _, size in entries) / 2
    running = 0
    for key, size in entries:
        running += size
        if running >= half:
            return key
    return entries[-1][0]


def distributed_truncate(cluster: ClusterRun, budget: float, norm: Norm | str) -> tuple[ClusterRun, float]:
    """
    Remove globally the same terms as centralized truncation: the longest prefix of the
    (|c|, address) order whose norm fits ``budget``.

    The master bisects over node-reported window medians for at most ceil(log2 |S|) - 2
    rounds, then gathers the undecided keys once and settles the threshold exactly. Each
    broadcast carries the previous round's decision, so the exchange takes at most
    ceil(log2 |S|) + 2 rounds.

    The size-weighted median of per-node medians has at least a quarter of the undecided
    keys on each side, so a round shrinks the window to at most 3/4 of its size, not half.
    Skewed partitions can leave more keys for the final gather than an exact global median
    would; the round count does not change.

    Prefix weights are accumulated per node in local sort order and summed across nodes in
    node order, while the centralized split accumulates in global order. The two sums differ
    only by float rounding, so the removed set matches the centralized one unless the
    cumulative weight at the cut lies within that rounding of the budget tolerance. With one
    node the sums are bit-identical.
    """
    check_budget(budget)
    norm = Norm(norm)
    R = cluster.R
    views = cluster.run_nodes(lambda node: _TruncationView.build(node.local, norm))
    rounds = 0

    def broadcast(kind: MessageKind, payload: dict) -> dict[int, list[Message]]:
        for r in range(1, R):
            cluster.send(MASTER_NODE, r, kind, payload)
        return cluster.barrier()

    def collect(kind: MessageKind, step: Callable[[NodeState], dict]) -> list[dict]:
        """Every node answers the master; replies come back ordered by node id."""

        def answer(node: NodeState) -> dict:
            reply = step(node)
            if node.node_id != MASTER_NODE:
                cluster.send(node.node_id, MASTER_NODE, kind, reply)
            return reply

        replies = cluster.run_nodes(answer)
        inbox = cluster.barrier().get(MASTER_NODE, [])
        return [replies[MASTER_NODE]] + [m.payload for m in inbox]

    def exchange(kind: MessageKind, payload: dict, step: Callable[[_TruncationView, dict], dict]) -> list[dict]:
        inboxes = broadcast(kind, payload)

        def answer(node: NodeState) -> dict:
            received = payload if node.node_id == MASTER_NODE else inboxes[node.node_id][0].payload
            view = views[node.node_id]
            view.apply(received["apply"])
            return step(view, received)

        return collect(MessageKind.reply, answer)

    def summarize(node: NodeState) -> dict:
        view = views[node.node_id]
        ends = {"min": list(view.keys[0]), "max": list(view.keys[-1])} if view.keys else {"min": None, "max": None}
        return {"weight": view.prefix[-1], **ends, **view.median(0, len(view.keys))}

    stats = collect(MessageKind.stats, summarize)
    rounds += 1
    count = sum(s["size"] for s in stats)
    total_weight = sum(s["weight"] for s in stats)
    smallest = min((tuple(s["min"]) for s in stats if s["min"] is not None), default=None)

    threshold: SortKey | None = None
    removed_weight = 0.0
    decision: str | None = None
    bisections = 0
    if smallest is None or not fits_budget(term_weight(smallest[0], norm), budget, norm):
        pass
    elif fits_budget(total_weight, budget, norm):
        threshold = max(tuple(s["max"]) for s in stats if s["max"] is not None)
        removed_weight = total_weight
    else:
        summaries = [{"median": s["median"], "size": s["size"]} for s in stats]
        cap = max(0, math.ceil(math.log2(count)) - 2)
        while bisections < cap and any(s["size"] for s in summaries):
            proposal = _weighted_median(summaries)
            replies = exchange(MessageKind.proposal, {"apply": decision, "key": list(proposal)}, lambda view, received: view.propose(tuple(received["key"])))
            rounds += 1
            bisections += 1
            weight = sum(reply["weight"] for reply in replies)
            if fits_budget(weight, budget, norm):
                decision, threshold, removed_weight = "lo", proposal, weight
                summaries = [reply["right"] for reply in replies]
            else:
                decision = "hi"
                summaries = [reply["left"] for reply in replies]

        if any(s["size"] for s in summaries):
            replies = exchange(
                MessageKind.candidates,
                {"apply": decision},
                lambda view, received: {"keys": [list(k) for k in view.keys[view.lo : view.hi]]},
            )
            rounds += 1
            decision = None
            for key in sorted(tuple(k) for reply in replies for k in reply["keys"]):
                weight = removed_weight + term_weight(key[0], norm)
                if not fits_budget(weight, budget, norm):
                    break
                threshold, removed_weight = key, weight

    final = {"apply": decision, "threshold": list(threshold) if threshold is not None else None}
    inboxes = broadcast(MessageKind.decision, final)
    rounds += 1

    def cut(node: NodeState) -> dict[PauliAddress, float]:
        received = final if node.node_id == MASTER_NODE else inboxes[node.node_id][0].payload
        if received["threshold"] is None:
            return {}
        limit = tuple(received["threshold"])
        doomed = {a for m, a in views[node.node_id].keys if (m, a) <= limit}
        items = node.local.items()
        removed = {a: c for a, c in items if a in doomed}
        node.local = PauliSum.adopt(cluster.n, {a: c for a, c in items if a not in doomed})
        return removed

    removed: dict[PauliAddress, float] = {}
    for part in cluster.run_nodes(cut):
        removed.update(part)
    cluster.last_removed = PauliSum.adopt(cluster.n, removed)
    removed_norm = weight_to_norm(removed_weight, norm) if removed else 0.0
    cluster.truncations.append(TruncationRecord(rounds, bisections, len(removed), removed_norm))
    return cluster, removed_norm
