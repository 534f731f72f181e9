import logging
import time
from collections import Counter
from dataclasses import asdict, dataclass

from humanfriendly import format_timespan

from obp.circuit.gates import Circuit
from obp.distributed.bus import MessageKind, TransportKind
from obp.distributed.cluster import ClusterRun, distributed_truncate, parallel_conjugate_slice, rebalance
from obp.engine.backprop import BackpropResult, BudgetPolicy, BudgetSchedule, EngineLimits, MetricSink, SliceStats, Termination
from obp.engine.truncation import Norm, error_bound
from obp.errors import DimensionMismatchError
from obp.pauli.core import PauliSum
from obp.utils.log_utils import get_slice_tqdm, master_log

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

_REBALANCE_KINDS = {MessageKind.load, MessageKind.boundary, MessageKind.migrate}


@dataclass(frozen=True)
class SliceTraffic:
    slice_index: int
    dedup_messages: int
    rebalance_messages: int
    truncation_rounds: int
    truncation_messages: int

    def to_row(self) -> dict:
        return asdict(self)


@dataclass
class DistributedResult:
    result: BackpropResult
    cluster: ClusterRun
    traffic: list[SliceTraffic]


def _traffic(cluster: ClusterRun, start: int, slice_index: int) -> SliceTraffic:
    kinds = Counter(record.kind for record in cluster.message_log[start:])
    rebalance_messages = sum(kinds[k] for k in _REBALANCE_KINDS)
    dedup = kinds[MessageKind.terms]
    rounds = cluster.truncations[-1].rounds if cluster.truncations else 0
    return SliceTraffic(slice_index, dedup, rebalance_messages, rounds, sum(kinds.values()) - dedup - rebalance_messages)


def _truncate(cluster: ClusterRun, index: int, budget: float, norm: Norm, accrued: float) -> tuple[SliceStats, float]:
    before = cluster.total_terms()
    _, weight = distributed_truncate(cluster, budget, norm)
    removed = cluster.last_removed.coefficients()
    stats = SliceStats(index, before, cluster.total_terms(), budget, weight, error_bound(removed, Norm.l1), error_bound(removed, Norm.l2), accrued + weight)
    return stats, weight


def distributed_backpropagate(
    observable: PauliSum,
    circuit: Circuit,
    budget: BudgetSchedule | None = None,
    limits: EngineLimits | None = None,
    nodes: int = 1,
    transport: TransportKind | str = TransportKind.inproc,
    seed: int = 0,
    workers: int = 1,
    balance: bool = True,
    tracker: MetricSink | None = None,
    progress: bool = False,
) -> DistributedResult:
    """
    The single-node backpropagation loop run on a simulated cluster: per slice, routed
    conjugation, optional partition rebalancing and the distributed threshold search.
    """
    if observable.n != circuit.n:
        raise DimensionMismatchError(f"Observable has n={observable.n}, circuit has n={circuit.n}")
    budget = budget or BudgetSchedule()
    limits = limits or EngineLimits()
    allocation, final_budget = budget.allocate(circuit.num_slices)

    start = time.perf_counter()
    cluster = ClusterRun.create(observable, nodes, transport=transport, seed=seed, workers=workers)
    stats: list[SliceStats] = []
    traffic: list[SliceTraffic] = []
    accrued = accrued_l1 = accrued_l2 = 0.0
    carry = 0.0
    termination = Termination.completed

    order = range(circuit.num_slices - 1, -1, -1)
    bar = get_slice_tqdm()(order, total=circuit.num_slices, disable=not progress, desc=f"slices x{nodes}")
    for index in bar:
        if limits.max_seconds is not None and time.perf_counter() - start > limits.max_seconds:
            termination = Termination.time_limit
            break
        log_start = len(cluster.message_log)
        parallel_conjugate_slice(cluster, circuit.slices[index])
        if balance and nodes > 1 and cluster.total_terms() > 0:
            rebalance(cluster)
        slice_budget = allocation[index] + carry
        record, weight = _truncate(cluster, index, slice_budget, budget.norm, accrued)
        carry = max(slice_budget - weight, 0.0) if budget.carry_forward else 0.0
        accrued = record.accrued_error
        accrued_l1 += record.truncated_l1
        accrued_l2 += record.truncated_l2
        stats.append(record)
        traffic.append(_traffic(cluster, log_start, index))
        if tracker is not None:
            tracker.log({"terms_before": record.terms_before, "terms_after": record.terms_after, "truncated_weight": weight, "accrued_error": accrued}, len(stats))
        if limits.max_terms is not None and record.terms_after > limits.max_terms:
            termination = Termination.term_limit
            break
    bar.close()

    final_stats = None
    pre_final = None
    if termination == Termination.completed and (budget.policy != BudgetPolicy.even or circuit.num_slices == 0) and final_budget + carry > 0:
        pre_final = cluster.gather()
        record, _ = _truncate(cluster, -1, final_budget + carry, budget.norm, accrued)
        accrued = record.accrued_error
        accrued_l1 += record.truncated_l1
        accrued_l2 += record.truncated_l2
        final_stats = record

    elapsed = time.perf_counter() - start
    operator = cluster.gather()
    master_log(logger, f"Distributed run over {nodes} nodes: {len(stats)}/{circuit.num_slices} slices in {format_timespan(elapsed)}, {len(operator)} terms, {len(cluster.message_log)} messages ({termination})")
    result = BackpropResult(
        operator=operator,
        accrued_error=accrued,
        per_slice_stats=stats,
        termination=termination,
        slices_completed=len(stats),
        accrued_l1=accrued_l1,
        accrued_l2=accrued_l2,
        final_stats=final_stats,
        pre_final_operator=pre_final,
        elapsed=elapsed,
    )
    return DistributedResult(result, cluster, traffic)
