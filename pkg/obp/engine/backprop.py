import logging
import math
import time
from dataclasses import asdict, dataclass, field
from enum import StrEnum
from typing import Protocol

from humanfriendly import format_timespan

from obp.circuit.gates import Circuit
from obp.engine.conjugation import conjugate_slice
from obp.engine.truncation import Norm, check_budget, error_bound, split_truncation, truncate
from obp.errors import BudgetError, DimensionMismatchError
from obp.pauli.core import PauliSum
from obp.utils.log_utils import get_slice_tqdm

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

SUM_RTOL = 1e-12


class BudgetPolicy(StrEnum):
    even = "even"
    final_heavy = "final_heavy"
    explicit = "explicit"


@dataclass(frozen=True)
class BudgetSchedule:
    """
    How a total truncation budget is spread over slices.

    ``even`` splits ``total`` equally; ``final_heavy`` reserves ``final_fraction`` of it for one
    truncation pass after the last slice and splits the rest equally; ``explicit`` takes
    ``per_slice`` (indexed like ``Circuit.slices``) plus an optional ``final`` amount.
    """

    total: float = 0.0
    norm: Norm = Norm.l1
    policy: BudgetPolicy = BudgetPolicy.even
    final_fraction: float = 0.0
    per_slice: tuple[float, ...] = ()
    final: float = 0.0
    carry_forward: bool = True

    def __post_init__(self):
        object.__setattr__(self, "norm", Norm(self.norm))
        object.__setattr__(self, "policy", BudgetPolicy(self.policy))
        object.__setattr__(self, "per_slice", tuple(float(b) for b in self.per_slice))
        check_budget(self.total)
        check_budget(self.final)
        if not 0.0 <= self.final_fraction <= 1.0:
            raise BudgetError(f"final_fraction must lie in [0, 1], got {self.final_fraction}")
        if self.policy == BudgetPolicy.explicit:
            for b in self.per_slice:
                check_budget(b)
            spent = math.fsum(self.per_slice) + self.final
            if abs(spent - self.total) > SUM_RTOL * max(1.0, self.total):
                raise BudgetError(f"Explicit budgets sum to {spent}, expected total {self.total}")
        elif self.per_slice:
            raise BudgetError(f"per_slice budgets are only used by the explicit policy, not {self.policy}")

    @classmethod
    def even(cls, total: float, norm: Norm | str = Norm.l1) -> "BudgetSchedule":
        return cls(total=total, norm=norm)

    @classmethod
    def final_heavy(cls, total: float, fraction: float, norm: Norm | str = Norm.l1) -> "BudgetSchedule":
        return cls(total=total, norm=norm, policy=BudgetPolicy.final_heavy, final_fraction=fraction)

    @classmethod
    def two_phase(cls, initial: float, final: float, norm: Norm | str = Norm.l2) -> "BudgetSchedule":
        """Initial budget split evenly over slices followed by a final truncation budget."""
        total = initial + final
        return cls.final_heavy(total, final / total if total > 0 else 0.0, norm)

    @classmethod
    def explicit(cls, per_slice: list[float], norm: Norm | str = Norm.l1, final: float = 0.0) -> "BudgetSchedule":
        return cls(total=math.fsum(per_slice) + final, norm=norm, policy=BudgetPolicy.explicit, per_slice=tuple(per_slice), final=final)

    def allocate(self, num_slices: int) -> tuple[list[float], float]:
        """Per-slice budgets (indexed like the circuit's slices) and the final-pass budget."""
        match self.policy:
            case BudgetPolicy.explicit:
                if len(self.per_slice) != num_slices:
                    raise BudgetError(f"{len(self.per_slice)} explicit budgets for {num_slices} slices")
                return list(self.per_slice), self.final
            case BudgetPolicy.final_heavy:
                final = self.total * self.final_fraction
            case _:
                final = 0.0
        if num_slices == 0:
            return [], self.total
        return [(self.total - final) / num_slices] * num_slices, final


@dataclass(frozen=True)
class EngineLimits:
    max_terms: int | None = None
    max_seconds: float | None = None

    def __post_init__(self):
        if self.max_terms is not None and self.max_terms <= 0:
            raise BudgetError(f"max_terms must be positive, got {self.max_terms}")
        if self.max_seconds is not None and self.max_seconds <= 0:
            raise BudgetError(f"max_seconds must be positive, got {self.max_seconds}")


class Termination(StrEnum):
    completed = "completed"
    term_limit = "term_limit"
    time_limit = "time_limit"


@dataclass(frozen=True)
class SliceStats:
    slice_index: int  # -1 for the final truncation pass
    terms_before: int
    terms_after: int
    budget: float
    truncated_weight: float
    truncated_l1: float
    truncated_l2: float
    accrued_error: float

    def to_row(self) -> dict:
        return asdict(self)


@dataclass
class BackpropResult:
    operator: PauliSum
    accrued_error: float
    per_slice_stats: list[SliceStats]
    termination: Termination
    slices_completed: int
    accrued_l1: float = 0.0
    accrued_l2: float = 0.0
    final_stats: SliceStats | None = None
    pre_final_operator: PauliSum | None = None
    elapsed: float = field(default=0.0, compare=False)


class MetricSink(Protocol):
    def log(self, metrics: dict, step: int): ...


def backpropagate(
    observable: PauliSum,
    circuit: Circuit,
    budget: BudgetSchedule | None = None,
    limits: EngineLimits | None = None,
    workers: int = 1,
    tracker: MetricSink | None = None,
    progress: bool = False,
) -> BackpropResult:
    """
    Evolve ``observable`` backwards through ``circuit``, last slice first, truncating after
    every slice with that slice's budget plus the residual carried from the previous slice.

    Args:
        observable: O at the end of the circuit.
        circuit: Slices in application order.
        budget: Budget schedule; zero budget by default.
        limits: Term and wall-clock limits, checked after truncation and at slice starts.
        workers: Threads used for conjugation; results do not depend on it.
        tracker: Optional metric sink receiving per-slice statistics.
        progress: Show a slice progress bar.

    Returns:
        BackpropResult with O', the accrued triangle-inequality bound and per-slice statistics.
    """
    if observable.n != circuit.n:
        raise DimensionMismatchError(f"Observable has n={observable.n}, circuit has n={circuit.n}")
    budget = budget or BudgetSchedule()
    limits = limits or EngineLimits()
    allocation, final_budget = budget.allocate(circuit.num_slices)

    start = time.perf_counter()
    operator = observable.copy()
    stats: list[SliceStats] = []
    accrued = accrued_l1 = accrued_l2 = 0.0
    carry = 0.0
    termination = Termination.completed

    order = range(circuit.num_slices - 1, -1, -1)
    bar = get_slice_tqdm()(order, total=circuit.num_slices, disable=not progress, desc="slices")
    for index in bar:
        if limits.max_seconds is not None and time.perf_counter() - start > limits.max_seconds:
            termination = Termination.time_limit
            break
        operator = conjugate_slice(operator, circuit.slices[index], workers)
        before = len(operator)
        slice_budget = allocation[index] + carry
        operator, removed, weight, residual = split_truncation(operator, slice_budget, budget.norm)
        carry = residual if budget.carry_forward else 0.0
        accrued += weight
        removed_coeffs = removed.coefficients()
        accrued_l1 += error_bound(removed_coeffs, Norm.l1)
        accrued_l2 += error_bound(removed_coeffs, Norm.l2)
        record = SliceStats(index, before, len(operator), slice_budget, weight, error_bound(removed_coeffs, Norm.l1), error_bound(removed_coeffs, Norm.l2), accrued)
        stats.append(record)
        if tracker is not None:
            tracker.log({"terms_before": before, "terms_after": len(operator), "truncated_weight": weight, "accrued_error": accrued}, len(stats))
        if limits.max_terms is not None and len(operator) > limits.max_terms:
            termination = Termination.term_limit
            break
    bar.close()

    final_stats = None
    pre_final = None
    if termination == Termination.completed and (budget.policy != BudgetPolicy.even or circuit.num_slices == 0) and final_budget + carry > 0:
        pre_final = operator
        pass_budget = final_budget + carry
        operator, removed, weight, _ = split_truncation(operator, pass_budget, budget.norm)
        accrued += weight
        removed_coeffs = removed.coefficients()
        accrued_l1 += error_bound(removed_coeffs, Norm.l1)
        accrued_l2 += error_bound(removed_coeffs, Norm.l2)
        final_stats = SliceStats(-1, len(pre_final), len(operator), pass_budget, weight, error_bound(removed_coeffs, Norm.l1), error_bound(removed_coeffs, Norm.l2), accrued)

    elapsed = time.perf_counter() - start
    logger.info(f"Backpropagated {len(stats)}/{circuit.num_slices} slices in {format_timespan(elapsed)}: {len(operator)} terms, bound {accrued:.3e} ({termination})")
    return BackpropResult(
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


@dataclass
class TwoPhaseResult:
    initial: BackpropResult
    final_operator: PauliSum
    final_error: float

    @property
    def initial_operator(self) -> PauliSum:
        return self.initial.operator

    @property
    def initial_error(self) -> float:
        return self.initial.accrued_error

    @property
    def total_error(self) -> float:
        return self.initial.accrued_error + self.final_error


def two_phase_backpropagate(
    observable: PauliSum,
    circuit: Circuit,
    initial_budget: float,
    final_budget: float,
    norm: Norm | str = Norm.l2,
    limits: EngineLimits | None = None,
    workers: int = 1,
    tracker: MetricSink | None = None,
    progress: bool = False,
) -> TwoPhaseResult:
    """Backpropagate with ``initial_budget`` split evenly over slices, then truncate once with ``final_budget``."""
    check_budget(final_budget)
    initial = backpropagate(observable, circuit, BudgetSchedule.even(initial_budget, norm), limits, workers, tracker, progress)
    final_operator, final_error, _ = truncate(initial.operator, final_budget, norm)
    return TwoPhaseResult(initial, final_operator, final_error)
