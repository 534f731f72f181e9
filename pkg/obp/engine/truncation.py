import math
from collections.abc import Iterable
from enum import StrEnum
from itertools import accumulate

from obp.errors import BudgetError
from obp.pauli.core import PauliAddress, PauliSum

# Relative slack when comparing a removed weight with its budget, so that budgets equal to a
# norm up to rounding (e.g. sqrt(0.6^2 + 0.8^2) against 1.0) admit the whole set.
BUDGET_RTOL = 1e-14


class Norm(StrEnum):
    l1 = "l1"
    l2 = "l2"
    l2_squared = "l2_squared"  # budgets and reported weights are sums of c^2 rather than their root


def term_weight(coeff: float, norm: Norm) -> float:
    """Additive weight of one coefficient: |c| for L1, c^2 for either L2 form."""
    return abs(coeff) if norm == Norm.l1 else coeff * coeff


def weight_to_norm(weight: float, norm: Norm) -> float:
    return math.sqrt(weight) if norm == Norm.l2 else weight


def fits_budget(weight: float, budget: float, norm: Norm) -> bool:
    return weight_to_norm(weight, norm) <= budget * (1.0 + BUDGET_RTOL)


def check_budget(budget: float):
    if not budget >= 0.0 or math.isinf(budget):
        raise BudgetError(f"Truncation budget must be finite and non-negative, got {budget}")


def error_bound(removed: Iterable[float], norm: Norm | str) -> float:
    norm = Norm(norm)
    removed = list(removed)
    if norm == Norm.l1:
        return math.fsum(abs(c) for c in removed)
    squares = math.fsum(c * c for c in removed)
    return math.sqrt(squares) if norm == Norm.l2 else squares


def truncation_order(s: PauliSum) -> list[tuple[float, PauliAddress]]:
    """Terms ascending by |c|, ties by ascending address."""
    return sorted((abs(c), a) for a, c in s.items())


def split_truncation(s: PauliSum, budget: float, norm: Norm | str) -> tuple[PauliSum, PauliSum, float, float]:
    """
    Remove the longest prefix of the truncation order whose norm fits the budget.

    Returns:
        (kept, removed, removed_weight, residual)
    """
    check_budget(budget)
    norm = Norm(norm)
    order = truncation_order(s)
    cumulative = list(accumulate(term_weight(magnitude, norm) for magnitude, _ in order))
    count = 0
    while count < len(order) and fits_budget(cumulative[count], budget, norm):
        count += 1
    removed_weight = weight_to_norm(cumulative[count - 1], norm) if count else 0.0
    doomed = {address for _, address in order[:count]}
    terms = s.items()
    kept = PauliSum.adopt(s.n, {a: c for a, c in terms if a not in doomed})
    removed = PauliSum.adopt(s.n, {a: c for a, c in terms if a in doomed})
    return kept, removed, removed_weight, max(budget - removed_weight, 0.0)


def truncate(s: PauliSum, budget: float, norm: Norm | str) -> tuple[PauliSum, float, float]:
    kept, _, removed_weight, residual = split_truncation(s, budget, norm)
    return kept, removed_weight, residual
