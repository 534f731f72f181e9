from collections.abc import Iterable

from obp.circuit.gates import Circuit, Slice
from obp.errors import CircuitError, QubitRangeError


def two_qubit_depth(circuit: Circuit) -> int:
    """Longest chain of two-qubit gates linked by shared qubits; single-qubit gates are free."""
    frontier = [0] * circuit.n
    for gate in circuit.gates():
        if len(gate.qubits) < 2:
            continue
        depth = max(frontier[q] for q in gate.qubits) + 1
        for q in gate.qubits:
            frontier[q] = depth
    return max(frontier, default=0)


def two_qubit_gate_count(circuit: Circuit) -> int:
    """
    Native two-qubit gate count. XX and YY rotations are stored as separate gates, so an
    XX+YY rotation (merged or not) contributes 2.
    """
    return sum(1 for gate in circuit.gates() if len(gate.qubits) == 2)


def expected_two_qubit_depth(num_colors: int, k: int) -> int:
    """Depth of a merged symmetric k-step XY circuit: 2k+2 for two colors, 4k+2 for three."""
    return 2 * (num_colors * k - (k - 1))


def lightcone_prune(circuit: Circuit, support: Iterable[int]) -> Circuit:
    """
    Drop every gate outside the backward lightcone of ``support``. Slice boundaries are kept
    (possibly empty) so per-slice budgets line up with the unpruned circuit.
    """
    current = set(support)
    if not current:
        raise CircuitError("Lightcone pruning needs a nonempty support")
    if any(q < 0 or q >= circuit.n for q in current):
        raise QubitRangeError(f"Support {sorted(current)} out of range for n={circuit.n}")
    pruned: list[Slice] = []
    for s in reversed(circuit.slices):
        kept = []
        for gate in reversed(s.gates):
            if current.intersection(gate.qubits):
                kept.append(gate)
                current.update(gate.qubits)
        pruned.append(Slice(tuple(reversed(kept)), s.label))
    return Circuit(circuit.n, tuple(reversed(pruned)))
