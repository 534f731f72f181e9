from enum import StrEnum

from obp.circuit.gates import Circuit, Gate, Slice
from obp.circuit.lattice import Lattice
from obp.errors import CircuitError
from obp.pauli.core import PauliKey


class Ordering(StrEnum):
    first_order = "first_order"
    symmetric = "symmetric"
    xx_then_yy = "xx_then_yy"


def _pair_key(n: int, i: int, j: int, char: str) -> PauliKey:
    bits = (1 << i) | (1 << j)
    match char:
        case "X":
            return PauliKey(n, 0, bits)
        case "Y":
            return PauliKey(n, bits, bits)
        case "Z":
            return PauliKey(n, bits, 0)
        case _:
            raise ValueError(f"Unknown Pauli character: {char}")


def _xy_layer(n: int, edges: list[tuple[int, int]], angle: float, label: str) -> Slice:
    gates = []
    for i, j in edges:
        gates.append(Gate.rotation(_pair_key(n, i, j, "X"), angle))
        gates.append(Gate.rotation(_pair_key(n, i, j, "Y"), angle))
    return Slice(tuple(gates), label)


def _single_layer(n: int, edges: list[tuple[int, int]], char: str, angle: float, label: str) -> Slice:
    return Slice(tuple(Gate.rotation(_pair_key(n, i, j, char), angle) for i, j in edges), label)


def _field_layer(n: int, angle: float, label: str) -> Slice:
    return Slice(tuple(Gate.rotation(PauliKey.single(n, q, "Z"), angle) for q in range(n)), label)


def _color_sequence(num_colors: int, k: int, ordering: Ordering) -> list[tuple[int, int]]:
    """(step, color) of every two-qubit layer in time order, before merging."""
    colors = list(range(num_colors))
    sequence = []
    for step in range(k):
        order = colors[::-1] if ordering == Ordering.symmetric and step % 2 else colors
        sequence.extend((step, color) for color in order)
    return sequence


def _merge_runs(sequence: list[tuple[int, int]], merge: bool) -> list[tuple[int, list[int], list[int]]]:
    """
    Group consecutive same-color layers into (color, steps, completed) runs, one slice per run.
    ``completed`` lists the steps whose last layer falls in the run.
    """
    runs: list[tuple[int, list[int], list[int]]] = []
    for position, (step, color) in enumerate(sequence):
        if merge and runs and runs[-1][0] == color:
            runs[-1][1].append(step)
        else:
            runs.append((color, [step], []))
        if position + 1 == len(sequence) or sequence[position + 1][0] != step:
            runs[-1][2].append(step)
    return runs


def synth_xy_trotter(
    lattice: Lattice,
    J: float,
    h: float,
    tau: float,
    k: int,
    ordering: Ordering | str = Ordering.symmetric,
    merge: bool = True,
) -> Circuit:
    """
    Trotterize H = J sum_<ij> (X_i X_j + Y_i Y_j) + h sum_i Z_i over ``k`` steps of size ``tau``.

    ``first_order`` applies the color layers of exp(-i J tau (XX + YY)) in the same order every
    step; ``symmetric`` reverses it on every other step. With ``merge``, each run of adjacent
    same-color layers becomes one layer carrying the summed angle, so merging changes the slicing
    and the depth but never the unitary or the backpropagated operator. A single-color lattice
    fuses all ``k`` layers into one. ``xx_then_yy`` applies all YY rotations and then all XX
    rotations in every step, which breaks the U(1) symmetry. The field layer follows the layer
    that completes its step; it commutes with every XX + YY layer. One slice per commuting layer.
    """
    if k < 1:
        raise CircuitError(f"Number of Trotter steps must be positive, got {k}")
    lattice.check_coloring()
    n = lattice.n
    theta = 2.0 * J * tau
    field = 2.0 * h * tau
    layers = [edges for edges in lattice.edges_by_color() if edges]
    slices: list[Slice] = []

    match ordering := Ordering(ordering):
        case Ordering.symmetric | Ordering.first_order:
            for color, steps, completed in _merge_runs(_color_sequence(len(layers), k, ordering), merge):
                label = f"step {steps[0] + 1} color {color}" if len(steps) == 1 else f"steps {steps[0] + 1}-{steps[-1] + 1} color {color}"
                slices.append(_xy_layer(n, layers[color], len(steps) * theta, label))
                if h != 0:
                    slices.extend(_field_layer(n, field, f"step {step + 1} field") for step in completed)
        case Ordering.xx_then_yy:
            edges = list(lattice.edges)
            for step in range(k):
                slices.append(_single_layer(n, edges, "Y", theta, f"step {step + 1} YY"))
                slices.append(_single_layer(n, edges, "X", theta, f"step {step + 1} XX"))
                if h != 0:
                    slices.append(_field_layer(n, field, f"step {step + 1} field"))
    return Circuit(n, tuple(slices))
