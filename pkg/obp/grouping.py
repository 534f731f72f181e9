"""
Qubit-wise-commuting grouping of Pauli keys into shared measurement bases.
"""

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from enum import StrEnum

import networkx as nx

from obp.errors import DimensionMismatchError
from obp.pauli.core import PauliAddress, PauliKey, PauliSum


class GroupingStrategy(StrEnum):
    sorted_insertion = "sorted_insertion"  # first fit, heaviest keys first
    # greedy colorings of the conflict graph, with networkx's strategy names
    largest_first = "largest_first"
    saturation_largest_first = "saturation_largest_first"


@dataclass(frozen=True)
class MeasurementGroup:
    keys: tuple[PauliKey, ...]
    basis: PauliKey  # join of all members; identity where no member acts

    @property
    def basis_label(self) -> str:
        return self.basis.label

    def __len__(self) -> int:
        return len(self.keys)

    def to_json(self) -> dict:
        return {"basis": self.basis.label, "paulis": [k.label for k in self.keys]}


def _lookup(mapping: Mapping, key: PauliKey, what: str):
    if isinstance(mapping, PauliSum):
        if key not in mapping:
            raise KeyError(f"No {what} for {key.label}")
        return mapping.coeff(key)
    if key in mapping:
        return mapping[key]
    if key.address in mapping:
        return mapping[key.address]
    raise KeyError(f"No {what} for {key.label}")


def _conflicts(a: PauliKey, b: PauliKey) -> bool:
    """True when the two keys act differently on some qubit where both act."""
    return bool(((a.z ^ b.z) | (a.x ^ b.x)) & (a.z | a.x) & (b.z | b.x))


def _first_fit(keys: list[PauliKey]) -> list[list[PauliKey]]:
    bases: list[tuple[int, int]] = []
    members: list[list[PauliKey]] = []
    for key in keys:
        active = key.z | key.x
        for index, (bz, bx) in enumerate(bases):
            if ((key.z ^ bz) | (key.x ^ bx)) & active & (bz | bx) == 0:
                bases[index] = (bz | key.z, bx | key.x)
                members[index].append(key)
                break
        else:
            bases.append((key.z, key.x))
            members.append([key])
    return members


def _coloring(keys: list[PauliKey], strategy: GroupingStrategy) -> list[list[PauliKey]]:
    graph = nx.Graph()
    graph.add_nodes_from(range(len(keys)))
    graph.add_edges_from((i, j) for i in range(len(keys)) for j in range(i + 1, len(keys)) if _conflicts(keys[i], keys[j]))
    colors = nx.greedy_color(graph, strategy=str(strategy))
    members: list[list[PauliKey]] = [[] for _ in range(max(colors.values()) + 1)]
    for index, key in enumerate(keys):
        members[colors[index]].append(key)
    return members


def group_qwc(
    keys: Sequence[PauliKey],
    coeffs: Mapping[PauliKey | PauliAddress, float] | PauliSum | None = None,
    strategy: GroupingStrategy | str = GroupingStrategy.sorted_insertion,
) -> list[MeasurementGroup]:
    """
    Partition ``keys`` into qubit-wise commuting groups.

    ``sorted_insertion`` is first fit over keys ordered by descending |c| (when ``coeffs`` is
    given) and then ascending address: each key joins the first group whose basis agrees with
    it on every shared qubit, otherwise it opens a new group. The coloring strategies build the
    graph of conflicting pairs over keys in ascending address order and color it greedily with
    networkx; they ignore ``coeffs``.
    """
    keys = list(dict.fromkeys(keys))
    if not keys:
        raise ValueError("Cannot group an empty set of Pauli keys")
    n = keys[0].n
    if any(k.n != n for k in keys):
        raise DimensionMismatchError("All keys must act on the same number of qubits")
    strategy = GroupingStrategy(strategy)
    if coeffs is None or strategy != GroupingStrategy.sorted_insertion:
        keys.sort(key=lambda k: k.address)
    else:
        keys.sort(key=lambda k: (-abs(_lookup(coeffs, k, "coefficient")), k.address))

    members = _first_fit(keys) if strategy == GroupingStrategy.sorted_insertion else _coloring(keys, strategy)
    groups = []
    for group in members:
        bz = bx = 0
        for key in group:
            bz, bx = bz | key.z, bx | key.x
        groups.append(MeasurementGroup(tuple(group), PauliKey(n, bz, bx)))
    return groups


def group_operator(s: PauliSum, strategy: GroupingStrategy | str = GroupingStrategy.sorted_insertion) -> list[MeasurementGroup]:
    return group_qwc(s.keys(), s, strategy)


def group_union(operators: Iterable[PauliSum], strategy: GroupingStrategy | str = GroupingStrategy.sorted_insertion) -> list[MeasurementGroup]:
    """
    Group the union of keys of several operators once, ranking each key by its largest |c|.
    Groups built for the deepest backpropagated operator also cover shallower ones whose keys
    form a subset.
    """
    weights: dict[PauliAddress, float] = {}
    n = None
    for s in operators:
        if n is not None and s.n != n:
            raise DimensionMismatchError(f"Operators act on {n} and {s.n} qubits")
        n = s.n
        for address, coeff in s.items():
            weights[address] = max(weights.get(address, 0.0), abs(coeff))
    if n is None or not weights:
        raise ValueError("Cannot group an empty set of Pauli keys")
    return group_qwc([PauliKey.from_address(a, n) for a in weights], weights, strategy)


def reconstruct_expectation(
    groups: Sequence[MeasurementGroup],
    per_key_values: Mapping[PauliKey | PauliAddress, float],
    coeffs: Mapping[PauliKey | PauliAddress, float] | PauliSum,
) -> float:
    """sum_P c_P <P> over every key of every group."""
    return math.fsum(_lookup(coeffs, k, "coefficient") * _lookup(per_key_values, k, "expectation value") for g in groups for k in g.keys)


def groups_to_json(groups: Sequence[MeasurementGroup]) -> list[dict]:
    return [g.to_json() for g in groups]
