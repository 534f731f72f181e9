import json
from dataclasses import dataclass
from enum import StrEnum
from importlib import resources
from pathlib import Path

from obp.errors import CircuitError, QubitRangeError


class LatticeKind(StrEnum):
    chain = "chain"
    chain_closed = "chain_closed"
    heavy_hex = "heavy_hex"
    custom = "custom"


def greedy_coloring(edges: list[tuple[int, int]]) -> list[int]:
    """Smallest free color per edge, edges visited in the given order."""
    used: dict[int, set[int]] = {}
    colors = []
    for i, j in edges:
        taken = used.setdefault(i, set()) | used.setdefault(j, set())
        color = next(c for c in range(len(taken) + 1) if c not in taken)
        colors.append(color)
        used[i].add(color)
        used[j].add(color)
    return colors


@dataclass(frozen=True)
class Lattice:
    n: int
    edges: tuple[tuple[int, int], ...]
    colors: tuple[int, ...]
    kind: LatticeKind = LatticeKind.custom

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(i), int(j)) for i, j in self.edges))
        object.__setattr__(self, "colors", tuple(int(c) for c in self.colors))
        object.__setattr__(self, "kind", LatticeKind(self.kind))
        if len(self.colors) != len(self.edges):
            raise CircuitError(f"{len(self.edges)} edges but {len(self.colors)} colors")
        for i, j in self.edges:
            if i == j or not (0 <= i < self.n and 0 <= j < self.n):
                raise QubitRangeError(f"Edge ({i}, {j}) invalid for {self.n} sites")
        self.check_coloring()

    def check_coloring(self):
        seen: set[tuple[int, int]] = set()
        for (i, j), c in zip(self.edges, self.colors, strict=True):
            if c < 0:
                raise CircuitError(f"Negative color {c} on edge ({i}, {j})")
            for site in (i, j):
                if (site, c) in seen:
                    raise CircuitError(f"Improper coloring: site {site} has two edges of color {c}")
                seen.add((site, c))

    @classmethod
    def from_edges(cls, n: int, edges: list[tuple[int, int]], kind: LatticeKind = LatticeKind.custom) -> "Lattice":
        return cls(n, tuple(edges), tuple(greedy_coloring(edges)), kind)

    @classmethod
    def chain(cls, n: int, closed: bool = False) -> "Lattice":
        if n < 2:
            raise CircuitError(f"A chain needs at least 2 sites, got {n}")
        edges = [(i, i + 1) for i in range(n - 1)]
        if closed and n > 2:
            edges.append((n - 1, 0))
        return cls.from_edges(n, edges, LatticeKind.chain_closed if closed else LatticeKind.chain)

    @classmethod
    def heavy_hex_127(cls) -> "Lattice":
        data = resources.files("obp.data").joinpath("heavy_hex_127.json").read_text()
        return cls.from_json(json.loads(data))

    @property
    def num_colors(self) -> int:
        return max(self.colors) + 1 if self.colors else 0

    def edges_by_color(self) -> list[list[tuple[int, int]]]:
        layers: list[list[tuple[int, int]]] = [[] for _ in range(self.num_colors)]
        for edge, c in zip(self.edges, self.colors, strict=True):
            layers[c].append(edge)
        return layers

    def to_json(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.edges], "colors": list(self.colors), "kind": str(self.kind)}

    @classmethod
    def from_json(cls, data: dict) -> "Lattice":
        edges = [tuple(e) for e in data["edges"]]
        colors = data.get("colors")
        if colors is None:
            colors = greedy_coloring(edges)
        return cls(int(data["n"]), tuple(edges), tuple(colors), data.get("kind", LatticeKind.custom))

    @classmethod
    def load(cls, path: str | Path) -> "Lattice":
        with open(path) as f:
            return cls.from_json(json.load(f))


def build_lattice(kind: LatticeKind | str, n: int, path: str | None = None) -> Lattice:
    if path is not None:
        return Lattice.load(path)
    match LatticeKind(kind):
        case LatticeKind.chain:
            return Lattice.chain(n)
        case LatticeKind.chain_closed:
            return Lattice.chain(n, closed=True)
        case LatticeKind.heavy_hex:
            lattice = Lattice.heavy_hex_127()
            if n != lattice.n:
                raise CircuitError(f"The shipped heavy-hex lattice has {lattice.n} sites, requested {n}")
            return lattice
        case _:
            raise CircuitError("A custom lattice needs a lattice JSON path")
