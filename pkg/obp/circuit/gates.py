import json
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path

from obp.errors import CircuitError, QubitRangeError
from obp.pauli.core import PauliKey


class GateKind(StrEnum):
    H = "H"
    S = "S"
    Sdg = "Sdg"
    X = "X"
    Y = "Y"
    Z = "Z"
    CX = "CX"
    PauliRotation = "PauliRotation"


SINGLE_QUBIT_CLIFFORDS = frozenset({GateKind.H, GateKind.S, GateKind.Sdg, GateKind.X, GateKind.Y, GateKind.Z})


@dataclass(frozen=True, slots=True)
class Gate:
    """
    One circuit gate. ``PauliRotation`` is exp(-i * angle/2 * generator) and its qubits are
    the generator support; Clifford kinds carry no angle or generator.
    """

    kind: GateKind
    qubits: tuple[int, ...] = ()
    angle: float | None = None
    generator: PauliKey | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"{self.kind} has repeated qubits {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise QubitRangeError(f"{self.kind} has negative qubit index in {self.qubits}")
        match self.kind:
            case GateKind.PauliRotation:
                if self.generator is None or self.angle is None:
                    raise CircuitError("PauliRotation needs both a generator and an angle")
                if self.generator.is_identity():
                    raise CircuitError("PauliRotation generator must not be the identity")
                support = self.generator.support
                if self.qubits and tuple(sorted(self.qubits)) != support:
                    raise CircuitError(f"Rotation qubits {self.qubits} differ from generator support {support}")
                object.__setattr__(self, "qubits", support)
                object.__setattr__(self, "angle", float(self.angle))
            case GateKind.CX:
                self._check_clifford(2)
            case _:
                self._check_clifford(1)

    def _check_clifford(self, arity: int):
        if self.angle is not None or self.generator is not None:
            raise CircuitError(f"Clifford gate {self.kind} carries no angle or generator")
        if len(self.qubits) != arity:
            raise CircuitError(f"{self.kind} acts on {arity} qubit(s), got {self.qubits}")

    @classmethod
    def clifford(cls, kind: GateKind | str, *qubits: int) -> "Gate":
        return cls(GateKind(kind), tuple(qubits))

    @classmethod
    def rotation(cls, generator: PauliKey | str, angle: float) -> "Gate":
        if isinstance(generator, str):
            generator = PauliKey.from_label(generator)
        return cls(GateKind.PauliRotation, generator.support, angle, generator)

    @property
    def is_two_qubit(self) -> bool:
        return len(self.qubits) == 2

    def to_json(self) -> dict:
        data = {"kind": str(self.kind), "qubits": list(self.qubits)}
        if self.kind == GateKind.PauliRotation:
            data["angle"] = self.angle
            data["generator"] = self.generator.label
        return data

    @classmethod
    def from_json(cls, data: dict) -> "Gate":
        kind = GateKind(data["kind"])
        if kind == GateKind.PauliRotation:
            return cls(kind, tuple(data.get("qubits", ())), data["angle"], PauliKey.from_label(data["generator"]))
        return cls(kind, tuple(data["qubits"]))


@dataclass(frozen=True)
class Slice:
    gates: tuple[Gate, ...] = ()
    label: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))

    @property
    def qubits(self) -> set[int]:
        return {q for g in self.gates for q in g.qubits}

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self) -> Iterator[Gate]:
        return iter(self.gates)


@dataclass(frozen=True)
class Circuit:
    """
    Gates grouped into slices. Slice 0 is applied first, so the unitary is
    U = U_{S-1} ... U_1 U_0 and backpropagation walks slices in reverse.
    """

    n: int
    slices: tuple[Slice, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "slices", tuple(s if isinstance(s, Slice) else Slice(tuple(s)) for s in self.slices))
        if self.n < 1:
            raise CircuitError(f"Circuit needs n >= 1, got {self.n}")
        for index, s in enumerate(self.slices):
            for g in s.gates:
                if any(q >= self.n for q in g.qubits):
                    raise QubitRangeError(f"Gate {g.kind} on {g.qubits} in slice {index} exceeds n={self.n}")
                if g.generator is not None and g.generator.n != self.n:
                    raise CircuitError(f"Rotation generator has n={g.generator.n}, circuit has n={self.n}")

    @classmethod
    def from_gates(cls, n: int, gates: Sequence[Gate], per_slice: int | None = None) -> "Circuit":
        """Pack a flat gate list into slices of ``per_slice`` gates (one slice if None)."""
        gates = list(gates)
        if per_slice is None or not gates:
            return cls(n, (Slice(tuple(gates)),) if gates else ())
        return cls(n, tuple(Slice(tuple(gates[i : i + per_slice])) for i in range(0, len(gates), per_slice)))

    def gates(self) -> Iterator[Gate]:
        for s in self.slices:
            yield from s.gates

    @property
    def num_slices(self) -> int:
        return len(self.slices)

    @property
    def num_gates(self) -> int:
        return sum(len(s) for s in self.slices)

    def split(self, index: int) -> tuple["Circuit", "Circuit"]:
        """Cut U = U_C U_Q before slice ``index``: returns (U_Q, U_C)."""
        if not 0 <= index <= len(self.slices):
            raise CircuitError(f"Split index {index} outside 0..{len(self.slices)}")
        return Circuit(self.n, self.slices[:index]), Circuit(self.n, self.slices[index:])

    def concat(self, later: "Circuit") -> "Circuit":
        """The circuit applying ``self`` first and ``later`` afterwards."""
        if later.n != self.n:
            raise CircuitError(f"Cannot concatenate circuits on {self.n} and {later.n} qubits")
        return Circuit(self.n, self.slices + later.slices)

    def to_json(self) -> dict:
        return {"n": self.n, "slices": [[g.to_json() for g in s.gates] for s in self.slices]}

    @classmethod
    def from_json(cls, data: dict) -> "Circuit":
        return cls(int(data["n"]), tuple(Slice(tuple(Gate.from_json(g) for g in s)) for s in data["slices"]))

    def save(self, path: str | Path):
        with open(path, "w") as f:
            json.dump(self.to_json(), f, sort_keys=True, indent=1)
            f.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "Circuit":
        with open(path) as f:
            return cls.from_json(json.load(f))
