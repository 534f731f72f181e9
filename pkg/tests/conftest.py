import numpy as np
import pytest

from obp.circuit.gates import Circuit, Gate, Slice
from obp.pauli.core import PauliKey, PauliSum

_CLIFFORDS = ["H", "S", "Sdg", "X", "Y", "Z"]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_sum(rng):
    """Random sum of ``terms`` distinct non-identity Paulis with normal coefficients."""

    def make(n: int, terms: int) -> PauliSum:
        addresses = rng.choice(np.arange(1, 1 << (2 * n)), size=terms, replace=False)
        return PauliSum(n, {int(a): float(c) for a, c in zip(addresses, rng.normal(size=terms), strict=True)})

    return make


@pytest.fixture
def make_circuit(rng):
    """Random circuit mixing Clifford gates and Pauli rotations with generic angles."""

    def make(n: int, slices: int, gates_per_slice: int = 3) -> Circuit:
        out = []
        for _ in range(slices):
            gates = []
            for _ in range(gates_per_slice):
                roll = rng.random()
                if roll < 0.25 and n >= 2:
                    control, target = rng.choice(n, size=2, replace=False)
                    gates.append(Gate.clifford("CX", int(control), int(target)))
                elif roll < 0.5:
                    gates.append(Gate.clifford(_CLIFFORDS[rng.integers(len(_CLIFFORDS))], int(rng.integers(n))))
                else:
                    z, x = 0, 0
                    while z == 0 and x == 0:
                        z, x = int(rng.integers(1 << n)), int(rng.integers(1 << n))
                    gates.append(Gate.rotation(PauliKey(n, z, x), float(rng.uniform(0.1, 2.5))))
            out.append(Slice(tuple(gates)))
        return Circuit(n, tuple(out))

    return make
