import math

import numpy as np
import pytest

from obp.circuit.gates import Circuit, Gate, Slice
from obp.engine.conjugation import conjugate_gate, conjugate_slice
from obp.errors import QubitRangeError
from obp.oracle.dense import circuit_unitary, to_matrix
from obp.pauli.core import PauliKey, PauliSum, l2_norm


def heisenberg(s: PauliSum, gate: Gate) -> np.ndarray:
    u = circuit_unitary(Circuit(s.n, (Slice((gate,)),)))
    return u.conj().T @ to_matrix(s) @ u


@pytest.mark.parametrize(
    "gate",
    [
        Gate.clifford("H", 1),
        Gate.clifford("S", 0),
        Gate.clifford("Sdg", 2),
        Gate.clifford("X", 1),
        Gate.clifford("Y", 2),
        Gate.clifford("Z", 0),
        Gate.clifford("CX", 0, 2),
        Gate.clifford("CX", 2, 1),
        Gate.rotation("XIZ", 0.7),
        Gate.rotation("IYI", -1.3),
        Gate.rotation("ZXY", 2.1),
    ],
    ids=str,
)
def test_gate_conjugation_matches_dense(gate, make_sum):
    s = make_sum(3, 30)
    assert np.allclose(to_matrix(conjugate_gate(s, gate)), heisenberg(s, gate), atol=1e-12)


def test_clifford_examples():
    z0 = PauliSum.from_label("ZI")
    assert conjugate_gate(z0, Gate.clifford("H", 0)) == PauliSum.from_label("XI")
    assert conjugate_gate(PauliSum.from_label("XI"), Gate.clifford("S", 0)) == PauliSum.from_label("YI", -1.0)
    assert conjugate_gate(PauliSum.from_label("XI"), Gate.clifford("CX", 0, 1)) == PauliSum.from_label("XX")
    assert conjugate_gate(PauliSum.from_label("IZ"), Gate.clifford("CX", 0, 1)) == PauliSum.from_label("ZZ")


def test_rotation_branches_anticommuting_terms():
    theta = 0.4
    out = conjugate_gate(PauliSum.from_label("Z"), Gate.rotation("X", theta))
    assert out.coeff(PauliKey.from_label("Z")) == pytest.approx(math.cos(theta))
    assert out.coeff(PauliKey.from_label("Y")) == pytest.approx(math.sin(theta))
    assert len(out) == 2
    # commuting terms pass through untouched
    assert conjugate_gate(PauliSum.from_label("XZ", 0.3), Gate.rotation("XI", theta)) == PauliSum.from_label("XZ", 0.3)


def test_slice_applies_gates_in_reverse(make_sum, make_circuit):
    s = make_sum(3, 20)
    circuit = make_circuit(3, 1, gates_per_slice=6)
    u = circuit_unitary(circuit)
    out = conjugate_slice(s, circuit.slices[0])
    assert np.allclose(to_matrix(out), u.conj().T @ to_matrix(s) @ u, atol=1e-12)


def test_thread_count_does_not_change_results(make_sum):
    s = make_sum(7, 10_000)
    layer = Slice((Gate.rotation("XXIIIII", 0.3), Gate.rotation("IYZIIXI", 1.1), Gate.clifford("CX", 3, 6)))
    assert conjugate_slice(s, layer, workers=4) == conjugate_slice(s, layer, workers=1)


def test_gate_outside_sum_is_rejected():
    with pytest.raises(QubitRangeError):
        conjugate_gate(PauliSum.from_label("ZI"), Gate.clifford("H", 2))


def test_t_like_rotation_splits_x():
    out = conjugate_gate(PauliSum.from_label("X"), Gate.rotation("Z", math.pi / 4))
    assert sorted(k.label for k in out.keys()) == ["X", "Y"]
    assert out.coeff(PauliKey.from_label("X")) == pytest.approx(math.sqrt(0.5))
    assert abs(out.coeff(PauliKey.from_label("Y"))) == pytest.approx(math.sqrt(0.5))


def test_zero_angle_rotation_is_identity(make_sum):
    s = make_sum(3, 25)
    assert conjugate_gate(s, Gate.rotation("XYZ", 0.0)) == s


def test_gates_preserve_the_l2_norm(make_sum, make_circuit):
    s = make_sum(4, 20)
    s = s.scaled(1.0 / l2_norm(s))
    for layer in make_circuit(4, 10_000, gates_per_slice=1).slices:
        s = conjugate_gate(s, layer.gates[0])
        assert l2_norm(s) == pytest.approx(1.0, abs=1e-12)
