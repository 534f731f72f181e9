import pytest

from obp.circuit.gates import Circuit, Gate, GateKind, Slice
from obp.errors import CircuitError, QubitRangeError
from obp.pauli.core import PauliKey


def test_rotation_qubits_follow_generator():
    gate = Gate.rotation("XIZ", 0.3)
    assert gate.kind == GateKind.PauliRotation
    assert gate.qubits == (0, 2)
    assert gate.generator == PauliKey.from_label("XIZ")
    assert gate.is_two_qubit


@pytest.mark.parametrize(
    "build",
    [
        lambda: Gate.rotation("III", 0.1),
        lambda: Gate.clifford("CX", 0),
        lambda: Gate.clifford("CX", 1, 1),
        lambda: Gate.clifford("H", 0, 1),
        lambda: Gate(GateKind.H, (0,), angle=0.2),
        lambda: Gate(GateKind.PauliRotation, (0,)),
    ],
)
def test_invalid_gates(build):
    with pytest.raises(CircuitError):
        build()


def test_gate_qubits_must_fit_circuit():
    with pytest.raises(QubitRangeError):
        Circuit(2, (Slice((Gate.clifford("CX", 0, 2),)),))
    with pytest.raises(QubitRangeError):
        Gate.clifford("H", -1)


def test_from_gates_packs_slices():
    gates = [Gate.clifford("H", q) for q in range(5)]
    assert Circuit.from_gates(5, gates).num_slices == 1
    packed = Circuit.from_gates(5, gates, per_slice=2)
    assert [len(s) for s in packed.slices] == [2, 2, 1]
    assert packed.num_gates == 5
    assert list(packed.gates()) == gates
    assert Circuit.from_gates(5, []).num_slices == 0


def test_split_and_concat(make_circuit):
    circuit = make_circuit(3, 5)
    early, late = circuit.split(2)
    assert early.num_slices == 2
    assert late.num_slices == 3
    assert early.concat(late) == circuit
    assert circuit.split(0)[0].num_slices == 0
    with pytest.raises(CircuitError):
        circuit.split(6)


def test_json_file(tmp_path, make_circuit):
    circuit = make_circuit(4, 3)
    path = tmp_path / "circuit.json"
    circuit.save(path)
    assert Circuit.load(path) == circuit
