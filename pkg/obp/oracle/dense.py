"""
Dense statevector reference used to validate the sparse engine at small n.

Basis index bit q is qubit q, matching the Pauli bit layout.
"""

import math
from dataclasses import dataclass

import numpy as np
from einops import rearrange
from jaxtyping import Complex, Float

from obp.circuit.gates import Circuit, Gate, GateKind
from obp.errors import DimensionMismatchError, OracleSizeError
from obp.pauli.core import PauliSum

MAX_STATE_QUBITS = 14
MAX_OPERATOR_QUBITS = 12
HERMITIAN_ATOL = 1e-10

_SQRT_HALF = 1 / math.sqrt(2)
_SINGLE_QUBIT = {
    GateKind.H: np.array([[_SQRT_HALF, _SQRT_HALF], [_SQRT_HALF, -_SQRT_HALF]], dtype=complex),
    GateKind.S: np.array([[1, 0], [0, 1j]], dtype=complex),
    GateKind.Sdg: np.array([[1, 0], [0, -1j]], dtype=complex),
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    GateKind.Z: np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass
class DenseState:
    n: int
    amplitudes: Complex[np.ndarray, "dim"]

    def __post_init__(self):
        if not 1 <= self.n <= MAX_STATE_QUBITS:
            raise OracleSizeError(f"Dense states support 1..{MAX_STATE_QUBITS} qubits, got {self.n}")
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (1 << self.n,):
            raise DimensionMismatchError(f"Expected {1 << self.n} amplitudes, got shape {self.amplitudes.shape}")

    @classmethod
    def basis(cls, n: int, bits: int = 0) -> "DenseState":
        amplitudes = np.zeros(1 << n, dtype=complex)
        amplitudes[bits] = 1.0
        return cls(n, amplitudes)

    @classmethod
    def from_excitations(cls, n: int, qubits) -> "DenseState":
        return cls.basis(n, sum(1 << q for q in qubits))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "DenseState":
        amplitudes = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        return cls(n, amplitudes / np.linalg.norm(amplitudes))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "DenseState":
        return DenseState(self.n, self.amplitudes.copy())


def _indices(n: int) -> np.ndarray:
    return np.arange(1 << n, dtype=np.int64)


def apply_pauli(vec: Complex[np.ndarray, "dim"], n: int, z: int, x: int) -> Complex[np.ndarray, "dim"]:
    """P(z, x) |vec> for the canonical Pauli i^{|z&x|} X^x Z^z."""
    idx = _indices(n)
    source = idx ^ x
    signs = 1 - 2 * (np.bitwise_count(source & z) & 1).astype(np.int8)
    return (1j ** ((z & x).bit_count() % 4)) * signs * vec[source]


def apply_pauli_sum(s: PauliSum, vec: Complex[np.ndarray, "dim"]) -> Complex[np.ndarray, "dim"]:
    out = np.zeros_like(vec, dtype=complex)
    mask = (1 << s.n) - 1
    for address, coeff in s.items():
        out += coeff * apply_pauli(vec, s.n, address >> s.n, address & mask)
    return out


def _apply_single(amplitudes: np.ndarray, n: int, qubit: int, matrix: np.ndarray) -> np.ndarray:
    psi = rearrange(amplitudes, "(hi q lo) -> hi q lo", q=2, lo=1 << qubit)
    psi = np.einsum("ab,hbl->hal", matrix, psi)
    return rearrange(psi, "hi q lo -> (hi q lo)")


def apply_gate(amplitudes: np.ndarray, n: int, gate: Gate) -> np.ndarray:
    match gate.kind:
        case GateKind.PauliRotation:
            g = gate.generator
            half = gate.angle / 2
            return math.cos(half) * amplitudes - 1j * math.sin(half) * apply_pauli(amplitudes, n, g.z, g.x)
        case GateKind.CX:
            control, target = gate.qubits
            idx = _indices(n)
            return amplitudes[np.where(idx >> control & 1, idx ^ (1 << target), idx)]
        case _:
            return _apply_single(amplitudes, n, gate.qubits[0], _SINGLE_QUBIT[gate.kind])


def apply_circuit(state: DenseState, circuit: Circuit) -> DenseState:
    if state.n != circuit.n:
        raise DimensionMismatchError(f"State has n={state.n}, circuit has n={circuit.n}")
    amplitudes = state.amplitudes
    for gate in circuit.gates():
        amplitudes = apply_gate(amplitudes, state.n, gate)
    return DenseState(state.n, amplitudes)


def expectation(state: DenseState, op: PauliSum) -> float:
    if state.n != op.n:
        raise DimensionMismatchError(f"State has n={state.n}, operator has n={op.n}")
    value = np.vdot(state.amplitudes, apply_pauli_sum(op, state.amplitudes))
    assert abs(value.imag) < HERMITIAN_ATOL, f"Expectation of a Hermitian operator has imaginary part {value.imag}"
    return float(value.real)


def pauli_expectations(state: DenseState, op: PauliSum) -> dict[int, float]:
    """<P> for every key of ``op``, keyed by address."""
    mask = (1 << op.n) - 1
    values = {}
    for address in op.addresses():
        value = np.vdot(state.amplitudes, apply_pauli(state.amplitudes, op.n, address >> op.n, address & mask))
        values[address] = float(value.real)
    return values


def z_expectations(state: DenseState) -> Float[np.ndarray, "n"]:
    probabilities = np.abs(state.amplitudes) ** 2
    idx = _indices(state.n)
    return np.array([float(np.sum(probabilities * (1 - 2 * (idx >> q & 1)))) for q in range(state.n)])


def polarization(state: DenseState) -> float:
    """<M> with M = (1/n) sum_i Z_i."""
    return float(np.mean(z_expectations(state)))


def to_matrix(s: PauliSum) -> Complex[np.ndarray, "dim dim"]:
    if s.n > MAX_OPERATOR_QUBITS:
        raise OracleSizeError(f"Dense operators support up to {MAX_OPERATOR_QUBITS} qubits, got {s.n}")
    dim = 1 << s.n
    return np.stack([apply_pauli_sum(s, np.eye(dim, dtype=complex)[:, col]) for col in range(dim)], axis=1)


def circuit_unitary(circuit: Circuit) -> Complex[np.ndarray, "dim dim"]:
    if circuit.n > MAX_OPERATOR_QUBITS:
        raise OracleSizeError(f"Dense unitaries support up to {MAX_OPERATOR_QUBITS} qubits, got {circuit.n}")
    dim = 1 << circuit.n
    columns = []
    for col in range(dim):
        amplitudes = np.zeros(dim, dtype=complex)
        amplitudes[col] = 1.0
        for gate in circuit.gates():
            amplitudes = apply_gate(amplitudes, circuit.n, gate)
        columns.append(amplitudes)
    return np.stack(columns, axis=1)


def heisenberg_matrix(op: PauliSum, circuit: Circuit) -> Complex[np.ndarray, "dim dim"]:
    """U^dagger O U as a dense matrix."""
    u = circuit_unitary(circuit)
    return u.conj().T @ to_matrix(op) @ u


def spectral_norm(s: PauliSum, tol: float = 1e-8, max_iter: int = 2000, seed: int = 0) -> float:
    """Largest singular value of a Hermitian Pauli sum by power iteration on its square."""
    if s.n > MAX_OPERATOR_QUBITS:
        raise OracleSizeError(f"Spectral norms support up to {MAX_OPERATOR_QUBITS} qubits, got {s.n}")
    if not s:
        return 0.0
    rng = np.random.default_rng(seed)
    vec = rng.normal(size=1 << s.n) + 1j * rng.normal(size=1 << s.n)
    vec /= np.linalg.norm(vec)
    estimate = 0.0
    for _ in range(max_iter):
        nxt = apply_pauli_sum(s, apply_pauli_sum(s, vec))
        value = float(np.linalg.norm(nxt))
        if value == 0.0:
            return 0.0
        vec = nxt / value
        if abs(value - estimate) <= tol * value:
            estimate = value
            break
        estimate = value
    return math.sqrt(estimate)


@dataclass(frozen=True)
class TruncationError:
    expectation_error: float
    spectral_norm: float | None


def exact_truncation_error(delta: PauliSum, state: DenseState, spectral: bool = True) -> TruncationError:
    """|<psi|Delta|psi>| and (optionally) the spectral norm of Delta."""
    if delta.n != state.n:
        raise DimensionMismatchError(f"Delta has n={delta.n}, state has n={state.n}")
    if spectral and delta.n > MAX_OPERATOR_QUBITS:
        raise OracleSizeError(f"Spectral norms support up to {MAX_OPERATOR_QUBITS} qubits, got {delta.n}")
    if not delta:
        return TruncationError(0.0, 0.0 if spectral else None)
    return TruncationError(abs(expectation(state, delta)), spectral_norm(delta) if spectral else None)
