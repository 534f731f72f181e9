"""
Heisenberg-picture conjugation g^dagger O g of sparse Pauli sums.

Clifford gates permute keys with a sign; a Pauli rotation exp(-i theta/2 G) keeps keys that
commute with G and branches the others into cos(theta) P + sin(theta) (i G P).
"""

import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from itertools import islice

from obp.circuit.gates import Gate, GateKind, Slice
from obp.errors import DimensionMismatchError, QubitRangeError
from obp.pauli.core import PauliAddress, PauliSum

CHUNK_SIZE = 4096

Contribution = tuple[PauliAddress, float]


def _clifford_contributions(items: Sequence[Contribution], n: int, gate: Gate) -> list[Contribution]:
    mask = (1 << n) - 1
    out = []
    match gate.kind:
        case GateKind.CX:
            bc, bt = 1 << gate.qubits[0], 1 << gate.qubits[1]
            for address, coeff in items:
                z, x = address >> n, address & mask
                if x & bc and z & bt and bool(x & bt) == bool(z & bc):
                    coeff = -coeff
                if x & bc:
                    x ^= bt
                if z & bt:
                    z ^= bc
                out.append(((z << n) | x, coeff))
            return out
        case _:
            b = 1 << gate.qubits[0]
            for address, coeff in items:
                z, x = address >> n, address & mask
                match gate.kind:
                    case GateKind.X:
                        if z & b:
                            coeff = -coeff
                    case GateKind.Y:
                        if (z ^ x) & b:
                            coeff = -coeff
                    case GateKind.Z:
                        if x & b:
                            coeff = -coeff
                    case GateKind.H:
                        if z & x & b:
                            coeff = -coeff
                        elif (z ^ x) & b:
                            z ^= b
                            x ^= b
                    case GateKind.S:
                        if x & b:
                            if not z & b:
                                coeff = -coeff
                            z ^= b
                    case GateKind.Sdg:
                        if x & b:
                            if z & b:
                                coeff = -coeff
                            z ^= b
                    case _:
                        raise ValueError(f"Not a Clifford gate: {gate.kind}")
                out.append(((z << n) | x, coeff))
            return out


def _rotation_contributions(items: Sequence[Contribution], n: int, gate: Gate) -> list[Contribution]:
    mask = (1 << n) - 1
    gz, gx = gate.generator.z, gate.generator.x
    g_phase = (gz & gx).bit_count()
    cos, sin = math.cos(gate.angle), math.sin(gate.angle)
    out = []
    for address, coeff in items:
        z, x = address >> n, address & mask
        if not ((z & gx) ^ (x & gz)).bit_count() & 1:
            out.append((address, coeff))
            continue
        out.append((address, coeff * cos))
        # i * G * P = i^(e + 1) * P(nz, nx); anticommuting Hermitian Paulis give e odd
        nz, nx = gz ^ z, gx ^ x
        e = (g_phase + (z & x).bit_count() + 2 * (gz & x).bit_count() - (nz & nx).bit_count() + 1) % 4
        assert e in (0, 2), f"Rotation produced a non-real phase i^{e} for generator {gate.generator}"
        out.append(((nz << n) | nx, coeff * sin if e == 0 else -coeff * sin))
    return out


def _contributions(items: Sequence[Contribution], n: int, gate: Gate) -> list[Contribution]:
    if gate.kind == GateKind.PauliRotation:
        return _rotation_contributions(items, n, gate)
    return _clifford_contributions(items, n, gate)


def _chunks(items: Iterable[Contribution], size: int) -> list[list[Contribution]]:
    it = iter(items)
    chunks = []
    while chunk := list(islice(it, size)):
        chunks.append(chunk)
    return chunks


def _fold(n: int, batches: Iterable[list[Contribution]]) -> PauliSum:
    terms: dict[PauliAddress, float] = {}
    for batch in batches:
        for address, coeff in batch:
            value = terms.get(address, 0.0) + coeff
            if value == 0.0:
                terms.pop(address, None)
            else:
                terms[address] = value
    return PauliSum.adopt(n, terms)


def _check_gate(s: PauliSum, gate: Gate):
    if any(q >= s.n for q in gate.qubits):
        raise QubitRangeError(f"Gate {gate.kind} on {gate.qubits} exceeds n={s.n}")
    if gate.generator is not None and gate.generator.n != s.n:
        raise DimensionMismatchError(f"Generator has n={gate.generator.n}, sum has n={s.n}")


def conjugate_gate(s: PauliSum, gate: Gate, executor: ThreadPoolExecutor | None = None) -> PauliSum:
    """
    Return gate^dagger s gate.

    Terms are processed in fixed-size chunks of insertion order and folded back in chunk order,
    so the result does not depend on whether an executor is used or how many workers it has.
    """
    _check_gate(s, gate)
    chunks = _chunks(s.items(), CHUNK_SIZE)
    if executor is None or len(chunks) <= 1:
        batches = (_contributions(chunk, s.n, gate) for chunk in chunks)
    else:
        batches = executor.map(lambda chunk: _contributions(chunk, s.n, gate), chunks)
    return _fold(s.n, batches)


def conjugate_slice(s: PauliSum, slice_: Slice, workers: int = 1) -> PauliSum:
    """Conjugate by a whole slice, i.e. by its gates in reverse application order."""
    if workers <= 1:
        for gate in reversed(slice_.gates):
            s = conjugate_gate(s, gate)
        return s
    with ThreadPoolExecutor(max_workers=workers) as executor:
        for gate in reversed(slice_.gates):
            s = conjugate_gate(s, gate, executor)
    return s
