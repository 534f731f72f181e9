import math

import numpy as np
import pytest

from obp.circuit.gates import Gate
from obp.circuit.lattice import Lattice
from obp.circuit.synthesis import synth_xy_trotter
from obp.errors import DimensionMismatchError, OracleSizeError
from obp.oracle.dense import (
    DenseState,
    apply_circuit,
    apply_gate,
    exact_truncation_error,
    expectation,
    pauli_expectations,
    polarization,
    spectral_norm,
    to_matrix,
    z_expectations,
)
from obp.pauli.core import PauliSum
from obp.pauli.io import polarization as polarization_operator


def test_x_flips_zero():
    out = apply_gate(DenseState.basis(1).amplitudes, 1, Gate.clifford("X", 0))
    assert np.allclose(out, [0, 1])


def test_z_expectation_on_zero():
    assert expectation(DenseState.basis(3), PauliSum.from_label("ZII")) == 1.0
    assert expectation(DenseState.basis(3, 0b001), PauliSum.from_label("ZII")) == -1.0
    assert np.allclose(z_expectations(DenseState.basis(3, 0b100)), [1, 1, -1])


def test_polarization_of_flipped_pattern():
    state = DenseState.from_excitations(12, [2, 8])
    assert polarization(state) == pytest.approx((12 - 4) / 12)
    assert expectation(state, polarization_operator(12)) == pytest.approx((12 - 4) / 12)


def test_trotter_evolution_is_unitary():
    circuit = synth_xy_trotter(Lattice.chain(12, closed=True), 1.0, 0.3, 0.1, 10)
    state = DenseState.from_excitations(12, [0, 5, 7])
    assert apply_circuit(state, circuit).norm() == pytest.approx(1.0, abs=1e-10)


def test_symmetric_ordering_conserves_polarization():
    circuit = synth_xy_trotter(Lattice.chain(8, closed=True), 1.0, 0.4, 0.2, 3)
    for bits in (0b00000000, 0b00010011, 0b10101010, 0b11111110):
        state = DenseState.basis(8, bits)
        assert polarization(apply_circuit(state, circuit)) == pytest.approx(polarization(state), abs=1e-10)


@pytest.mark.parametrize("k", [1, 10, 25])
@pytest.mark.parametrize("n, closed", [(4, False), (7, True), (9, True), (10, True), (10, False)])
def test_polarization_is_conserved_up_to_deep_circuits(n, closed, k, rng):
    circuit = synth_xy_trotter(Lattice.chain(n, closed=closed), 1.0, 0.4, 0.2, k)
    for state in (DenseState.from_excitations(n, range(0, n, 3)), DenseState.random(n, rng)):
        assert polarization(apply_circuit(state, circuit)) == pytest.approx(polarization(state), abs=1e-10)


def test_expectation_is_linear(make_sum, rng):
    s = make_sum(4, 30)
    state = DenseState.random(4, rng)
    dense = np.vdot(state.amplitudes, to_matrix(s) @ state.amplitudes).real
    assert expectation(state, s) == pytest.approx(dense, abs=1e-12)
    values = pauli_expectations(state, s)
    assert math.fsum(c * values[a] for a, c in s.items()) == pytest.approx(dense, abs=1e-12)


def test_spectral_norm():
    assert spectral_norm(PauliSum(2)) == 0.0
    assert spectral_norm(PauliSum.from_terms(1, [("X", 1.0), ("Z", 1.0)])) == pytest.approx(math.sqrt(2), rel=1e-6)
    assert spectral_norm(PauliSum.from_terms(2, [("ZI", 0.6), ("IZ", 0.8)])) == pytest.approx(1.4, rel=1e-6)


def test_exact_truncation_error():
    state = DenseState.basis(2)
    empty = exact_truncation_error(PauliSum(2), state)
    assert (empty.expectation_error, empty.spectral_norm) == (0.0, 0.0)
    error = exact_truncation_error(PauliSum.from_terms(2, [("ZI", -0.5), ("ZZ", 0.25)]), state)
    assert error.expectation_error == pytest.approx(0.25)
    assert error.spectral_norm == pytest.approx(0.75, rel=1e-6)
    assert exact_truncation_error(PauliSum.from_label("ZI"), state, spectral=False).spectral_norm is None


def test_size_and_dimension_checks():
    with pytest.raises(OracleSizeError):
        DenseState.basis(15)
    with pytest.raises(OracleSizeError):
        to_matrix(PauliSum(13))
    with pytest.raises(DimensionMismatchError):
        expectation(DenseState.basis(2), PauliSum.from_label("ZZZ"))
    with pytest.raises(DimensionMismatchError):
        DenseState(2, np.zeros(3))
