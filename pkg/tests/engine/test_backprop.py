import numpy as np
import pytest

from obp.circuit.gates import Circuit
from obp.circuit.lattice import Lattice
from obp.circuit.metrics import lightcone_prune
from obp.circuit.synthesis import Ordering, synth_xy_trotter
from obp.engine.backprop import BudgetPolicy, BudgetSchedule, EngineLimits, Termination, backpropagate, two_phase_backpropagate
from obp.engine.truncation import Norm
from obp.errors import BudgetError, DimensionMismatchError
from obp.oracle.dense import DenseState, apply_circuit, expectation, heisenberg_matrix, spectral_norm, to_matrix
from obp.pauli.core import PauliSum, l1_norm, merge
from obp.pauli.io import parse_observable


class RecordingSink:
    def __init__(self):
        self.steps = []

    def log(self, metrics: dict, step: int):
        self.steps.append((step, metrics))


def test_exact_backpropagation_matches_dense(make_sum, make_circuit):
    observable = make_sum(3, 5)
    circuit = make_circuit(3, 6)
    result = backpropagate(observable, circuit)
    assert result.termination == Termination.completed
    assert result.slices_completed == 6
    assert result.accrued_error == 0.0
    assert np.allclose(to_matrix(result.operator), heisenberg_matrix(observable, circuit), atol=1e-10)


def test_empty_circuit_returns_observable():
    observable = PauliSum.from_terms(2, [("ZI", 1.0), ("XX", 0.01)])
    result = backpropagate(observable, Circuit(2))
    assert result.operator == observable
    assert result.per_slice_stats == []
    truncated = backpropagate(observable, Circuit(2), BudgetSchedule.even(0.05))
    assert truncated.operator == PauliSum.from_label("ZI")
    assert truncated.final_stats.slice_index == -1
    assert truncated.accrued_error == pytest.approx(0.01)


@pytest.mark.parametrize("norm", [Norm.l1, Norm.l2])
def test_truncated_error_stays_within_bound(make_sum, make_circuit, rng, norm):
    observable = make_sum(4, 3)
    circuit = make_circuit(4, 8, gates_per_slice=4)
    exact = backpropagate(observable, circuit)
    smallest = min(abs(c) for c in exact.operator.coefficients())
    state = DenseState.random(4, rng)
    for schedule in (BudgetSchedule.even(0.2, norm), BudgetSchedule.final_heavy(0.2 + 2 * smallest, 0.5, norm)):
        result = backpropagate(observable, circuit, schedule)
        assert result.accrued_error <= schedule.total * (1 + 1e-12)
        delta = merge(exact.operator, result.operator.scaled(-1.0))
        assert spectral_norm(delta) <= result.accrued_l1 + 1e-8
        assert abs(expectation(state, delta)) <= result.accrued_l1 + 1e-10
    assert result.accrued_error > 0


def test_random_circuits_reconstruct_the_dense_value(make_sum, make_circuit, rng):
    for _ in range(200):
        n = int(rng.integers(2, 9))
        observable = make_sum(n, 3)
        circuit = make_circuit(n, int(rng.integers(1, 21)), gates_per_slice=1)
        state = DenseState.random(n, rng)
        dense = expectation(apply_circuit(state, circuit), observable)
        assert expectation(state, backpropagate(observable, circuit).operator) == pytest.approx(dense, abs=1e-10)
        u_q, u_c = circuit.split(int(rng.integers(0, circuit.num_slices + 1)))
        assert expectation(apply_circuit(state, u_q), backpropagate(observable, u_c).operator) == pytest.approx(dense, abs=1e-10)


def test_random_ten_qubit_errors_stay_within_l1(make_sum, make_circuit, rng):
    for _ in range(100):
        observable = make_sum(10, 2)
        circuit = make_circuit(10, 4, gates_per_slice=2)
        exact = backpropagate(observable, circuit).operator
        result = backpropagate(observable, circuit, BudgetSchedule.even(0.3 * l1_norm(exact), Norm.l1))
        state = DenseState.random(10, rng)
        delta = merge(exact, result.operator.scaled(-1.0))
        assert abs(expectation(state, delta)) <= result.accrued_l1 + 1e-10


def test_slice_statistics_and_carry(make_sum, make_circuit):
    observable = make_sum(3, 4)
    circuit = make_circuit(3, 5)
    result = backpropagate(observable, circuit, BudgetSchedule.even(0.5, Norm.l1))
    stats = result.per_slice_stats
    assert [s.slice_index for s in stats] == [4, 3, 2, 1, 0]
    assert stats[0].budget == pytest.approx(0.1)
    for previous, current in zip(stats, stats[1:]):
        assert current.budget == pytest.approx(0.1 + previous.budget - previous.truncated_weight)
        assert current.accrued_error == pytest.approx(previous.accrued_error + current.truncated_weight)
    assert result.accrued_error == pytest.approx(sum(s.truncated_weight for s in stats))
    assert result.accrued_l1 == pytest.approx(sum(s.truncated_l1 for s in stats))
    assert result.final_stats is None

    no_carry = backpropagate(observable, circuit, BudgetSchedule(total=0.5, carry_forward=False))
    assert all(s.budget == pytest.approx(0.1) for s in no_carry.per_slice_stats)


def test_final_heavy_schedule(make_sum, make_circuit):
    schedule = BudgetSchedule.final_heavy(1.0, 0.8, Norm.l2)
    per_slice, final = schedule.allocate(4)
    assert per_slice == pytest.approx([0.05] * 4)
    assert final == pytest.approx(0.8)
    result = backpropagate(make_sum(3, 4), make_circuit(3, 4), schedule)
    assert result.final_stats is not None
    assert result.pre_final_operator is not None
    assert len(result.operator) <= len(result.pre_final_operator)
    assert result.final_stats.budget >= 0.8


def test_two_phase_schedule_reserves_the_final_budget():
    schedule = BudgetSchedule.two_phase(0.001, 0.009)
    assert schedule.policy == BudgetPolicy.final_heavy
    assert schedule.norm == Norm.l2
    per_slice, final = schedule.allocate(10)
    assert per_slice == pytest.approx([0.0001] * 10)
    assert final == pytest.approx(0.009)
    assert BudgetSchedule.two_phase(0.0, 0.0).allocate(3) == ([0.0] * 3, 0.0)


def test_explicit_schedule():
    schedule = BudgetSchedule.explicit([0.1, 0.0, 0.2], final=0.1)
    assert schedule.policy == BudgetPolicy.explicit
    assert schedule.total == pytest.approx(0.4)
    assert schedule.allocate(3) == ([0.1, 0.0, 0.2], 0.1)
    with pytest.raises(BudgetError):
        schedule.allocate(2)
    with pytest.raises(BudgetError):
        BudgetSchedule(total=1.0, policy=BudgetPolicy.explicit, per_slice=(0.1,))
    with pytest.raises(BudgetError):
        BudgetSchedule(total=1.0, per_slice=(1.0,))
    with pytest.raises(BudgetError):
        BudgetSchedule.final_heavy(1.0, 1.5)


def test_term_limit_stops_early():
    circuit = synth_xy_trotter(Lattice.chain(6, closed=True), 1.0, 0.0, 0.3, 4)
    result = backpropagate(parse_observable("Z0", 6), circuit, limits=EngineLimits(max_terms=3))
    assert result.termination == Termination.term_limit
    assert result.slices_completed < circuit.num_slices
    assert len(result.operator) > 3
    with pytest.raises(BudgetError):
        EngineLimits(max_terms=0)


def test_lightcone_pruning_is_exact():
    circuit = synth_xy_trotter(Lattice.chain(8, closed=True), 1.0, 0.2, 0.1, 2)
    observable = parse_observable("Z0", 8)
    full = backpropagate(observable, circuit).operator
    pruned = backpropagate(observable, lightcone_prune(circuit, [0])).operator
    assert full.addresses() and sorted(full.addresses()) == sorted(pruned.addresses())
    assert all(pruned.coeff(a) == pytest.approx(c, abs=1e-12) for a, c in full.items())


def test_workers_and_tracker(make_sum, make_circuit):
    observable, circuit = make_sum(4, 6), make_circuit(4, 4)
    sink = RecordingSink()
    threaded = backpropagate(observable, circuit, BudgetSchedule.even(0.1), workers=3, tracker=sink)
    assert threaded.operator == backpropagate(observable, circuit, BudgetSchedule.even(0.1)).operator
    assert [step for step, _ in sink.steps] == [1, 2, 3, 4]
    assert set(sink.steps[0][1]) == {"terms_before", "terms_after", "truncated_weight", "accrued_error"}


def test_mismatched_observable():
    with pytest.raises(DimensionMismatchError):
        backpropagate(PauliSum.from_label("ZZ"), Circuit(3))


def test_two_phase_truncation(make_sum, make_circuit):
    observable, circuit = make_sum(4, 4), make_circuit(4, 6)
    result = two_phase_backpropagate(observable, circuit, 0.05, 0.2, Norm.l2)
    assert result.initial_error <= 0.05 * (1 + 1e-12)
    assert result.final_error <= 0.2 * (1 + 1e-12)
    assert result.total_error == pytest.approx(result.initial_error + result.final_error)
    assert len(result.final_operator) <= len(result.initial_operator)
    with pytest.raises(BudgetError):
        two_phase_backpropagate(observable, circuit, 0.05, -1.0)


def test_closed_chain_z0_term_count():
    n = 12
    circuit = synth_xy_trotter(Lattice.chain(n, closed=True), 1.0, 0.0, 0.1, 5, Ordering.first_order)
    observable = parse_observable("Z0", n)
    result = backpropagate(observable, circuit)
    assert [s.terms_after for s in result.per_slice_stats] == [4, 16, 36, 64, 100, 144, 188, 224, 252, 272]
    assert len(result.operator) == 272
    state = DenseState.from_excitations(n, [0, 3, 6, 9])
    exact = expectation(apply_circuit(state, circuit), observable)
    assert expectation(state, result.operator) == pytest.approx(exact, abs=1e-10)


@pytest.mark.parametrize("ordering, terms", [(Ordering.first_order, 272), (Ordering.symmetric, 144)])
def test_merging_keeps_the_term_count(ordering, terms):
    ring = Lattice.chain(12, closed=True)
    observable = parse_observable("Z0", 12)
    merged = backpropagate(observable, synth_xy_trotter(ring, 1.0, 0.0, 0.1, 5, ordering)).operator
    unmerged = backpropagate(observable, synth_xy_trotter(ring, 1.0, 0.0, 0.1, 5, ordering, merge=False)).operator
    assert len(merged) == len(unmerged) == terms
    assert all(unmerged.coeff(a) == pytest.approx(c, abs=1e-12) for a, c in merged.items())
