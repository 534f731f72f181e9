import pytest

from obp.circuit.lattice import Lattice
from obp.circuit.synthesis import synth_xy_trotter
from obp.distributed.pipeline import distributed_backpropagate
from obp.engine.backprop import BudgetSchedule, EngineLimits, Termination, backpropagate
from obp.engine.truncation import Norm
from obp.errors import DimensionMismatchError
from obp.pauli.core import PauliSum, l1_norm, merge
from obp.pauli.io import parse_observable, polarization


@pytest.fixture
def ring_circuit():
    return synth_xy_trotter(Lattice.chain(8, closed=True), 1.0, 0.3, 0.1, 3)


def difference(a: PauliSum, b: PauliSum) -> float:
    return l1_norm(merge(a, b.scaled(-1.0)))


def test_single_node_reproduces_backpropagate(ring_circuit):
    observable = polarization(8)
    budget = BudgetSchedule.even(0.02, Norm.l1)
    single = backpropagate(observable, ring_circuit, budget)
    run = distributed_backpropagate(observable, ring_circuit, budget, nodes=1)
    assert run.result.operator == single.operator
    assert run.result.accrued_error == single.accrued_error
    assert run.result.per_slice_stats == single.per_slice_stats
    assert all(t.dedup_messages == 0 and t.rebalance_messages == 0 for t in run.traffic)


@pytest.mark.parametrize("nodes", [2, 4])
def test_cluster_matches_single_node(make_sum, make_circuit, nodes):
    observable, circuit = make_sum(5, 20), make_circuit(5, 6, gates_per_slice=4)
    budget = BudgetSchedule.final_heavy(0.05, 0.5, Norm.l2)
    single = backpropagate(observable, circuit, budget)
    run = distributed_backpropagate(observable, circuit, budget, nodes=nodes, seed=3)
    result = run.result
    assert result.termination == Termination.completed
    assert sorted(result.operator.addresses()) == sorted(single.operator.addresses())
    assert difference(result.operator, single.operator) < 1e-12
    assert result.accrued_error == pytest.approx(single.accrued_error, rel=1e-9)
    assert result.final_stats is not None
    assert [s.terms_after for s in result.per_slice_stats] == [s.terms_after for s in single.per_slice_stats]


@pytest.mark.parametrize("nodes", [2, 4, 8])
def test_large_operator_matches_single_node(make_sum, make_circuit, nodes):
    observable, circuit = make_sum(8, 10_000), make_circuit(8, 3, gates_per_slice=2)
    budget = BudgetSchedule.final_heavy(0.5, 0.5, Norm.l2)
    single = backpropagate(observable, circuit, budget)
    run = distributed_backpropagate(observable, circuit, budget, nodes=nodes)
    assert run.result.termination == Termination.completed
    assert sorted(run.result.operator.addresses()) == sorted(single.operator.addresses())
    assert all(run.result.operator.coeff(a) == pytest.approx(c, abs=1e-12) for a, c in single.operator.items())
    for t in run.traffic:
        assert t.dedup_messages <= nodes * (nodes - 1)
        assert t.rebalance_messages <= 6 * nodes - 6


def test_traffic_bounds(ring_circuit):
    nodes = 4
    run = distributed_backpropagate(polarization(8), ring_circuit, BudgetSchedule.even(0.01), nodes=nodes)
    assert len(run.traffic) == ring_circuit.num_slices
    for t in run.traffic:
        assert t.dedup_messages <= nodes * (nodes - 1)
        assert t.rebalance_messages <= 6 * nodes - 6
        assert t.truncation_rounds >= 2
        assert t.truncation_messages == 2 * (nodes - 1) * (t.truncation_rounds - 1)
    assert sum(node.sent_messages for node in run.cluster.nodes) == len(run.cluster.message_log)


def test_without_rebalancing_results_match(ring_circuit):
    observable = parse_observable("Z3", 8)
    balanced = distributed_backpropagate(observable, ring_circuit, nodes=3).result.operator
    fixed = distributed_backpropagate(observable, ring_circuit, nodes=3, balance=False)
    assert all(t.rebalance_messages == 0 for t in fixed.traffic)
    assert difference(fixed.result.operator, balanced) < 1e-12


def test_term_limit(ring_circuit):
    run = distributed_backpropagate(parse_observable("Z0", 8), ring_circuit, limits=EngineLimits(max_terms=2), nodes=2)
    assert run.result.termination == Termination.term_limit
    assert run.result.slices_completed < ring_circuit.num_slices
    assert len(run.result.operator) > 2


def test_mismatched_observable(ring_circuit):
    with pytest.raises(DimensionMismatchError):
        distributed_backpropagate(PauliSum.from_label("ZZ"), ring_circuit, nodes=2)
