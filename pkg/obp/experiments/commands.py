import logging
import math
import statistics
import time
from dataclasses import asdict, is_dataclass
from pathlib import Path

from humanfriendly import format_timespan
from omegaconf import DictConfig, OmegaConf

from obp.circuit.gates import Circuit
from obp.circuit.lattice import Lattice, build_lattice
from obp.circuit.metrics import expected_two_qubit_depth, lightcone_prune, two_qubit_depth, two_qubit_gate_count
from obp.circuit.synthesis import Ordering, synth_xy_trotter
from obp.config import Command, Config
from obp.distributed.pipeline import distributed_backpropagate
from obp.engine.backprop import BackpropResult, BudgetPolicy, BudgetSchedule, EngineLimits, Termination, backpropagate
from obp.engine.truncation import Norm, error_bound, truncation_order
from obp.errors import ConfigError
from obp.experiments.outputs import write_csv, write_json, write_timings
from obp.experiments.tracking import RunTracker
from obp.grouping import GroupingStrategy, group_operator, group_union, groups_to_json
from obp.oracle.dense import DenseState, apply_circuit, expectation, pauli_expectations, spectral_norm
from obp.oracle.localization import LocalizationPoint, collapse_spread, fit_loglog_slope, localization_scan
from obp.pauli.core import PauliSum
from obp.pauli.io import load_observable, parse_observable, site_observables, sum_to_json

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_LIMIT = 3

STATS_COLUMNS = ["slice_index", "terms_before", "terms_after", "budget", "truncated_weight", "truncated_l1", "truncated_l2", "accrued_error"]
TABLE_COLUMNS = ["sites", "unique_before", "unique_after", "mean_before", "median_before", "mean_after", "median_after", "groups"]


def config_dict(cfg: Config | DictConfig) -> dict:
    if is_dataclass(cfg):
        cfg = OmegaConf.structured(cfg)
    return OmegaConf.to_container(cfg, resolve=True, throw_on_missing=False, enum_to_str=True)


def build_lattice_for(cfg: Config) -> Lattice:
    c = cfg.circuit
    return build_lattice(c.lattice, c.qubits, c.lattice_path)


def build_circuit(cfg: Config, steps: int | None = None, merge: bool | None = None) -> Circuit:
    c = cfg.circuit
    if c.path is not None and steps is None:
        circuit = Circuit.load(c.path)
        if circuit.n != c.qubits:
            raise ConfigError(f"Circuit {c.path} acts on {circuit.n} qubits, circuit.qubits={c.qubits}")
        return circuit
    return synth_xy_trotter(build_lattice_for(cfg), c.J, c.h, c.tau, steps or c.steps, Ordering(c.ordering), c.merge if merge is None else merge)


def backprop_circuit(cfg: Config) -> Circuit:
    """The circuit to backpropagate through: the whole circuit, or its last ``circuit.tail_slices`` slices."""
    circuit = build_circuit(cfg)
    tail = cfg.circuit.tail_slices
    if tail is None:
        return circuit
    if tail > circuit.num_slices:
        raise ConfigError(f"circuit.tail_slices={tail} exceeds the {circuit.num_slices} slices of the circuit")
    return circuit.split(circuit.num_slices - tail)[1]


def split_trotter(cfg: Config, prepared: int, backpropagated: int) -> tuple[Circuit, Circuit]:
    """(U_Q, U_C): the first ``prepared`` unmerged Trotter steps and the ``backpropagated`` steps after them."""
    k = prepared + backpropagated
    circuit = build_circuit(cfg, steps=k, merge=False)
    return circuit.split(prepared * (circuit.num_slices // k))


def build_budget(cfg: Config) -> BudgetSchedule:
    b = cfg.budget
    match BudgetPolicy(b.policy):
        case BudgetPolicy.explicit:
            return BudgetSchedule(
                total=math.fsum(b.per_slice) + b.final,
                norm=b.norm,
                policy=BudgetPolicy.explicit,
                per_slice=tuple(b.per_slice),
                final=b.final,
                carry_forward=b.carry_forward,
            )
        case BudgetPolicy.final_heavy:
            return BudgetSchedule(total=b.total, norm=b.norm, policy=BudgetPolicy.final_heavy, final_fraction=b.final_fraction, carry_forward=b.carry_forward)
        case _:
            return BudgetSchedule(total=b.total, norm=b.norm, carry_forward=b.carry_forward)


def build_limits(cfg: Config) -> EngineLimits:
    return EngineLimits(cfg.limits.max_terms, cfg.limits.max_seconds)


def build_observables(cfg: Config) -> list[PauliSum]:
    n = cfg.circuit.qubits
    if cfg.observable.per_site:
        return site_observables(n)
    return [parse_observable(cfg.observable.spec, n)]


def excitation_state(n: int, count: int | None) -> DenseState:
    """Basis state with ``count`` (default n // 2) evenly spaced qubits in |1>."""
    count = n // 2 if count is None else count
    if not 0 <= count <= n:
        raise ConfigError(f"Cannot place {count} excitations on {n} qubits")
    return DenseState.from_excitations(n, [(i * n) // count for i in range(count)] if count else [])


def _prune(circuit: Circuit, observable: PauliSum, enabled: bool) -> Circuit:
    support = observable.support()
    return lightcone_prune(circuit, support) if enabled and support else circuit


def _stats_rows(result: BackpropResult, site: int | None = None) -> list[dict]:
    rows = [s.to_row() for s in result.per_slice_stats]
    if result.final_stats is not None:
        rows.append(result.final_stats.to_row())
    if site is not None:
        rows = [{"site": site, **row} for row in rows]
    return rows


def _operator_payload(result: BackpropResult) -> dict:
    return {
        "n": result.operator.n,
        "operator": sum_to_json(result.operator),
        "terms": len(result.operator),
        "termination": str(result.termination),
        "slices_completed": result.slices_completed,
        "accrued_error": result.accrued_error,
        "accrued_l1": result.accrued_l1,
        "accrued_l2": result.accrued_l2,
    }


def _groups_payload(operator: PauliSum, strategy: GroupingStrategy) -> dict:
    groups = group_operator(operator, strategy) if operator else []
    return {"groups": groups_to_json(groups), "num_groups": len(groups), "num_terms": len(operator)}


def site_table(results: list[BackpropResult], strategy: GroupingStrategy = GroupingStrategy.sorted_insertion) -> dict:
    """Unique-Pauli, per-site and group statistics over per-site runs, before and after the final pass."""
    before = [r.pre_final_operator if r.pre_final_operator is not None else r.operator for r in results]
    after = [r.operator for r in results]
    unique_before = set().union(*(op.addresses() for op in before))
    unique_after = set().union(*(op.addresses() for op in after))
    nonempty = [op for op in after if op]
    return {
        "sites": len(results),
        "unique_before": len(unique_before),
        "unique_after": len(unique_after),
        "mean_before": statistics.fmean(len(op) for op in before),
        "median_before": float(statistics.median(len(op) for op in before)),
        "mean_after": statistics.fmean(len(op) for op in after),
        "median_after": float(statistics.median(len(op) for op in after)),
        "groups": len(group_union(nonempty, strategy)) if nonempty else 0,
    }


def write_backprop_outputs(out: Path, results: list[BackpropResult], per_site: bool, config: dict, strategy: GroupingStrategy = GroupingStrategy.sorted_insertion) -> None:
    if per_site:
        write_json(out / "operators.json", {"sites": [_operator_payload(r) for r in results]}, config)
        rows = [row for site, r in enumerate(results) for row in _stats_rows(r, site)]
        write_csv(out / "stats.csv", ["site", *STATS_COLUMNS], rows, config)
        write_csv(out / "table.csv", TABLE_COLUMNS, [site_table(results, strategy)], config)
        nonempty = [r.operator for r in results if r.operator]
        groups = group_union(nonempty, strategy) if nonempty else []
        write_json(out / "groups.json", {"groups": groups_to_json(groups), "num_groups": len(groups), "num_terms": sum(len(g) for g in groups)}, config)
        return
    (result,) = results
    write_json(out / "operator.json", _operator_payload(result), config)
    write_csv(out / "stats.csv", STATS_COLUMNS, _stats_rows(result), config)
    write_json(out / "groups.json", _groups_payload(result.operator, strategy), config)


def _exit_code(results: list[BackpropResult]) -> int:
    return EXIT_OK if all(r.termination == Termination.completed for r in results) else EXIT_LIMIT


def cmd_backprop(cfg: Config, tracker: RunTracker) -> int:
    out = Path(cfg.out)
    circuit = backprop_circuit(cfg)
    budget, limits = build_budget(cfg), build_limits(cfg)
    results = []
    start = time.perf_counter()
    for observable in build_observables(cfg):
        pruned = _prune(circuit, observable, cfg.circuit.lightcone)
        results.append(backpropagate(observable, pruned, budget, limits, workers=cfg.threads, tracker=tracker, progress=cfg.progress))
    elapsed = time.perf_counter() - start
    write_backprop_outputs(out, results, cfg.observable.per_site, config_dict(cfg), cfg.observable.grouping)
    tracker.save(out / "stats.csv", base_path=out)
    write_timings(out / "timings.json", {"backprop_seconds": elapsed, "per_observable_seconds": [r.elapsed for r in results]})
    logger.info(f"Backpropagated {len(results)} observable(s) in {format_timespan(elapsed)}; results in {out}")
    return _exit_code(results)


def cmd_distributed(cfg: Config, tracker: RunTracker) -> int:
    if cfg.observable.per_site:
        raise ConfigError("The distributed command backpropagates a single observable; unset observable.per_site")
    out = Path(cfg.out)
    circuit = backprop_circuit(cfg)
    (observable,) = build_observables(cfg)
    start = time.perf_counter()
    run = distributed_backpropagate(
        observable,
        _prune(circuit, observable, cfg.circuit.lightcone),
        build_budget(cfg),
        build_limits(cfg),
        nodes=cfg.cluster.nodes,
        transport=cfg.cluster.transport,
        seed=cfg.seed,
        workers=cfg.cluster.workers,
        balance=cfg.cluster.rebalance,
        tracker=tracker,
        progress=cfg.progress,
    )
    elapsed = time.perf_counter() - start
    config = config_dict(cfg)
    try:
        write_backprop_outputs(out, [run.result], False, config, cfg.observable.grouping)
        write_csv(out / "traffic.csv", ["slice_index", "dedup_messages", "rebalance_messages", "truncation_rounds", "truncation_messages"], [t.to_row() for t in run.traffic], config)
        run.cluster.bus.dump_jsonl(out / "message_log.jsonl")
        tracker.save(out / "traffic.csv", base_path=out)
    finally:
        run.cluster.close()
    write_timings(out / "timings.json", {"backprop_seconds": elapsed})
    logger.info(f"Distributed run over {cfg.cluster.nodes} nodes finished in {format_timespan(elapsed)}; {len(run.cluster.message_log)} messages")
    return _exit_code([run.result])


def cmd_synth(cfg: Config, tracker: RunTracker) -> int:
    out = Path(cfg.out)
    lattice = build_lattice_for(cfg)
    circuit = build_circuit(cfg)
    k = cfg.circuit.steps
    symmetric_merged = Ordering(cfg.circuit.ordering) == Ordering.symmetric and cfg.circuit.merge
    report = {
        "n": circuit.n,
        "steps": k,
        "num_colors": lattice.num_colors,
        "num_slices": circuit.num_slices,
        "num_gates": circuit.num_gates,
        "two_qubit_gates": two_qubit_gate_count(circuit),
        "two_qubit_depth": two_qubit_depth(circuit),
        "expected_two_qubit_depth": expected_two_qubit_depth(lattice.num_colors, k) if symmetric_merged else None,
    }
    if cfg.circuit.merge:
        report["unmerged_two_qubit_depth"] = two_qubit_depth(build_circuit(cfg, merge=False))
    write_json(out / "circuit.json", circuit.to_json(), config_dict(cfg))
    write_json(out / "synth_report.json", report, config_dict(cfg))
    tracker.summary(report)
    logger.info(f"Synthesized {report['two_qubit_gates']} two-qubit gates at depth {report['two_qubit_depth']} on {circuit.n} qubits")
    return EXIT_OK


def cmd_bench_bounds(cfg: Config, tracker: RunTracker) -> int:
    """
    Truncate the observable, exactly backpropagated through U_C, at evenly spaced levels and
    compare the exact error of its expectation in psi_Q = U_Q |excitations> (and optionally the
    spectral norm of the removed part) with the L1 bound and the L2 estimate. U_Q is the
    ``bench.prepared_steps`` Trotter steps ahead of the ``circuit.steps`` in U_C; a circuit file
    is taken as U_C with an empty U_Q.
    """
    out = Path(cfg.out)
    (observable,) = build_observables(cfg)
    if cfg.circuit.path is None:
        prepared = cfg.circuit.steps if cfg.bench.prepared_steps is None else cfg.bench.prepared_steps
        u_q, u_c = split_trotter(cfg, prepared, cfg.circuit.steps)
    else:
        u_c = build_circuit(cfg)
        u_q = Circuit(u_c.n)
    exact = backpropagate(observable, _prune(u_c, observable, cfg.circuit.lightcone))
    operator = exact.operator
    state = apply_circuit(excitation_state(u_c.n, cfg.bench.excitations), u_q)
    values = pauli_expectations(state, operator)
    order = [address for _, address in truncation_order(operator)]
    levels = cfg.bench.levels
    rows = []
    for level in range(levels + 1):
        removed = order[: round(level * len(order) / levels)]
        coeffs = [operator.coeff(a) for a in removed]
        row = {
            "level": level,
            "removed_terms": len(removed),
            "exact_error": abs(math.fsum(operator.coeff(a) * values[a] for a in removed)),
            "spectral_error": None,
            "l1_bound": error_bound(coeffs, Norm.l1),
            "l2_estimate": error_bound(coeffs, Norm.l2),
        }
        if cfg.bench.spectral:
            row["spectral_error"] = spectral_norm(PauliSum.adopt(operator.n, {a: operator.coeff(a) for a in removed}))
        rows.append(row)
        tracker.log(row, level)
    write_csv(out / "bounds.csv", ["level", "removed_terms", "exact_error", "spectral_error", "l1_bound", "l2_estimate"], rows, config_dict(cfg))
    logger.info(f"Benchmarked {levels + 1} truncation levels of a {len(operator)}-term operator")
    return EXIT_OK


def _stable(points: list[LocalizationPoint], limit: float) -> list[LocalizationPoint]:
    return [p for p in points if p.tau > 0 and p.mu * p.tau < limit]


def cmd_localization(cfg: Config, tracker: RunTracker) -> int:
    out = Path(cfg.out)
    loc = cfg.localization
    start = time.perf_counter()
    points = localization_scan(loc.qubits, list(loc.taus), list(loc.mus), loc.J, (loc.window_start, loc.window_stop), loc.closed)
    elapsed = time.perf_counter() - start
    rows = [{**asdict(p), "collapse_2J": p.collapse(loc.J, 2.0), "collapse_J": p.collapse(loc.J, 1.0)} for p in points]
    stable = _stable(points, loc.stable_product)
    slopes = {}
    for mu in loc.mus:
        series = [p for p in stable if p.mu == mu]
        try:
            slopes[f"{mu:g}"] = fit_loglog_slope([p.tau for p in series], [p.delta for p in series])
        except ValueError:
            slopes[f"{mu:g}"] = None
    fit = {"slopes": slopes, "spread_2J": collapse_spread(stable, loc.J, 2.0), "spread_J": collapse_spread(stable, loc.J, 1.0), "stable_points": len(stable)}
    config = config_dict(cfg)
    write_csv(out / "localization.csv", ["tau", "mu", "delta", "collapse_2J", "collapse_J"], rows, config)
    write_json(out / "localization_fit.json", fit, config)
    write_timings(out / "timings.json", {"localization_seconds": elapsed})
    tracker.summary({f"slope_mu_{mu}": s for mu, s in slopes.items() if s is not None})
    logger.info(f"Localization scan of {len(points)} points in {format_timespan(elapsed)}: slopes {slopes}")
    return EXIT_OK


def cmd_group(cfg: Config, tracker: RunTracker) -> int:
    out = Path(cfg.out)
    spec = cfg.observable.spec
    operator = load_observable(spec) if spec.endswith(".json") else parse_observable(spec, cfg.circuit.qubits)
    payload = _groups_payload(operator, cfg.observable.grouping)
    write_json(out / "groups.json", payload, config_dict(cfg))
    tracker.summary({"num_groups": payload["num_groups"], "num_terms": payload["num_terms"]})
    logger.info(f"Grouped {payload['num_terms']} Paulis into {payload['num_groups']} qubit-wise commuting groups")
    return EXIT_OK


def cmd_sweep(cfg: Config, tracker: RunTracker) -> int:
    """
    For every k in kc..kmax, backpropagate the observable through the last kc Trotter steps and
    evaluate it on the state prepared by the first k - kc steps; compare with the dense value of
    the full circuit and with the accrued L1 bound.
    """
    out = Path(cfg.out)
    s = cfg.sweep
    (observable,) = build_observables(cfg)
    initial = excitation_state(cfg.circuit.qubits, s.excitations)
    budget, limits = build_budget(cfg), build_limits(cfg)
    rows = []
    results = []
    for k in range(s.kc, s.kmax + 1, s.stride):
        u_q, u_c = split_trotter(cfg, k - s.kc, s.kc)
        result = backpropagate(observable, _prune(u_c, observable, cfg.circuit.lightcone), budget, limits, workers=cfg.threads)
        results.append(result)
        estimate = expectation(apply_circuit(initial, u_q), result.operator) if result.operator else 0.0
        exact = expectation(apply_circuit(initial, u_q.concat(u_c)), observable)
        error = abs(estimate - exact)
        row = {
            "k": k,
            "terms": len(result.operator),
            "groups": len(group_operator(result.operator, cfg.observable.grouping)) if result.operator else 0,
            "estimate": estimate,
            "exact": exact,
            "error": error,
            "l1_bound": result.accrued_l1,
            "within_bound": error <= result.accrued_l1 + 1e-10,
        }
        rows.append(row)
        tracker.log({key: v for key, v in row.items() if key != "within_bound"}, k)
    write_csv(out / "sweep.csv", ["k", "terms", "groups", "estimate", "exact", "error", "l1_bound", "within_bound"], rows, config_dict(cfg))
    logger.info(f"Swept k={s.kc}..{s.kmax}: {sum(r['within_bound'] for r in rows)}/{len(rows)} estimates within the L1 bound")
    return _exit_code(results)


COMMANDS = {
    Command.backprop: cmd_backprop,
    Command.synth: cmd_synth,
    Command.bench_bounds: cmd_bench_bounds,
    Command.localization: cmd_localization,
    Command.distributed: cmd_distributed,
    Command.group: cmd_group,
    Command.sweep: cmd_sweep,
}
