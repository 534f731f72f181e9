from dataclasses import dataclass, field
from enum import StrEnum

from hydra.core.config_store import ConfigStore

from obp.circuit.lattice import LatticeKind
from obp.circuit.synthesis import Ordering
from obp.distributed.bus import TransportKind
from obp.engine.backprop import BudgetPolicy
from obp.engine.truncation import Norm
from obp.errors import ConfigError
from obp.grouping import GroupingStrategy
from obp.oracle.dense import MAX_STATE_QUBITS


class Command(StrEnum):
    backprop = "backprop"
    synth = "synth"
    bench_bounds = "bench_bounds"
    localization = "localization"
    distributed = "distributed"
    group = "group"
    sweep = "sweep"


@dataclass(unsafe_hash=True, eq=True)
class CircuitConfig:
    path: str | None = None  # circuit JSON; the XY Trotter circuit is synthesized when unset
    lattice: LatticeKind = LatticeKind.chain_closed
    lattice_path: str | None = None
    qubits: int = 12
    steps: int = 5
    tau: float = 0.1
    J: float = 1.0
    h: float = 0.0
    ordering: Ordering = Ordering.symmetric
    merge: bool = True
    lightcone: bool = True
    tail_slices: int | None = None  # backpropagate through the last slices only, a U_C cut from a deeper circuit


@dataclass(unsafe_hash=True, eq=True)
class ObservableConfig:
    spec: str = "Z0"  # dense label, sparse label ("X3 Y4"), "polarization" or a JSON path
    per_site: bool = False  # backpropagate every Z_i separately and report per-site statistics
    grouping: GroupingStrategy = GroupingStrategy.sorted_insertion


@dataclass(unsafe_hash=True, eq=True)
class BudgetConfig:
    total: float = 0.0
    norm: Norm = Norm.l1
    policy: BudgetPolicy = BudgetPolicy.even
    final_fraction: float = 0.0
    per_slice: list[float] = field(default_factory=list)
    final: float = 0.0
    carry_forward: bool = True


@dataclass(unsafe_hash=True, eq=True)
class LimitsConfig:
    max_terms: int | None = None
    max_seconds: float | None = None


@dataclass(unsafe_hash=True, eq=True)
class ClusterConfig:
    nodes: int = 1
    transport: TransportKind = TransportKind.inproc
    rebalance: bool = True
    workers: int = 1  # threads running node steps between barriers


@dataclass(unsafe_hash=True, eq=True)
class BenchConfig:
    levels: int = 60
    spectral: bool = False  # power-iteration spectral norm of every removed set; slow beyond ~10 qubits
    excitations: int | None = None  # evenly spaced |1> qubits in the initial state; n // 2 when unset
    prepared_steps: int | None = None  # Trotter steps in U_Q ahead of the backpropagated circuit; circuit.steps when unset


@dataclass(unsafe_hash=True, eq=True)
class LocalizationConfig:
    qubits: int = 12
    J: float = 1.0
    taus: list[float] = field(default_factory=lambda: [0.0, 0.01, 0.0141, 0.02, 0.0283, 0.04])
    mus: list[float] = field(default_factory=lambda: [4.0, 5.0, 6.0])
    window_start: int = 200
    window_stop: int = 400
    closed: bool = True
    stable_product: float = 1.0  # points with mu * tau below this enter the slope fits


@dataclass(unsafe_hash=True, eq=True)
class SweepConfig:
    kc: int = 5
    kmax: int = 25
    stride: int = 1
    excitations: int | None = None


@dataclass(unsafe_hash=True, eq=True)
class TrackingConfig:
    enabled: bool = False
    entity: str | None = None
    project: str = "obp"
    name: str | None = None


@dataclass(unsafe_hash=True, eq=True)
class Config:
    command: Command = Command.backprop
    circuit: CircuitConfig = field(default_factory=CircuitConfig)
    observable: ObservableConfig = field(default_factory=ObservableConfig)
    budget: BudgetConfig = field(default_factory=BudgetConfig)
    limits: LimitsConfig = field(default_factory=LimitsConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    localization: LocalizationConfig = field(default_factory=LocalizationConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    tracking: TrackingConfig = field(default_factory=TrackingConfig)
    seed: int = 0
    threads: int = 1
    progress: bool = False
    out: str = "results"


def _require(condition: bool, message: str):
    if not condition:
        raise ConfigError(message)


def validate_config(cfg: Config) -> None:
    """Reject configurations that cannot run, naming the offending values."""
    c = cfg.circuit
    _require(c.qubits >= 1, f"circuit.qubits must be positive, got {c.qubits}")
    _require(c.path is not None or c.steps >= 1, f"circuit.steps must be at least 1 to synthesize, got {c.steps}")
    _require(c.tau >= 0, f"circuit.tau must be non-negative, got {c.tau}")
    _require(c.tail_slices is None or c.tail_slices >= 1, f"circuit.tail_slices must be positive, got {c.tail_slices}")

    b = cfg.budget
    _require(b.total >= 0 and b.final >= 0, f"Budgets must be non-negative, got total={b.total}, final={b.final}")
    _require(0.0 <= b.final_fraction <= 1.0, f"budget.final_fraction must lie in [0, 1], got {b.final_fraction}")
    _require(all(x >= 0 for x in b.per_slice), f"budget.per_slice must be non-negative, got {list(b.per_slice)}")
    if b.policy != BudgetPolicy.explicit:
        _require(not b.per_slice, f"budget.per_slice is only read by the explicit policy, not {b.policy}")

    lim = cfg.limits
    _require(lim.max_terms is None or lim.max_terms > 0, f"limits.max_terms must be positive, got {lim.max_terms}")
    _require(lim.max_seconds is None or lim.max_seconds > 0, f"limits.max_seconds must be positive, got {lim.max_seconds}")

    _require(cfg.cluster.nodes >= 1, f"cluster.nodes must be positive, got {cfg.cluster.nodes}")
    _require(cfg.cluster.workers >= 1, f"cluster.workers must be positive, got {cfg.cluster.workers}")
    _require(cfg.threads >= 1, f"threads must be positive, got {cfg.threads}")
    _require(cfg.bench.levels >= 1, f"bench.levels must be positive, got {cfg.bench.levels}")
    _require(cfg.bench.prepared_steps is None or cfg.bench.prepared_steps >= 0, f"bench.prepared_steps must be non-negative, got {cfg.bench.prepared_steps}")

    loc = cfg.localization
    _require(1 <= loc.qubits <= MAX_STATE_QUBITS, f"localization.qubits must lie in 1..{MAX_STATE_QUBITS}, got {loc.qubits}")
    _require(0 <= loc.window_start <= loc.window_stop, f"Empty localization window [{loc.window_start}, {loc.window_stop}]")
    _require(all(t >= 0 for t in loc.taus), f"localization.taus must be non-negative, got {list(loc.taus)}")

    s = cfg.sweep
    _require(1 <= s.kc <= s.kmax, f"Sweep needs 1 <= kc <= kmax, got kc={s.kc}, kmax={s.kmax}")
    _require(s.stride >= 1, f"sweep.stride must be positive, got {s.stride}")
    if cfg.command in (Command.sweep, Command.bench_bounds):
        _require(c.qubits <= MAX_STATE_QUBITS, f"{cfg.command} evaluates dense states, circuit.qubits must be <= {MAX_STATE_QUBITS}")


def register_configs():
    cs = ConfigStore.instance()
    cs.store(group="circuit", name="base_circuit", node=CircuitConfig)
    cs.store(group="observable", name="base_observable", node=ObservableConfig)
    cs.store(group="budget", name="base_budget", node=BudgetConfig)
    cs.store(group="limits", name="base_limits", node=LimitsConfig)
    cs.store(group="cluster", name="base_cluster", node=ClusterConfig)
    cs.store(group="bench", name="base_bench", node=BenchConfig)
    cs.store(group="localization", name="base_localization", node=LocalizationConfig)
    cs.store(group="sweep", name="base_sweep", node=SweepConfig)
    cs.store(group="tracking", name="base_tracking", node=TrackingConfig)
    cs.store(name="base_config", node=Config)
