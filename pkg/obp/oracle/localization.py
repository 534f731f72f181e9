"""
Long-time polarization drift of the symmetry-breaking XY Trotterization.

With the ordering that applies all YY couplings before all XX couplings, the Trotter circuit
no longer conserves M = (1/n) sum_i Z_i, but a field mu separating the magnetization sectors
keeps the drift small; it scales like tau^2 / lambda^2 with lambda = mu - 2J.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from jaxtyping import Float

from obp.circuit.gates import Circuit
from obp.circuit.lattice import Lattice
from obp.circuit.synthesis import Ordering, synth_xy_trotter
from obp.errors import OracleSizeError
from obp.oracle.dense import MAX_STATE_QUBITS, DenseState, apply_gate, polarization

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)

DEFAULT_WINDOW = (200, 400)


def polarization_trace(state: DenseState, step: Circuit, steps: int) -> Float[np.ndarray, "steps_plus_one"]:
    """<M> after 0..steps repetitions of the one-step circuit ``step``."""
    amplitudes = state.amplitudes
    values = [polarization(state)]
    gates = list(step.gates())
    for _ in range(steps):
        for gate in gates:
            amplitudes = apply_gate(amplitudes, state.n, gate)
        values.append(polarization(DenseState(state.n, amplitudes)))
    return np.asarray(values)


def localization_deviation(
    n: int,
    tau: float,
    mu: float,
    J: float = 1.0,
    window: tuple[int, int] = DEFAULT_WINDOW,
    closed: bool = True,
    initial: DenseState | None = None,
) -> float:
    """
    Time average of |<M>_t - <M>_0| over Trotter steps window[0]..window[1] (inclusive), i.e.
    times [window[0] tau, window[1] tau], starting from the all-zero state by default.
    """
    if n > MAX_STATE_QUBITS:
        raise OracleSizeError(f"Localization runs support up to {MAX_STATE_QUBITS} qubits, got {n}")
    start, stop = window
    if start < 0 or stop < start:
        raise ValueError(f"Empty averaging window {window}")
    step = synth_xy_trotter(Lattice.chain(n, closed=closed), J, mu, tau, 1, Ordering.xx_then_yy)
    state = initial if initial is not None else DenseState.basis(n)
    trace = polarization_trace(state, step, stop)
    return float(np.mean(np.abs(trace[start : stop + 1] - trace[0])))


@dataclass(frozen=True)
class LocalizationPoint:
    tau: float
    mu: float
    delta: float

    def collapse(self, J: float, shift: float = 2.0) -> float:
        """Delta * (mu - shift J)^2 / tau^2; nan at tau = 0."""
        if self.tau == 0:
            return float("nan")
        return self.delta * (self.mu - shift * J) ** 2 / self.tau**2


def localization_scan(
    n: int, taus: Sequence[float], mus: Sequence[float], J: float = 1.0, window: tuple[int, int] = DEFAULT_WINDOW, closed: bool = True
) -> list[LocalizationPoint]:
    points = []
    for mu in mus:
        for tau in taus:
            delta = localization_deviation(n, tau, mu, J, window, closed)
            logger.info(f"mu={mu:g} tau={tau:g}: Delta={delta:.4e}")
            points.append(LocalizationPoint(float(tau), float(mu), delta))
    return points


def fit_loglog_slope(taus: Sequence[float], deltas: Sequence[float]) -> float:
    """Least-squares slope of log Delta against log tau over points with positive values."""
    pairs = [(t, d) for t, d in zip(taus, deltas, strict=True) if t > 0 and d > 0]
    if len(pairs) < 2:
        raise ValueError("Need at least two positive points to fit a slope")
    x, y = np.log([p[0] for p in pairs]), np.log([p[1] for p in pairs])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def collapse_spread(points: Sequence[LocalizationPoint], J: float, shift: float = 2.0) -> float:
    """max/min of the collapsed values over points with tau > 0."""
    values = [p.collapse(J, shift) for p in points if p.tau > 0]
    if not values or min(values) <= 0:
        return float("inf")
    return max(values) / min(values)
