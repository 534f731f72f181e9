import json
import re
from pathlib import Path

from obp.errors import DimensionMismatchError, QubitRangeError
from obp.pauli.core import PauliKey, PauliSum, address_label

_SPARSE_TOKEN = re.compile(r"([IXYZ])(\d+)", re.IGNORECASE)


def parse_sparse_label(label: str, n: int) -> PauliKey:
    """
    Parse a qubit-indexed label such as ``"Z0"`` or ``"X3 Y4"`` (separators optional).
    """
    chars = ["I"] * n
    stripped = re.sub(r"[\s,*]", "", label)
    consumed = 0
    for match in _SPARSE_TOKEN.finditer(stripped):
        if match.start() != consumed:
            raise ValueError(f"Cannot parse sparse Pauli label {label!r}")
        consumed = match.end()
        char, qubit = match.group(1).upper(), int(match.group(2))
        if qubit >= n:
            raise QubitRangeError(f"Qubit {qubit} in {label!r} out of range for n={n}")
        if chars[qubit] != "I":
            raise ValueError(f"Qubit {qubit} appears twice in {label!r}")
        chars[qubit] = char
    if consumed != len(stripped) or consumed == 0:
        raise ValueError(f"Cannot parse sparse Pauli label {label!r}")
    return PauliKey.from_label("".join(chars))


def polarization(n: int) -> PauliSum:
    """M = (1/n) sum_i Z_i."""
    return PauliSum(n, {PauliKey.single(n, q, "Z").address: 1.0 / n for q in range(n)})


def site_observables(n: int) -> list[PauliSum]:
    return [PauliSum(n, {PauliKey.single(n, q, "Z").address: 1.0}) for q in range(n)]


def sum_to_json(s: PauliSum) -> list[dict]:
    return [{"pauli": address_label(a, s.n), "coeff": c} for a, c in sorted(s.items())]


def sum_from_json(data: list[dict] | dict, n: int | None = None) -> PauliSum:
    if isinstance(data, dict):
        n = data.get("n", n)
        data = data["operator"]
    if not data:
        if n is None:
            raise ValueError("An empty observable needs an explicit qubit count")
        return PauliSum(n)
    n = n if n is not None else len(data[0]["pauli"])
    out = PauliSum(n)
    for entry in data:
        key = PauliKey.from_label(entry["pauli"])
        if key.n != n:
            raise DimensionMismatchError(f"Label {entry['pauli']!r} has {key.n} qubits, expected {n}")
        out.add(key.address, float(entry["coeff"]))
    return out


def load_observable(path: str | Path, n: int | None = None) -> PauliSum:
    with open(path) as f:
        return sum_from_json(json.load(f), n)


def parse_observable(spec: str, n: int) -> PauliSum:
    """
    Resolve an observable spec: a JSON file path, ``"polarization"``, a dense label of
    length n, or a sparse label like ``"Z0"``.
    """
    if spec.endswith(".json"):
        s = load_observable(spec, n)
        if s.n != n:
            raise DimensionMismatchError(f"Observable {spec} has n={s.n}, circuit has n={n}")
        return s
    if spec.lower() in ("polarization", "m"):
        return polarization(n)
    if len(spec) == n and set(spec.upper()) <= set("IXYZ"):
        return PauliSum.from_label(spec.upper())
    return PauliSum(n, {parse_sparse_label(spec, n).address: 1.0})
