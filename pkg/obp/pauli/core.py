"""
Symplectic representation of n-qubit Pauli operators and sparse real Pauli sums.

A Pauli is stored as two n-bit integers ``z`` and ``x``; qubit ``q`` is bit ``q`` of each.
The operator for a key is the Hermitian canonical Pauli prod_q i^{z_q x_q} X^{x_q} Z^{z_q},
so (z, x) = (1, 1) is exactly the Pauli matrix Y and every Hermitian observable has real
coefficients. The global address of a key is ``(z << n) | x``, z block in the high half.
"""

import math
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass

from obp.errors import CoefficientError, DimensionMismatchError, QubitRangeError

PauliAddress = int

_CHARS = "IXZY"  # indexed by x + 2 * z
PHASES: tuple[complex, ...] = (1, 1j, -1, -1j)


@dataclass(frozen=True, slots=True)
class PauliKey:
    n: int
    z: int
    x: int

    def __post_init__(self):
        if self.n < 1:
            raise DimensionMismatchError(f"Pauli keys need n >= 1, got n={self.n}")
        bound = 1 << self.n
        if not (0 <= self.z < bound and 0 <= self.x < bound):
            raise QubitRangeError(f"Bits z={self.z:#x}, x={self.x:#x} do not fit in {self.n} qubits")

    @classmethod
    def identity(cls, n: int) -> "PauliKey":
        return cls(n, 0, 0)

    @classmethod
    def from_address(cls, address: PauliAddress, n: int) -> "PauliKey":
        if not 0 <= address < 1 << (2 * n):
            raise QubitRangeError(f"Address {address} out of range for n={n}")
        return cls(n, address >> n, address & ((1 << n) - 1))

    @classmethod
    def from_label(cls, label: str) -> "PauliKey":
        """Parse a dense label over {I,X,Y,Z} with qubit 0 leftmost."""
        z = x = 0
        for q, char in enumerate(label.upper()):
            match char:
                case "I":
                    pass
                case "X":
                    x |= 1 << q
                case "Z":
                    z |= 1 << q
                case "Y":
                    z |= 1 << q
                    x |= 1 << q
                case _:
                    raise ValueError(f"Unknown Pauli character {char!r} in label {label!r}")
        return cls(len(label), z, x)

    @classmethod
    def single(cls, n: int, qubit: int, char: str) -> "PauliKey":
        if not 0 <= qubit < n:
            raise QubitRangeError(f"Qubit {qubit} out of range for n={n}")
        label = ["I"] * n
        label[qubit] = char
        return cls.from_label("".join(label))

    @property
    def address(self) -> PauliAddress:
        return (self.z << self.n) | self.x

    @property
    def label(self) -> str:
        return address_label(self.address, self.n)

    @property
    def support(self) -> tuple[int, ...]:
        bits = self.z | self.x
        return tuple(q for q in range(self.n) if bits >> q & 1)

    @property
    def weight(self) -> int:
        return (self.z | self.x).bit_count()

    def is_identity(self) -> bool:
        return self.z == 0 and self.x == 0

    def char(self, qubit: int) -> str:
        return _CHARS[(self.x >> qubit & 1) + 2 * (self.z >> qubit & 1)]

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True, slots=True)
class PauliTerm:
    key: PauliKey
    coeff: float

    @property
    def n(self) -> int:
        return self.key.n

    @property
    def z_bits(self) -> tuple[int, ...]:
        return tuple(self.key.z >> q & 1 for q in range(self.key.n))

    @property
    def x_bits(self) -> tuple[int, ...]:
        return tuple(self.key.x >> q & 1 for q in range(self.key.n))

    @property
    def address(self) -> PauliAddress:
        return self.key.address


def address_label(address: PauliAddress, n: int) -> str:
    z, x = address >> n, address & ((1 << n) - 1)
    return "".join(_CHARS[(x >> q & 1) + 2 * (z >> q & 1)] for q in range(n))


def encode_address(term: PauliTerm | PauliKey) -> PauliAddress:
    return term.address


def decode_address(address: PauliAddress, n: int) -> PauliKey:
    return PauliKey.from_address(address, n)


def _check_same_n(p: PauliKey, q: PauliKey):
    if p.n != q.n:
        raise DimensionMismatchError(f"Qubit counts differ: {p.n} vs {q.n}")


def product_bits(z1: int, x1: int, z2: int, x2: int) -> tuple[int, int, int]:
    """
    Multiply two canonical Paulis given as raw bit masks.

    Returns:
        (z, x, e) such that P1 * P2 = i^e * P(z, x) with e in 0..3.
    """
    z, x = z1 ^ z2, x1 ^ x2
    e = (z1 & x1).bit_count() + (z2 & x2).bit_count() + 2 * (z1 & x2).bit_count() - (z & x).bit_count()
    return z, x, e % 4


def anticommutes_bits(z1: int, x1: int, z2: int, x2: int) -> bool:
    return ((z1 & x2) ^ (x1 & z2)).bit_count() & 1 == 1


def multiply(p: PauliKey, q: PauliKey) -> tuple[PauliKey, complex]:
    _check_same_n(p, q)
    z, x, e = product_bits(p.z, p.x, q.z, q.x)
    return PauliKey(p.n, z, x), PHASES[e]


def commutes(p: PauliKey, q: PauliKey) -> bool:
    _check_same_n(p, q)
    return not anticommutes_bits(p.z, p.x, q.z, q.x)


def qubitwise_commutes(p: PauliKey, q: PauliKey) -> bool:
    _check_same_n(p, q)
    overlap = (p.z | p.x) & (q.z | q.x)
    return ((p.z ^ q.z) | (p.x ^ q.x)) & overlap == 0


class PauliSum:
    """
    Sparse real linear combination of n-qubit Paulis keyed by address.

    Exact zeros are purged on every update; insertion order is kept and is the
    iteration order.
    """

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[PauliAddress, float] | None = None):
        if n < 1:
            raise DimensionMismatchError(f"PauliSum needs n >= 1, got n={n}")
        self.n = n
        self._terms: dict[PauliAddress, float] = {}
        if terms:
            limit = 1 << (2 * n)
            for address, coeff in terms.items():
                if not 0 <= address < limit:
                    raise QubitRangeError(f"Address {address} out of range for n={n}")
                self.add(address, coeff)

    @classmethod
    def from_terms(cls, n: int, terms: Iterable[PauliTerm | tuple[PauliKey | str, float]]) -> "PauliSum":
        out = cls(n)
        for term in terms:
            if isinstance(term, PauliTerm):
                key, coeff = term.key, term.coeff
            else:
                key, coeff = term
                if isinstance(key, str):
                    key = PauliKey.from_label(key)
            if key.n != n:
                raise DimensionMismatchError(f"Term {key} has n={key.n}, sum has n={n}")
            out.add(key.address, float(coeff))
        return out

    @classmethod
    def from_label(cls, label: str, coeff: float = 1.0) -> "PauliSum":
        key = PauliKey.from_label(label)
        return cls(key.n, {key.address: coeff})

    @classmethod
    def adopt(cls, n: int, terms: dict[PauliAddress, float]) -> "PauliSum":
        """Wrap a dict that already holds in-range addresses and no zero coefficients."""
        if not all(map(math.isfinite, terms.values())):
            raise CoefficientError(f"Non-finite coefficient in a sum with n={n}")
        out = cls(n)
        out._terms = terms
        return out

    def add(self, address: PauliAddress, coeff: float) -> None:
        value = self._terms.get(address, 0.0) + coeff
        if not math.isfinite(value):
            raise CoefficientError(f"Coefficient {coeff} for address {address} gives a non-finite sum")
        if value == 0.0:
            self._terms.pop(address, None)
        else:
            self._terms[address] = value

    def add_key(self, key: PauliKey, coeff: float) -> None:
        if key.n != self.n:
            raise DimensionMismatchError(f"Key {key} has n={key.n}, sum has n={self.n}")
        self.add(key.address, coeff)

    def coeff(self, key: PauliKey | PauliAddress) -> float:
        address = key.address if isinstance(key, PauliKey) else key
        return self._terms.get(address, 0.0)

    def items(self):
        return self._terms.items()

    def addresses(self) -> list[PauliAddress]:
        return list(self._terms)

    def keys(self) -> list[PauliKey]:
        return [PauliKey.from_address(a, self.n) for a in self._terms]

    def coefficients(self) -> list[float]:
        return list(self._terms.values())

    def copy(self) -> "PauliSum":
        out = PauliSum(self.n)
        out._terms = dict(self._terms)
        return out

    def sorted(self) -> "PauliSum":
        out = PauliSum(self.n)
        out._terms = dict(sorted(self._terms.items()))
        return out

    def scaled(self, factor: float) -> "PauliSum":
        out = PauliSum(self.n)
        for address, coeff in self._terms.items():
            out.add(address, coeff * factor)
        return out

    def support(self) -> set[int]:
        mask = 0
        low = (1 << self.n) - 1
        for address in self._terms:
            mask |= (address >> self.n) | (address & low)
        return {q for q in range(self.n) if mask >> q & 1}

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def __iter__(self) -> Iterator[PauliTerm]:
        for address, coeff in self._terms.items():
            yield PauliTerm(PauliKey.from_address(address, self.n), coeff)

    def __contains__(self, key: PauliKey | PauliAddress) -> bool:
        address = key.address if isinstance(key, PauliKey) else key
        return address in self._terms

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    __hash__ = None

    def __repr__(self) -> str:
        shown = ", ".join(f"{address_label(a, self.n)}: {c:.6g}" for a, c in list(self._terms.items())[:8])
        more = ", ..." if len(self._terms) > 8 else ""
        return f"PauliSum(n={self.n}, {{{shown}{more}}})"


def l1_norm(s: PauliSum) -> float:
    return math.fsum(abs(c) for c in s.coefficients())


def l2_norm(s: PauliSum) -> float:
    return math.sqrt(math.fsum(c * c for c in s.coefficients()))


def merge(a: PauliSum, b: PauliSum) -> PauliSum:
    if a.n != b.n:
        raise DimensionMismatchError(f"Cannot merge sums with n={a.n} and n={b.n}")
    out = a.copy()
    for address, coeff in b.items():
        out.add(address, coeff)
    return out
