from bisect import bisect_right
from dataclasses import dataclass

from obp.errors import ClusterStateError, QubitRangeError
from obp.pauli.core import PauliAddress


@dataclass(frozen=True)
class PartitionMap:
    """Node r owns the half-open address interval [boundaries[r], boundaries[r + 1])."""

    n: int
    boundaries: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "boundaries", tuple(int(b) for b in self.boundaries))
        b = self.boundaries
        if len(b) < 2:
            raise ClusterStateError(f"A partition needs at least two boundaries, got {b}")
        if b[0] != 0 or b[-1] != self.space:
            raise ClusterStateError(f"Boundaries must span [0, 4^{self.n}), got {b[0]}..{b[-1]}")
        if any(lo >= hi for lo, hi in zip(b, b[1:])):
            raise ClusterStateError(f"Boundaries must be strictly increasing: {b}")

    @property
    def space(self) -> int:
        return 1 << (2 * self.n)

    @property
    def R(self) -> int:
        return len(self.boundaries) - 1

    @classmethod
    def even(cls, n: int, R: int) -> "PartitionMap":
        space = 1 << (2 * n)
        if not 1 <= R <= space:
            raise ClusterStateError(f"Cannot split {space} addresses over {R} nodes")
        return cls(n, tuple(r * space // R for r in range(R + 1)))

    def interval(self, r: int) -> tuple[int, int]:
        return self.boundaries[r], self.boundaries[r + 1]

    def owns(self, r: int, address: PauliAddress) -> bool:
        return self.boundaries[r] <= address < self.boundaries[r + 1]


def route(address: PauliAddress, p: PartitionMap) -> int:
    """Owner of ``address`` by binary search over the boundaries."""
    if not 0 <= address < p.space:
        raise QubitRangeError(f"Address {address} outside [0, {p.space})")
    return bisect_right(p.boundaries, address) - 1
