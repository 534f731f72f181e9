import pytest

from obp.distributed.partition import PartitionMap, route
from obp.errors import ClusterStateError, QubitRangeError


def test_single_node_owns_everything(rng):
    p = PartitionMap.even(5, 1)
    assert all(route(int(a), p) == 0 for a in rng.integers(0, 1 << 10, size=200))


def test_even_partition_routes_by_interval():
    p = PartitionMap.even(4, 4)
    assert p.boundaries == (0, 64, 128, 192, 256)
    assert route(3, p) == 0
    assert route(64, p) == 1
    assert route(255, p) == 3
    assert p.interval(2) == (128, 192)
    assert p.owns(2, 130) and not p.owns(2, 192)


def test_route_rejects_foreign_addresses():
    with pytest.raises(QubitRangeError):
        route(256, PartitionMap.even(4, 2))


@pytest.mark.parametrize("boundaries", [(0,), (1, 16), (0, 8, 8, 16), (0, 9, 4, 16), (0, 15)])
def test_invalid_boundaries(boundaries):
    with pytest.raises(ClusterStateError):
        PartitionMap(2, boundaries)


def test_more_nodes_than_addresses():
    with pytest.raises(ClusterStateError):
        PartitionMap.even(1, 5)
