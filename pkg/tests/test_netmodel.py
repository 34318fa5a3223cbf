import json

import pytest
from hypothesis import given, settings, strategies as st

from network.netmodel import EndpointPair, Network, load_network, save_network
from utils.errors import ValidationError


def test_load_smallest_network():
    net = load_network('{"nodes": 2, "links": [[0, 1]]}')
    assert net.node_count == 2
    assert net.links == {(0, 1)}
    assert net.positions is None


def test_load_diamond(diamond):
    net = load_network('{"nodes": 4, "links": [[0,1],[0,2],[1,3],[2,3]]}')
    assert net == diamond


@pytest.mark.parametrize("document, fragment", [
    ('{"nodes": 2, "links": [[0, 0]]}', "Self-loop"),
    ('{"nodes": 3, "links": [[0, 1], [1, 0]]}', "Duplicate link [1, 0]"),
    ('{"nodes": 2, "links": [[0, 5]]}', "Dangling node id in link [0, 5]"),
    ('{"nodes": 2, "links": [[0, 1]], "name": "x"}', "Unknown network field"),
    ('{"nodes": 2, "links": [[0, 1, 2]]}', "links[0]"),
    ('{"nodes": 2, "links": [[0, 1]], "positions": [[0, 0]]}', "Expected 2 positions"),
    ('{"nodes": 0, "links": []}', "positive integer"),
    ('{"nodes": 2, "links": [[0, 1]', "not valid JSON"),
])
def test_load_rejects_invalid_documents(document, fragment):
    with pytest.raises(ValidationError) as excinfo:
        load_network(document)
    assert fragment in str(excinfo.value)


def test_save_sorts_links_canonically():
    net = Network.build(4, [(3, 2), (1, 3), (2, 0), (1, 0)])
    doc = json.loads(save_network(net))
    assert doc == {"nodes": 4, "links": [[0, 1], [0, 2], [1, 3], [2, 3]]}


def test_two_node_round_trip():
    net = Network.build(2, [(1, 0)])
    assert load_network(save_network(net)) == net


def test_positions_round_trip():
    net = Network.build(3, [(0, 2)], positions=[(0.1, 2.5), (3, 4), (1e-9, 7.25)])
    again = load_network(save_network(net))
    assert again == net
    assert save_network(again) == save_network(net)


@st.composite
def networks(draw):
    n = draw(st.integers(min_value=1, max_value=12))
    pairs = st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda ij: ij[0] != ij[1])
    raw = draw(st.lists(pairs, max_size=30))
    links = {(min(i, j), max(i, j)) for i, j in raw}
    coords = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
    positions = draw(st.one_of(st.none(), st.lists(st.tuples(coords, coords), min_size=n, max_size=n)))
    return Network.build(n, sorted(links), positions)


@given(networks())
@settings(max_examples=100)
def test_round_trip_property(net):
    assert load_network(save_network(net)) == net


def test_endpoint_pair_invariants(diamond):
    with pytest.raises(ValidationError):
        EndpointPair(1, 1)
    with pytest.raises(ValidationError):
        EndpointPair(0, 4).check(diamond)
    assert EndpointPair(0, 3).check(diamond) == EndpointPair(0, 3)


def test_connectivity(diamond):
    split = Network.build(4, [(0, 1), (2, 3)])
    assert diamond.connected(0, 3)
    assert not split.connected(0, 3)
