import math
import random
import sys
from fractions import Fraction
from pathlib import Path

import pytest

# Add src to path so we can import modules
sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from network.netmodel import EndpointPair, Network
from routing.capillary import RESIDUAL, PatternLink, RoutingPattern


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-minute MANET sweeps")


def random_connected_graph(rng: random.Random, max_nodes=8, max_links=12):
    """Random spanning tree plus extra random links, capped at max_links."""
    n = rng.randint(2, max_nodes)
    nodes = list(range(n))
    rng.shuffle(nodes)
    links = set()
    for k in range(1, n):
        a, b = nodes[k], nodes[rng.randrange(k)]
        links.add((min(a, b), max(a, b)))
    target = rng.randint(len(links), max(len(links), max_links))
    attempts = 0
    while len(links) < target and attempts < 200:
        a, b = rng.sample(range(n), 2)
        links.add((min(a, b), max(a, b)))
        attempts += 1
    return Network.build(n, sorted(links))


def brute_force_min_cut(net: Network, source, sink):
    """Fewest links crossing any node partition separating source from sink."""
    others = [v for v in range(net.node_count) if v not in (source, sink)]
    best = len(net.links)
    for mask in range(1 << len(others)):
        side = {source} | {v for k, v in enumerate(others) if mask >> k & 1}
        cut = sum(1 for i, j in net.links if (i in side) != (j in side))
        best = min(best, cut)
    return best


def exact_failure_prob(N, M, p):
    """Binomial tail in exact rationals; p is taken by its decimal spelling."""
    p = Fraction(str(p))
    q = 1 - p
    return sum(math.comb(N, n) * p ** n * q ** (N - n) for n in range(N - M + 1, N + 1))


def scan_block_size(p, M, der):
    """Linear scan from N = M, the slow reference for FEC block sizing."""
    N = M
    while exact_failure_prob(N, M, p) > Fraction(str(der)):
        N += 1
    return N


def make_pattern(source, sink, entries, factors=(1.0,)):
    """entries: (tail, head, load, layer) tuples."""
    links = tuple(PatternLink(tail, head, load, layer) for tail, head, load, layer in entries)
    return RoutingPattern(ends=EndpointPair(source, sink), factors=tuple(factors), links=links)


@pytest.fixture
def diamond():
    return Network.build(4, [(0, 1), (0, 2), (1, 3), (2, 3)])


@pytest.fixture
def chord_diamond():
    return Network.build(4, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)])


@pytest.fixture
def path3():
    return Network.build(3, [(0, 1), (1, 2)])


@pytest.fixture
def diamond_ends():
    return EndpointPair(0, 3)


@pytest.fixture
def diamond_pattern():
    return make_pattern(0, 3, [(0, 1, 0.5, 1), (0, 2, 0.5, 1), (1, 3, 0.5, 1), (2, 3, 0.5, 1)], factors=(2.0,))


@pytest.fixture
def single_path_pattern():
    return make_pattern(0, 2, [(0, 1, 1.0, 1), (1, 2, 1.0, 1)])


@pytest.fixture
def residual_pattern():
    """Layer-1 critical link followed by a min-cost split."""
    return make_pattern(0, 3, [(0, 1, 1.0, 1), (1, 2, 0.5, RESIDUAL), (1, 3, 0.5, RESIDUAL),
                               (2, 3, 0.5, RESIDUAL)])
