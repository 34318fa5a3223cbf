import json
from dataclasses import dataclass
from typing import FrozenSet, Optional, Tuple

import networkx as nx

from utils.errors import ValidationError

Link = Tuple[int, int]

NETWORK_FIELDS = {"nodes", "links", "positions"}


def canonical_link(i, j) -> Link:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Network:
    """
    Undirected unit-capacity graph. Node ids are dense integers 0..node_count-1,
    links are stored as (smaller id, larger id) pairs.
    """
    node_count: int
    links: FrozenSet[Link]
    positions: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self):
        if isinstance(self.node_count, bool) or not isinstance(self.node_count, int) or self.node_count < 1:
            raise ValidationError(f"'nodes' must be a positive integer, got {self.node_count!r}")
        for i, j in self.links:
            if i == j:
                raise ValidationError(f"Self-loop on node {i}: link [{i}, {j}]")
            if not (0 <= i < self.node_count and 0 <= j < self.node_count):
                raise ValidationError(f"Dangling node id in link [{i}, {j}] (nodes={self.node_count})")
            if i > j:
                raise ValidationError(f"Link [{i}, {j}] is not in canonical order")
        if self.positions is not None and len(self.positions) != self.node_count:
            raise ValidationError(
                f"Expected {self.node_count} positions, got {len(self.positions)}")

    @classmethod
    def build(cls, node_count, links, positions=None):
        """Normalizes raw link pairs, rejecting duplicates in either orientation."""
        seen = set()
        for pair in links:
            i, j = pair
            if i == j:
                raise ValidationError(f"Self-loop on node {i}: link [{i}, {j}]")
            link = canonical_link(i, j)
            if link in seen:
                raise ValidationError(f"Duplicate link [{i}, {j}]")
            seen.add(link)
        if positions is not None:
            positions = tuple((float(x), float(y)) for x, y in positions)
        return cls(node_count=node_count, links=frozenset(seen), positions=positions)

    def sorted_links(self):
        return sorted(self.links)

    def to_graph(self, links=None) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.node_count))
        graph.add_edges_from(self.links if links is None else links)
        return graph

    def connected(self, source, sink):
        return nx.has_path(self.to_graph(), source, sink)


@dataclass(frozen=True)
class EndpointPair:
    source: int
    sink: int

    def __post_init__(self):
        if self.source == self.sink:
            raise ValidationError(f"Source and sink must differ (both {self.source})")
        if self.source < 0 or self.sink < 0:
            raise ValidationError(f"Negative endpoint id in ({self.source}, {self.sink})")

    def check(self, net: Network):
        for role, node in (("source", self.source), ("sink", self.sink)):
            if node >= net.node_count:
                raise ValidationError(f"{role} {node} is not a node of a {net.node_count}-node network")
        return self


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def network_from_dict(doc) -> Network:
    if not isinstance(doc, dict):
        raise ValidationError("Network document must be a JSON object")
    extra = set(doc) - NETWORK_FIELDS
    if extra:
        raise ValidationError(f"Unknown network field(s): {', '.join(sorted(extra))}")
    if "nodes" not in doc or "links" not in doc:
        raise ValidationError("Network document needs 'nodes' and 'links'")

    nodes = doc["nodes"]
    if not _is_int(nodes):
        raise ValidationError(f"'nodes' must be an integer, got {nodes!r}")
    if not isinstance(doc["links"], list):
        raise ValidationError("'links' must be an array")

    links = []
    for index, pair in enumerate(doc["links"]):
        if not isinstance(pair, list) or len(pair) != 2 or not all(_is_int(v) for v in pair):
            raise ValidationError(f"links[{index}] must be a 2-element integer array, got {pair!r}")
        links.append((pair[0], pair[1]))

    positions = doc.get("positions")
    if positions is not None:
        if not isinstance(positions, list):
            raise ValidationError("'positions' must be an array")
        for index, xy in enumerate(positions):
            if not isinstance(xy, list) or len(xy) != 2 or not all(_is_number(v) for v in xy):
                raise ValidationError(f"positions[{index}] must be a 2-element number array, got {xy!r}")

    return Network.build(nodes, links, positions)


def network_to_dict(net: Network) -> dict:
    doc = {"nodes": net.node_count, "links": [[i, j] for i, j in net.sorted_links()]}
    if net.positions is not None:
        doc["positions"] = [[x, y] for x, y in net.positions]
    return doc


def load_network(document: str) -> Network:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as e:
        raise ValidationError(f"Network document is not valid JSON: {e}") from e
    return network_from_dict(doc)


def save_network(net: Network) -> str:
    return json.dumps(network_to_dict(net)) + "\n"
