import json
import math
from dataclasses import asdict, dataclass

import networkx as nx
import numpy as np

from network.netmodel import EndpointPair, Network, network_from_dict, network_to_dict
from utils.config import Config
from utils.errors import DisconnectedError, ValidationError
from utils.logger import get_logger

log = get_logger("Manet")


@dataclass(frozen=True)
class ManetConfig:
    """Random-walk MANET: nodes wander a width x height area, linked within coverage_radius."""
    node_count: int
    width: float
    height: float
    coverage_radius: float
    step_length: float
    timeframes: int
    seed: int = 0

    def __post_init__(self):
        if self.node_count < 1 or self.timeframes < 1:
            raise ValidationError(
                f"node_count and timeframes must be positive, got {self.node_count}, {self.timeframes}")
        if self.width <= 0 or self.height <= 0 or self.step_length <= 0:
            raise ValidationError(
                f"Area and step must be positive, got {self.width}x{self.height}, step {self.step_length}")
        if self.coverage_radius < 0:
            raise ValidationError(f"coverage_radius must be >= 0, got {self.coverage_radius}")

    @property
    def diagonal(self):
        return math.hypot(self.width, self.height)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(**doc)
        except TypeError as e:
            raise ValidationError(f"Bad MANET config: {e}") from e


# Area, radius and step give a mean degree near 17 (near 8 for "desk").
PRESETS = {
    "fig15": ManetConfig(node_count=300, width=1000.0, height=1000.0, coverage_radius=145.0,
                         step_length=20.0, timeframes=200, seed=15),
    "fig17": ManetConfig(node_count=115, width=1000.0, height=1000.0, coverage_radius=235.0,
                         step_length=20.0, timeframes=300, seed=17),
    "fig18": ManetConfig(node_count=120, width=1000.0, height=1000.0, coverage_radius=230.0,
                         step_length=20.0, timeframes=150, seed=18),
    "desk": ManetConfig(node_count=40, width=100.0, height=100.0, coverage_radius=28.0,
                        step_length=5.0, timeframes=30, seed=40),
}


def preset(name) -> ManetConfig:
    if name not in PRESETS:
        raise ValidationError(f"Unknown MANET preset {name!r}; known: {', '.join(sorted(PRESETS))}")
    return PRESETS[name]


def _reflect(values, limit):
    """Folds coordinates back into [0, limit] as if bouncing off the walls."""
    folded = np.mod(values, 2.0 * limit)
    return np.where(folded > limit, 2.0 * limit - folded, folded)


def proximity_links(positions, radius):
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    rows, cols = np.triu_indices(len(positions), k=1)
    close = dist[rows, cols] <= radius
    return [(int(i), int(j)) for i, j in zip(rows[close], cols[close])]


def iter_samples(cfg: ManetConfig):
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    size = np.array([cfg.width, cfg.height])
    positions = rng.uniform(0.0, 1.0, size=(cfg.node_count, 2)) * size
    for frame in range(cfg.timeframes):
        if frame > 0:
            angles = rng.uniform(0.0, 2.0 * math.pi, size=cfg.node_count)
            positions = positions + cfg.step_length * np.column_stack((np.cos(angles), np.sin(angles)))
            positions = np.column_stack((_reflect(positions[:, 0], cfg.width),
                                         _reflect(positions[:, 1], cfg.height)))
        links = proximity_links(positions, cfg.coverage_radius)
        yield Network.build(cfg.node_count, links, positions.tolist())


def generate_samples(cfg: ManetConfig):
    samples = list(iter_samples(cfg))
    mean_links = sum(len(net.links) for net in samples) / len(samples)
    log.info(f"Generated {len(samples)} frame(s) of {cfg.node_count} nodes, "
             f"mean {mean_links:.1f} links (mean degree {2 * mean_links / cfg.node_count:.2f})")
    return samples


def sample_to_document(net: Network, cfg: ManetConfig, frame_index: int) -> str:
    doc = {
        "metadata": {
            "seed": cfg.seed,
            "config": cfg.to_dict(),
            "frame_index": frame_index,
            "rng_name": Config.RNG_NAME,
        },
        "network": network_to_dict(net),
    }
    return json.dumps(doc) + "\n"


def load_sample(document: str):
    """Returns (metadata or None, Network) for a sample envelope or a plain network document."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as e:
        raise ValidationError(f"Sample document is not valid JSON: {e}") from e
    if isinstance(doc, dict) and "network" in doc:
        return doc.get("metadata"), network_from_dict(doc["network"])
    return None, network_from_dict(doc)


def pick_endpoints(net: Network, seed: int) -> EndpointPair:
    """Seeded uniform draw among the ordered (source, sink) pairs that share a component."""
    if net.node_count < 2:
        raise ValidationError(f"Need at least 2 nodes to pick endpoints, got {net.node_count}")
    pairs = sorted(
        (source, sink)
        for component in nx.connected_components(net.to_graph())
        for source in component
        for sink in component
        if source != sink
    )
    if not pairs:
        raise DisconnectedError("No connected node pair: the network has no links")
    rng = np.random.Generator(np.random.PCG64(seed))
    source, sink = pairs[int(rng.integers(len(pairs)))]
    return EndpointPair(source, sink)
