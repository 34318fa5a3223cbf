import json

from network.netmodel import EndpointPair
from routing.capillary import RESIDUAL, PatternLink, RoutingPattern
from utils.config import Config
from utils.errors import ValidationError


def pattern_to_dict(pattern: RoutingPattern) -> dict:
    return {
        "source": pattern.ends.source,
        "sink": pattern.ends.sink,
        "factors": list(pattern.factors),
        "links": [
            {"i": pl.tail, "j": pl.head, "load": pl.load, "layer": pl.layer}
            for pl in pattern.links
        ],
    }


def save_pattern(pattern: RoutingPattern) -> str:
    return json.dumps(pattern_to_dict(pattern), indent=2) + "\n"


def load_pattern(document: str) -> RoutingPattern:
    """Parses an exported pattern and re-checks its unit flow conservation."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as e:
        raise ValidationError(f"Pattern document is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ValidationError("Pattern document must be a JSON object")
    missing = {"source", "sink", "factors", "links"} - set(doc)
    if missing:
        raise ValidationError(f"Pattern document lacks field(s): {', '.join(sorted(missing))}")

    links = []
    for index, entry in enumerate(doc["links"]):
        try:
            tail, head, load, layer = int(entry["i"]), int(entry["j"]), float(entry["load"]), entry["layer"]
        except (KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"links[{index}] is malformed: {entry!r}") from e
        if layer != RESIDUAL and not (isinstance(layer, int) and layer >= 1):
            raise ValidationError(f"links[{index}] has invalid layer {layer!r}")
        if not 0.0 < load <= 1.0 + Config.EPS_LOAD:
            raise ValidationError(f"links[{index}] load {load} outside (0, 1]")
        links.append(PatternLink(tail, head, load, layer))

    pattern = RoutingPattern(
        ends=EndpointPair(int(doc["source"]), int(doc["sink"])),
        factors=tuple(float(f) for f in doc["factors"]),
        links=tuple(links),
    )
    error = pattern.conservation_error()
    if error > Config.EPS_LOAD:
        raise ValidationError(f"Pattern violates unit flow conservation by {error:.3e}")
    return pattern


def export_dot(pattern: RoutingPattern) -> str:
    """Bottleneck links solid with their layer, residual links dashed, loads to 5 decimals."""
    lines = [
        "digraph capillary {",
        f'   // source {pattern.ends.source}, sink {pattern.ends.sink}, '
        f'factors [{", ".join(f"{f:.5f}" for f in pattern.factors)}]',
        "   node [shape=circle];",
        f'   "{pattern.ends.source}" [shape=doublecircle];',
        f'   "{pattern.ends.sink}" [shape=doublecircle];',
    ]
    for pl in sorted(pattern.links, key=lambda pl: pl.link):
        if pl.is_residual:
            attrs = f'label="{pl.load:.5f}", style=dashed'
        else:
            attrs = f'label="{pl.load:.5f}", style=solid, xlabel="layer {pl.layer}"'
        lines.append(f'   "{pl.tail}" -> "{pl.head}" [{attrs}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
