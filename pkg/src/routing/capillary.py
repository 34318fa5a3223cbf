"""
Layered capillary routing.

Each layer is a bounded multi-source/multi-sink max-flow problem: every node
i must emit f_i * F units (f_i its flow-out coefficient), each undirected
link carries two nonnegative arc flows whose sum is at most 1, and F is
maximized. The links saturated under every optimal flow (the bottlenecks)
are pinned at real load 1 / (F^1 * ... * F^l), removed, and their unit
flows are folded back into the coefficients of the next layer.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Tuple, Union

import networkx as nx

from network.netmodel import EndpointPair, Link, Network, canonical_link
from solver.lp import INF, INFEASIBLE, LinearProgram, solve
from utils.config import Config
from utils.errors import DisconnectedError, LpNumericError, StructuralError, ValidationError
from utils.logger import get_logger

log = get_logger("Capillary")

RESIDUAL = "residual"

# coefficient adjustments below this are float noise, not corrections
NOISE = 1e-12

ArcFlows = Dict[Link, Tuple[float, float]]


@dataclass(frozen=True)
class LayerProblem:
    layer: int
    nodes: frozenset
    links: Tuple[Link, ...]
    flow_out: Dict[int, float]
    corrections: int = 0

    def __post_init__(self):
        if self.layer < 1:
            raise ValidationError(f"Layer index must be >= 1, got {self.layer}")
        total = math.fsum(self.flow_out.values())
        if abs(total) > Config.EPS_ZERO:
            raise ValidationError(f"Layer {self.layer} flow-out coefficients sum to {total:.3e}, not 0")

    @classmethod
    def initial(cls, net: Network, ends: EndpointPair):
        ends.check(net)
        flow_out = {node: 0.0 for node in range(net.node_count)}
        flow_out[ends.source] = 1.0
        flow_out[ends.sink] = -1.0
        return cls(layer=1, nodes=frozenset(range(net.node_count)),
                   links=tuple(net.sorted_links()), flow_out=flow_out)

    @property
    def is_exhausted(self):
        return max((abs(f) for f in self.flow_out.values()), default=0.0) < Config.EPS_ZERO

    def sources(self):
        return sorted(i for i, f in self.flow_out.items() if f >= Config.EPS_ZERO)

    def sinks(self):
        return sorted(i for i, f in self.flow_out.items() if f <= -Config.EPS_ZERO)


@dataclass
class LayerResult:
    """Outcome of one layer: F^l, oriented bottlenecks B^l and hunting statistics."""
    layer: int
    factor: float
    flows: ArcFlows
    bottlenecks: Tuple[Tuple[int, int], ...] = ()
    hunting_iterations: int = 0
    suspect_trail: List[int] = field(default_factory=list)
    corrections: int = 0

    def loads(self):
        return {link: fwd + bwd for link, (fwd, bwd) in self.flows.items()}


@dataclass
class HuntResult:
    bottlenecks: Tuple[Tuple[int, int], ...]
    iterations: int
    suspect_trail: List[int]
    flows: ArcFlows


@dataclass(frozen=True)
class PatternLink:
    tail: int
    head: int
    load: float
    layer: Union[int, str]

    @property
    def link(self):
        return canonical_link(self.tail, self.head)

    @property
    def is_residual(self):
        return self.layer == RESIDUAL


@dataclass(frozen=True)
class RoutingPattern:
    """Real per-link loads of a finished route; tail -> head is the flow direction."""
    ends: EndpointPair
    factors: Tuple[float, ...]
    links: Tuple[PatternLink, ...]

    @property
    def loads(self):
        return {pl.link: pl.load for pl in self.links}

    @property
    def layer_count(self):
        return len(self.factors)

    def net_outflow(self):
        balance = {}
        for pl in self.links:
            balance[pl.tail] = balance.get(pl.tail, 0.0) + pl.load
            balance[pl.head] = balance.get(pl.head, 0.0) - pl.load
        return balance

    def conservation_error(self):
        balance = self.net_outflow()
        expected = {self.ends.source: 1.0, self.ends.sink: -1.0}
        nodes = set(balance) | set(expected)
        return max((abs(balance.get(n, 0.0) - expected.get(n, 0.0)) for n in nodes), default=0.0)

    def bottleneck_loads_by_layer(self):
        by_layer = {}
        for pl in self.links:
            if not pl.is_residual:
                by_layer.setdefault(pl.layer, []).append(pl.load)
        return dict(sorted(by_layer.items()))

    def residual_links(self):
        return [pl for pl in self.links if pl.is_residual]


# ---------------------------------------------------------------------------
# LP construction
# ---------------------------------------------------------------------------

def _arc_program(p: LayerProblem):
    """Two arc variables per link with joint unit capacity."""
    lp = LinearProgram()
    arcs = {}
    for link in p.links:
        fwd = lp.add_variable(0.0, INF)
        bwd = lp.add_variable(0.0, INF)
        arcs[link] = (fwd, bwd)
        lp.add_constraint({fwd: 1.0, bwd: 1.0}, "<=", 1.0)
    return lp, arcs


def _outflow_terms(p: LayerProblem, arcs):
    """Per node: {arc variable: +1 outgoing / -1 incoming}."""
    terms = {node: {} for node in sorted(p.nodes)}
    for (i, j), (fwd, bwd) in arcs.items():
        terms[i][fwd] = 1.0
        terms[i][bwd] = -1.0
        terms[j][fwd] = -1.0
        terms[j][bwd] = 1.0
    return terms


def _read_flows(solution, arcs) -> ArcFlows:
    return {link: (max(float(solution.values[fwd]), 0.0), max(float(solution.values[bwd]), 0.0))
            for link, (fwd, bwd) in arcs.items()}


def _fixed_flow_program(p: LayerProblem, factor: float):
    lp, arcs = _arc_program(p)
    for node, coeffs in _outflow_terms(p, arcs).items():
        demand = p.flow_out.get(node, 0.0) * factor
        if coeffs or abs(demand) > 0.0:
            lp.add_constraint(coeffs, "=", demand)
    return lp, arcs


def _orient(link, fwd, bwd):
    i, j = link
    return (i, j) if fwd >= bwd else (j, i)


def _disconnected_component(p: LayerProblem):
    graph = nx.Graph()
    graph.add_nodes_from(p.nodes)
    graph.add_edges_from(p.links)
    for component in sorted(nx.connected_components(graph), key=min):
        coeffs = [p.flow_out.get(n, 0.0) for n in component]
        has_source = any(f >= Config.EPS_ZERO for f in coeffs)
        has_sink = any(f <= -Config.EPS_ZERO for f in coeffs)
        if has_source != has_sink:
            return component
    return None


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def maximize_flow(p: LayerProblem) -> LayerResult:
    """Maximizes the proportional flow increase F of the layer. Bottlenecks are left empty."""
    if p.is_exhausted:
        raise ValidationError(f"Layer {p.layer} has no nonzero flow-out coefficient")

    lp, arcs = _arc_program(p)
    factor_var = lp.add_variable(0.0, INF)
    for node, coeffs in _outflow_terms(p, arcs).items():
        f = p.flow_out.get(node, 0.0)
        row = dict(coeffs)
        if f != 0.0:
            row[factor_var] = -f
        if row:
            lp.add_constraint(row, "=", 0.0)
    lp.maximize({factor_var: 1.0})

    solution = solve(lp)
    if not solution.is_optimal:
        raise LpNumericError(f"Layer {p.layer} max-flow LP ended {solution.status}")

    factor = float(solution.values[factor_var])
    log.debug(f"Layer {p.layer} max-flow LP: F={factor:.9g} after {solution.pivots} pivot(s)")
    if factor <= Config.EPS_LOAD:
        component = _disconnected_component(p)
        where = f"component {sorted(component)}" if component else "an unidentified component"
        raise DisconnectedError(
            f"Layer {p.layer}: no positive flow possible, sources and sinks split at {where}",
            component=component)

    return LayerResult(layer=p.layer, factor=factor, flows=_read_flows(solution, arcs))


def minimize_suspect_load(p: LayerProblem, factor: float, suspects):
    """Minimal summed load over `suspects` with the layer flow fixed at `factor`."""
    lp, arcs = _fixed_flow_program(p, factor)
    objective = {}
    for link in suspects:
        fwd, bwd = arcs[link]
        objective[fwd] = 1.0
        objective[bwd] = 1.0
    lp.minimize(objective)
    solution = solve(lp)
    if solution.status == INFEASIBLE:
        raise LpNumericError(f"Layer {p.layer}: flow at F={factor:.12g} no longer feasible while hunting")
    if not solution.is_optimal:
        raise LpNumericError(f"Layer {p.layer} hunting LP ended {solution.status}")
    return solution.objective, _read_flows(solution, arcs)


def hunt_bottlenecks(p: LayerProblem, factor: float, suspects) -> HuntResult:
    """
    Repeatedly minimizes the summed load of the suspected links and drops
    every suspect that leaves its maximal load, until a round drops nothing.
    """
    suspects = sorted(suspects)
    trail = []
    iterations = 0
    while True:
        trail.append(len(suspects))
        iterations += 1
        _, flows = minimize_suspect_load(p, factor, suspects)
        survivors = [link for link in suspects if sum(flows[link]) >= 1.0 - Config.EPS_LOAD]
        if not survivors:
            raise LpNumericError(f"Layer {p.layer}: hunting loop dropped every suspect")
        if len(survivors) == len(suspects):
            break
        suspects = survivors

    oriented = tuple(_orient(link, *flows[link]) for link in suspects)
    log.debug(f"Layer {p.layer}: {len(oriented)} bottleneck(s) after {iterations} hunting iteration(s), trail {trail}")
    return HuntResult(bottlenecks=oriented, iterations=iterations, suspect_trail=trail, flows=flows)


def correct_coefficients(p_links, nodes, flow_out):
    """
    Snaps float noise in the flow-out coefficients to zero and rebalances
    every connected component of the remaining links to a zero sum.
    Returns (corrected coefficients, number of corrections).
    """
    corrected = dict(flow_out)
    corrections = 0
    # coefficients are f * F plus whole bottleneck units; anything this
    # close to zero is LP round-off
    for node, f in corrected.items():
        if f != 0.0 and abs(f) < Config.EPS_LOAD:
            corrected[node] = 0.0
            if abs(f) > NOISE:
                corrections += 1

    graph = nx.Graph()
    graph.add_nodes_from(nodes)
    graph.add_edges_from(p_links)
    for component in sorted(nx.connected_components(graph), key=min):
        members = sorted(component)
        imbalance = math.fsum(corrected[n] for n in members)
        if imbalance == 0.0:
            continue
        active = [n for n in members if corrected[n] != 0.0]
        if abs(imbalance) > Config.EPS_LOAD * (1 + len(active)):
            raise StructuralError(
                f"Flow-out coefficients of component {members} are unbalanced by {imbalance:.3e}")
        for n in active:
            corrected[n] -= imbalance / len(active)
        if abs(imbalance) > NOISE:
            corrections += 1
    return corrected, corrections


def next_layer(p: LayerProblem, factor: float, bottlenecks) -> LayerProblem:
    """
    f_j <- f_j * F + (incoming bottlenecks of j) - (outgoing bottlenecks of j),
    bottlenecks given as (tail, head) in their flow direction.
    """
    if not bottlenecks:
        raise ValidationError(f"Layer {p.layer}: next layer needs at least one bottleneck")
    removed = set()
    flow_out = {node: f * factor for node, f in p.flow_out.items()}
    for tail, head in bottlenecks:
        link = canonical_link(tail, head)
        if link not in p.links:
            raise ValidationError(f"Bottleneck {link} is not a link of layer {p.layer}")
        removed.add(link)
        flow_out[tail] -= 1.0
        flow_out[head] += 1.0

    links = tuple(link for link in p.links if link not in removed)
    flow_out, corrections = correct_coefficients(links, p.nodes, flow_out)
    if corrections:
        log.debug(f"Layer {p.layer + 1}: {corrections} flow-out coefficient correction(s)")
    return LayerProblem(layer=p.layer + 1, nodes=p.nodes, links=links,
                        flow_out=flow_out, corrections=corrections)


def complete_min_cost(p: LayerProblem) -> ArcFlows:
    """Routes what is left of the flow (F fixed at 1) at minimal total link load."""
    if p.is_exhausted:
        return {link: (0.0, 0.0) for link in p.links}
    lp, arcs = _fixed_flow_program(p, 1.0)
    objective = {}
    for fwd, bwd in arcs.values():
        objective[fwd] = 1.0
        objective[bwd] = 1.0
    lp.minimize(objective)
    solution = solve(lp)
    if solution.status == INFEASIBLE:
        raise StructuralError(f"Residual flow after layer {p.layer - 1} cannot be routed")
    if not solution.is_optimal:
        raise LpNumericError(f"Residual min-cost LP ended {solution.status}")
    log.debug(f"Residual min-cost LP: load {solution.objective:.9g} after {solution.pivots} pivot(s)")
    return _read_flows(solution, arcs)


class CapillaryBuilder:
    """
    Builds capillary routing one layer at a time. `snapshot()` returns the
    pattern as if construction stopped after the layers built so far, with
    the remaining flow completed at minimal cost.
    """

    def __init__(self, net: Network, ends: EndpointPair):
        ends.check(net)
        if not net.connected(ends.source, ends.sink):
            component = nx.node_connected_component(net.to_graph(), ends.source)
            raise DisconnectedError(
                f"Source {ends.source} and sink {ends.sink} are disconnected; "
                f"source component {sorted(component)}", component=component)
        self.net = net
        self.ends = ends
        self.problem = LayerProblem.initial(net, ends)
        self.layers: List[LayerResult] = []
        self._pinned: List[PatternLink] = []
        self._scale = 1.0

    @property
    def done(self):
        return self.problem.is_exhausted

    def step(self) -> LayerResult:
        p = self.problem
        result = maximize_flow(p)
        if result.factor < 1.0 - Config.EPS_LOAD:
            raise StructuralError(
                f"Layer {p.layer}: flow increase factor {result.factor:.9g} < 1, coefficients inconsistent")

        loads = result.loads()
        suspects = [link for link in p.links if loads[link] >= 1.0 - Config.EPS_LOAD]
        hunt = hunt_bottlenecks(p, result.factor, suspects)

        self._scale *= result.factor
        real_load = 1.0 / self._scale
        for tail, head in hunt.bottlenecks:
            self._pinned.append(PatternLink(tail, head, real_load, p.layer))

        self.problem = next_layer(p, result.factor, hunt.bottlenecks)
        result.flows = hunt.flows
        result.bottlenecks = hunt.bottlenecks
        result.hunting_iterations = hunt.iterations
        result.suspect_trail = hunt.suspect_trail
        result.corrections = self.problem.corrections
        self.layers.append(result)
        log.info(f"Layer {p.layer}: F={result.factor:.6g}, {len(hunt.bottlenecks)} bottleneck(s), "
                 f"{hunt.iterations} hunting iteration(s), real load {real_load:.5f}")
        return result

    def snapshot(self) -> RoutingPattern:
        links = list(self._pinned)
        if not self.done:
            for link, (fwd, bwd) in complete_min_cost(self.problem).items():
                scaled = fwd + bwd
                if scaled > Config.EPS_FLOW:
                    tail, head = _orient(link, fwd, bwd)
                    links.append(PatternLink(tail, head, scaled / self._scale, RESIDUAL))
        links.sort(key=lambda pl: (pl.link, str(pl.layer)))
        return RoutingPattern(ends=self.ends, factors=tuple(r.factor for r in self.layers), links=tuple(links))

    def run(self, max_layers=Config.MAX_LAYERS) -> RoutingPattern:
        if max_layers < 1:
            raise ValidationError(f"max_layers must be positive, got {max_layers}")
        while not self.done and len(self.layers) < max_layers:
            self.step()
        return self.snapshot()


def build_capillary(net: Network, ends: EndpointPair, max_layers=Config.MAX_LAYERS):
    """Returns (RoutingPattern, per-layer LayerResult list)."""
    builder = CapillaryBuilder(net, ends)
    pattern = builder.run(max_layers)
    return pattern, builder.layers
