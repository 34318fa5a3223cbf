import math
import random

import pytest

from conftest import brute_force_min_cut, random_connected_graph
from network.netmodel import EndpointPair, Network
from routing.capillary import (RESIDUAL, CapillaryBuilder, LayerProblem, build_capillary,
                               complete_min_cost, correct_coefficients, hunt_bottlenecks,
                               maximize_flow, minimize_suspect_load, next_layer)
from utils.errors import DisconnectedError, StructuralError, ValidationError

EPS = 1e-6


def problem(links, flow_out, layer=2):
    nodes = frozenset(flow_out)
    return LayerProblem(layer=layer, nodes=nodes, links=tuple(sorted(links)), flow_out=dict(flow_out))


def saturated(result):
    return [link for link, load in result.loads().items() if load >= 1 - EPS]


# ---------------------------------------------------------------------------
# maximize_flow
# ---------------------------------------------------------------------------

def test_initial_problem_has_unit_source_and_sink(diamond, diamond_ends):
    p = LayerProblem.initial(diamond, diamond_ends)
    assert p.layer == 1
    assert p.flow_out == {0: 1.0, 1: 0.0, 2: 0.0, 3: -1.0}
    assert p.sources() == [0] and p.sinks() == [3]


def test_unbalanced_coefficients_rejected():
    with pytest.raises(ValidationError):
        problem([(0, 1)], {0: 1.0, 1: -0.5})


def test_diamond_max_flow(diamond, diamond_ends):
    result = maximize_flow(LayerProblem.initial(diamond, diamond_ends))
    assert result.factor == pytest.approx(2.0, abs=EPS)
    assert all(load == pytest.approx(1.0, abs=EPS) for load in result.loads().values())


def test_path_max_flow(path3):
    result = maximize_flow(LayerProblem.initial(path3, EndpointPair(0, 2)))
    assert result.factor == pytest.approx(1.0, abs=EPS)
    assert set(saturated(result)) == {(0, 1), (1, 2)}


def test_net_outflow_matches_scaled_coefficients(chord_diamond, diamond_ends):
    p = LayerProblem.initial(chord_diamond, diamond_ends)
    result = maximize_flow(p)
    balance = {n: 0.0 for n in p.nodes}
    for (i, j), (fwd, bwd) in result.flows.items():
        balance[i] += fwd - bwd
        balance[j] -= fwd - bwd
    for node, f in p.flow_out.items():
        assert balance[node] == pytest.approx(f * result.factor, abs=EPS)


def test_layer_one_factor_equals_min_cut_on_random_graphs():
    rng = random.Random(2024)
    for _ in range(50):
        net = random_connected_graph(rng, max_nodes=8, max_links=12)
        source, sink = rng.sample(range(net.node_count), 2)
        result = maximize_flow(LayerProblem.initial(net, EndpointPair(source, sink)))
        assert result.factor == pytest.approx(brute_force_min_cut(net, source, sink), abs=EPS)


def test_disconnected_layer_names_component():
    p = problem([(0, 1), (2, 3)], {0: 1.0, 1: 0.0, 2: 0.0, 3: -1.0}, layer=1)
    with pytest.raises(DisconnectedError) as excinfo:
        maximize_flow(p)
    assert excinfo.value.component == [0, 1]


def test_exhausted_problem_has_nothing_to_maximize():
    with pytest.raises(ValidationError):
        maximize_flow(problem([(0, 1)], {0: 0.0, 1: 0.0}))


# ---------------------------------------------------------------------------
# hunt_bottlenecks
# ---------------------------------------------------------------------------

def test_diamond_hunt_keeps_all_links_in_one_iteration(diamond, diamond_ends):
    p = LayerProblem.initial(diamond, diamond_ends)
    result = maximize_flow(p)
    hunt = hunt_bottlenecks(p, result.factor, saturated(result))
    assert {tuple(sorted(b)) for b in hunt.bottlenecks} == {(0, 1), (0, 2), (1, 3), (2, 3)}
    assert hunt.iterations == 1
    assert hunt.suspect_trail == [4]


def test_chord_is_not_a_bottleneck(chord_diamond, diamond_ends):
    p = LayerProblem.initial(chord_diamond, diamond_ends)
    result = maximize_flow(p)
    # force the chord into the suspect list whatever the max-flow vertex was
    suspects = set(saturated(result)) | {(1, 2)}
    hunt = hunt_bottlenecks(p, result.factor, suspects)
    assert {tuple(sorted(b)) for b in hunt.bottlenecks} == {(0, 1), (0, 2), (1, 3), (2, 3)}
    assert hunt.suspect_trail[0] == 5
    assert hunt.iterations == 2


def test_bottlenecks_oriented_along_flow(diamond, diamond_ends):
    p = LayerProblem.initial(diamond, diamond_ends)
    result = maximize_flow(p)
    hunt = hunt_bottlenecks(p, result.factor, saturated(result))
    assert set(hunt.bottlenecks) == {(0, 1), (0, 2), (1, 3), (2, 3)}


def test_hunting_shrinks_suspects_across_iterations():
    # diamond plus a detour 1-4-2 that no optimal flow needs
    net = Network.build(5, [(0, 1), (0, 2), (1, 3), (2, 3), (1, 4), (2, 4)])
    p = LayerProblem.initial(net, EndpointPair(0, 3))
    result = maximize_flow(p)
    hunt = hunt_bottlenecks(p, result.factor, p.links)
    assert hunt.suspect_trail == sorted(hunt.suspect_trail, reverse=True)
    assert hunt.suspect_trail[0] == 6
    assert len(hunt.bottlenecks) == 4
    assert hunt.iterations == len(hunt.suspect_trail)


# ---------------------------------------------------------------------------
# next_layer
# ---------------------------------------------------------------------------

def test_sink_with_two_incoming_bottlenecks_is_cleared(diamond, diamond_ends):
    p = LayerProblem.initial(diamond, diamond_ends)
    nxt = next_layer(p, 2.0, [(0, 1), (0, 2), (1, 3), (2, 3)])
    assert nxt.flow_out[3] == pytest.approx(0.0)
    assert nxt.is_exhausted
    assert nxt.links == ()
    assert nxt.layer == 2


def test_relay_feeding_an_outgoing_bottleneck_becomes_sink():
    p = problem([(0, 1), (1, 2)], {0: 1.0, 1: 0.0, 2: -1.0}, layer=1)
    nxt = next_layer(p, 1.0, [(1, 2)])
    assert nxt.flow_out == {0: 1.0, 1: -1.0, 2: 0.0}
    assert nxt.links == ((0, 1),)


def test_next_layer_requires_bottlenecks(diamond, diamond_ends):
    with pytest.raises(ValidationError):
        next_layer(LayerProblem.initial(diamond, diamond_ends), 2.0, [])


def test_coefficient_noise_is_corrected():
    links = [(0, 1), (1, 2)]
    noisy = {0: 0.5 + 3e-10, 1: 4e-8, 2: -0.5}
    corrected, count = correct_coefficients(links, frozenset(noisy), noisy)
    assert corrected[1] == 0.0
    assert abs(math.fsum(corrected.values())) < 1e-12
    assert count == 2


def test_unbalanced_component_is_structural_error():
    links = [(0, 1)]
    coeffs = {0: 0.5, 1: 0.0, 2: -0.5}
    with pytest.raises(StructuralError):
        correct_coefficients(links, frozenset(coeffs), coeffs)


# ---------------------------------------------------------------------------
# complete_min_cost
# ---------------------------------------------------------------------------

def test_min_cost_of_exhausted_problem_is_zero():
    flows = complete_min_cost(problem([(0, 1), (1, 2)], {0: 0.0, 1: 0.0, 2: 0.0}))
    assert all(fwd == 0.0 and bwd == 0.0 for fwd, bwd in flows.values())


def test_min_cost_single_route():
    flows = complete_min_cost(problem([(0, 1), (1, 2)], {0: 0.5, 1: 0.0, 2: -0.5}))
    assert flows[(0, 1)][0] == pytest.approx(0.5, abs=EPS)
    assert flows[(1, 2)][0] == pytest.approx(0.5, abs=EPS)


def test_min_cost_equal_paths_total_cost():
    flows = complete_min_cost(problem([(0, 1), (0, 2), (1, 3), (2, 3)], {0: 0.5, 1: 0.0, 2: 0.0, 3: -0.5}))
    assert sum(fwd + bwd for fwd, bwd in flows.values()) == pytest.approx(0.5 * 2, abs=EPS)


def test_min_cost_infeasible_residual():
    with pytest.raises(StructuralError):
        complete_min_cost(problem([(0, 1), (2, 3)], {0: 0.5, 1: 0.0, 2: 0.0, 3: -0.5}))


# ---------------------------------------------------------------------------
# build_capillary
# ---------------------------------------------------------------------------

def test_build_diamond(diamond, diamond_ends):
    pattern, layers = build_capillary(diamond, diamond_ends, 10)
    assert len(layers) == 1
    assert pattern.factors == pytest.approx((2.0,))
    assert {pl.link: pl.load for pl in pattern.links} == pytest.approx(
        {(0, 1): 0.5, (0, 2): 0.5, (1, 3): 0.5, (2, 3): 0.5})
    assert all(pl.layer == 1 for pl in pattern.links)


def test_build_path_has_critical_links(path3):
    pattern, layers = build_capillary(path3, EndpointPair(0, 2), 10)
    assert [r.factor for r in layers] == pytest.approx([1.0])
    assert pattern.loads == pytest.approx({(0, 1): 1.0, (1, 2): 1.0})


def test_build_disconnected_raises():
    net = Network.build(4, [(0, 1), (2, 3)])
    with pytest.raises(DisconnectedError):
        build_capillary(net, EndpointPair(0, 3), 10)


def test_layer_cap_completes_residual_at_min_cost():
    # 0-1 is critical; beyond node 1 two equal routes to 4
    net = Network.build(5, [(0, 1), (1, 2), (2, 4), (1, 3), (3, 4)])
    builder = CapillaryBuilder(net, EndpointPair(0, 4))
    builder.step()
    pattern = builder.snapshot()
    assert pattern.layer_count == 1
    assert pattern.conservation_error() < EPS
    layer_one = [pl for pl in pattern.links if pl.layer == 1]
    assert [pl.link for pl in layer_one] == [(0, 1)]
    assert {pl.layer for pl in pattern.links} <= {1, RESIDUAL}


def test_snapshot_then_continue_matches_capped_build():
    rng = random.Random(11)
    net = random_connected_graph(rng, max_nodes=8, max_links=12)
    ends = EndpointPair(0, net.node_count - 1)
    builder = CapillaryBuilder(net, ends)
    for cap in range(1, 4):
        if not builder.done:
            builder.step()
        capped, _ = build_capillary(net, ends, cap)
        snap = builder.snapshot()
        assert [(pl.link, pl.layer) for pl in snap.links] == [(pl.link, pl.layer) for pl in capped.links]
        assert [pl.load for pl in snap.links] == pytest.approx([pl.load for pl in capped.links])


def test_structural_invariants_on_random_graphs():
    rng = random.Random(7)
    for _ in range(100):
        net = random_connected_graph(rng, max_nodes=8, max_links=12)
        source, sink = rng.sample(range(net.node_count), 2)
        pattern, layers = build_capillary(net, EndpointPair(source, sink), 10)

        assert all(r.factor >= 1 - EPS for r in layers)
        assert pattern.conservation_error() <= EPS
        assert all(0.0 < pl.load <= 1 + EPS for pl in pattern.links)

        seen = [pl.link for pl in pattern.links]
        assert len(seen) == len(set(seen))

        by_layer = pattern.bottleneck_loads_by_layer()
        per_layer = [loads[0] for _, loads in sorted(by_layer.items())]
        for loads in by_layer.values():
            assert max(loads) - min(loads) <= EPS
        assert all(a >= b - EPS for a, b in zip(per_layer, per_layer[1:]))


def test_bottleneck_loads_and_minimality_on_random_graphs():
    rng = random.Random(99)
    for _ in range(30):
        net = random_connected_graph(rng, max_nodes=8, max_links=12)
        source, sink = rng.sample(range(net.node_count), 2)
        p = LayerProblem.initial(net, EndpointPair(source, sink))
        while not p.is_exhausted:
            result = maximize_flow(p)
            hunt = hunt_bottlenecks(p, result.factor, saturated(result))
            links = [tuple(sorted(b)) for b in hunt.bottlenecks]
            for link in links:
                assert sum(hunt.flows[link]) == pytest.approx(1.0, abs=EPS)
            objective, _ = minimize_suspect_load(p, result.factor, links)
            assert objective == pytest.approx(len(links), abs=EPS)
            p = next_layer(p, result.factor, hunt.bottlenecks)


def test_every_input_link_with_flow_is_accounted_once(chord_diamond, diamond_ends):
    pattern, _ = build_capillary(chord_diamond, diamond_ends, 10)
    assert sorted(pl.link for pl in pattern.links) == [(0, 1), (0, 2), (1, 3), (2, 3)]
