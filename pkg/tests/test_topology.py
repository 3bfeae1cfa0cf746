import json
import math

import pytest
from hypothesis import given, settings

from conftest import chain, small_topologies
from roadm_rinn.errors import PortCapacityExceeded, TopologyParseError
from roadm_rinn.topology import (
    ComponentKind,
    LinkSpec,
    NodeSpec,
    Topology,
    WssParams,
    build_component_graph,
    count_components,
    count_opm_slots,
    load_topology,
    topology_stats,
    validate,
)


def three_node_topology():
    # node 0 = i, 1 = j (2 fibers), 2 = z (1 fiber)
    nodes = [NodeSpec(0), NodeSpec(1), NodeSpec(2)]
    links = [LinkSpec(0, 1, 80.0, 2), LinkSpec(0, 2, 80.0, 1)]
    return Topology(nodes, links, WssParams(k=4, m=2, n=24))


def test_three_node_degree():
    top = three_node_topology()
    assert top.local_wss_count(0) == 2
    assert top.degree(0) == 5


def test_isolated_node_has_no_degree():
    top = Topology([NodeSpec(0)], [], WssParams(8, 8, 24))
    assert top.local_wss_count(0) == 0
    assert top.degree(0) == 0
    assert count_components(top) == (0, 0, 0)


def test_line_wss_port_shortage():
    nodes = [NodeSpec(i) for i in range(3)]
    links = [LinkSpec(0, 1, 80.0, 2), LinkSpec(0, 2, 80.0, 3)]
    top = Topology(nodes, links, WssParams(k=3, m=8, n=24))
    with pytest.raises(PortCapacityExceeded) as info:
        validate(top)
    assert info.value.required == 4
    assert info.value.available == 3


def test_span_count_and_link_components():
    top = chain([240.0])
    s = top.links[0].spans(top.span_km)
    assert s == 3
    _, _, c_link = count_components(top)
    assert c_link == 2 * 5


def test_high_degree_node_has_256_components():
    # 4 neighbours, 8 fibres each, 8 components per degree
    assert 4 * 8 * 8 == 256
    nodes = [NodeSpec(i) for i in range(5)]
    links = [LinkSpec(0, j, 160.0, 8) for j in range(1, 5)]
    top = Topology(nodes, links, WssParams(k=32, m=32, n=32))
    graph = build_component_graph(top)
    node_side = [
        c
        for c in graph.components
        if c.node == 0 and c.kind in (ComponentKind.PREAMP, ComponentKind.BOOSTER, ComponentKind.LINE_WSS)
    ]
    ilas = [c for c in graph.components if c.kind is ComponentKind.ILA and 0 in c.link[:2]]
    # a fibre counts once per direction, however many spans it has
    fibres = {c.link for c in graph.components if c.kind is ComponentKind.FIBER_SPAN and 0 in c.link[:2]}
    per_degree = len(node_side) + len(ilas) + len(fibres)
    assert per_degree == 256


def test_opm_slot_examples():
    single = chain([80.0])
    assert count_opm_slots(single)[2] == 0
    three = chain([240.0])
    assert count_opm_slots(three)[2] == 8
    graph = build_component_graph(three)
    ila_slots = [
        s
        for s in graph.slots
        if graph.components[s.upstream].kind is ComponentKind.ILA
        or graph.components[s.downstream].kind is ComponentKind.ILA
    ]
    assert len(ila_slots) == 8


def test_interconnect_slots():
    top = three_node_topology()
    graph = build_component_graph(top)
    parts = graph.nodes[0]
    ingress = {d.ingress: nbr for (nbr, _), d in parts.degrees.items()}
    egress = {d.egress: nbr for (nbr, _), d in parts.degrees.items()}
    pairs = [
        s
        for s in graph.slots
        if s.upstream in ingress and s.downstream in egress and ingress[s.upstream] != egress[s.downstream]
    ]
    assert len(pairs) == 2 * 1 + 1 * 2


def test_two_node_160km_chain():
    graph = build_component_graph(chain([160.0]))
    kinds = [graph.components[c].kind for c in graph.fibers[(0, 1, 0)]]
    assert kinds == [ComponentKind.FIBER_SPAN, ComponentKind.ILA, ComponentKind.FIBER_SPAN]
    d0 = graph.nodes[0].degrees[(1, 0)]
    d1 = graph.nodes[1].degrees[(0, 0)]
    assert graph.slot_between(d0.booster, graph.fibers[(0, 1, 0)][0]) is not None
    assert graph.slot_between(graph.fibers[(0, 1, 0)][-1], d1.preamp) is not None


def test_last_span_carries_remainder():
    graph = build_component_graph(chain([200.0]))
    spans = [graph.components[c] for c in graph.fibers[(0, 1, 0)] if graph.components[c].kind is ComponentKind.FIBER_SPAN]
    assert [round(s.nominal, 9) for s in spans] == [16.0, 16.0, 8.0]


def test_nominal_values_within_ranges(japan_graph):
    bounds = {
        ComponentKind.LOCAL_WSS: (3.3, 6.8),
        ComponentKind.PREAMP: (18.0, 32.0),
        ComponentKind.BOOSTER: (10.0, 20.0),
        ComponentKind.ILA: (20.0, 32.0),
        ComponentKind.LINE_WSS: (5.0, 5.0),
        ComponentKind.TRANSPONDER: (-1.0, -1.0),
    }
    for comp in japan_graph.components:
        if comp.kind in bounds:
            lo, hi = bounds[comp.kind]
            assert lo <= comp.nominal <= hi
        else:
            assert 0 < comp.nominal <= 0.2 * 80 + 1e-9


def test_japan_counts_match(japan, japan_graph):
    assert len(japan.nodes) == 14
    assert len(japan_graph.components) == count_components(japan)[0]
    assert len(japan_graph.slots) == count_opm_slots(japan)[0]
    stats = topology_stats(japan)
    assert stats["C"] == stats["C_node"] + stats["C_link"]


@settings(max_examples=60, deadline=None)
@given(small_topologies())
def test_counting_identities(top):
    graph = build_component_graph(top)
    assert len(graph.components) == count_components(top)[0]
    assert len(graph.slots) == count_opm_slots(top)[0]
    for i in top.node_ids():
        assert top.degree(i) == top.line_degree(i) + top.local_wss_count(i)
        assert top.local_wss_count(i) == math.ceil(top.line_degree(i) / top.wss.m)


@settings(max_examples=40, deadline=None)
@given(small_topologies())
def test_build_is_deterministic(top):
    a = build_component_graph(top).to_dict()
    b = build_component_graph(top).to_dict()
    assert json.dumps(a) == json.dumps(b)


@settings(max_examples=40, deadline=None)
@given(small_topologies(max_nodes=4))
def test_lambda_monotone_in_fibers(top):
    for idx, link in enumerate(top.links):
        links = list(top.links)
        links[idx] = LinkSpec(link.a, link.b, link.length_km, link.fibers + 1)
        bigger = Topology(top.nodes, links, top.wss, top.span_km, top.seed)
        for i in top.node_ids():
            assert bigger.local_wss_count(i) >= top.local_wss_count(i)


def test_slot_endpoints_are_components(japan_graph):
    ids = {c.id for c in japan_graph.components}
    for s in japan_graph.slots:
        assert s.upstream in ids and s.downstream in ids
    assert [s.id for s in japan_graph.slots] == list(range(len(japan_graph.slots)))


@pytest.mark.parametrize(
    "text, fragment",
    [
        ('{"nodes": [0, 1], "links": [{"a": 0, "b": 1}]}', "links[0]: missing field 'length_km'"),
        ('{"nodes": [0], "links": [{"a": 0, "b": 0, "length_km": 80}]}', "self-link"),
        ('{"nodes": [0, 1], "links": [{"a": 0, "b": 2, "length_km": 80}]}', "unknown node"),
        ('{"links": []}', "missing field 'nodes'"),
        ('{"nodes": [0, 1], "links": [], "wss": {"k": 4, "m": 9, "n": 8}}', "must not exceed"),
    ],
)
def test_parse_errors_name_the_field(tmp_path, text, fragment):
    path = tmp_path / "t.json"
    path.write_text(text)
    with pytest.raises(TopologyParseError) as info:
        load_topology(path)
    assert fragment in str(info.value)


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "t.json"
    path.write_text('{\n  "nodes": [0,\n}')
    with pytest.raises(TopologyParseError, match=r"t\.json:3:1"):
        load_topology(path)


def test_roundtrip(japan):
    assert Topology.from_dict(japan.to_dict()) == japan
