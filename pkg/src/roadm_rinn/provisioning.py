"""Shortest-path / first-fit routing, fiber and wavelength assignment.

Requests are routed on the hop-count shortest node path (lexicographically
smallest on ties).  A wavelength is taken first-fit across the whole path,
and on each hop the lowest-index fiber carrying that wavelength free is used.
A bidirectional request also reserves the reverse direction on the same
fibers and wavelength and shares the transponder at each end.
"""
from __future__ import annotations

from dataclasses import dataclass

import networkx as nx

from .errors import ConfigError
from .topology import ComponentGraph

DEFAULT_WAVELENGTHS = 32


@dataclass(frozen=True)
class LightpathRequest:
    id: int
    source: int
    destination: int

    def __post_init__(self):
        if self.source == self.destination:
            raise ConfigError(f"request {self.id}: source equals destination")


@dataclass(frozen=True)
class Lightpath:
    id: int
    request: int
    wavelength: int
    nodes: tuple[int, ...]
    fibers: tuple[int, ...]  # fiber index per hop
    components: tuple[int, ...]
    slots: tuple[int, ...]  # OPM slot id between components[i] and components[i+1]

    @property
    def length(self) -> int:
        return len(self.components)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "request": self.request,
            "wavelength": self.wavelength,
            "nodes": list(self.nodes),
            "fibers": list(self.fibers),
            "components": list(self.components),
            "slots": list(self.slots),
        }

    @classmethod
    def from_dict(cls, doc) -> "Lightpath":
        return cls(
            id=doc["id"],
            request=doc["request"],
            wavelength=doc["wavelength"],
            nodes=tuple(doc["nodes"]),
            fibers=tuple(doc["fibers"]),
            components=tuple(doc["components"]),
            slots=tuple(doc["slots"]),
        )


def shortest_node_path(graph: ComponentGraph, source: int, destination: int, g=None) -> list[int] | None:
    g = g if g is not None else _node_graph(graph)
    try:
        return min(nx.all_shortest_paths(g, source, destination))
    except nx.NetworkXNoPath:
        return None


def _node_graph(graph: ComponentGraph) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(graph.topology.node_ids())
    g.add_edges_from((l.a, l.b) for l in graph.topology.links)
    return g


class WavelengthPlan:
    """Occupancy of (src, dst, fiber, wavelength) and of transponder Tx/Rx."""

    def __init__(self, graph: ComponentGraph, wavelengths: int):
        if wavelengths < 1:
            raise ConfigError("wavelengths must be >= 1")
        self.graph = graph
        self.wavelengths = wavelengths
        self.used: set[tuple[int, int, int, int]] = set()
        self.tx_busy: set[int] = set()
        self.rx_busy: set[int] = set()

    def free(self, src, dst, fiber, w) -> bool:
        return (src, dst, fiber, w) not in self.used

    def fiber_for(self, src, dst, w, both_ways) -> int | None:
        for f in range(self.graph.topology.link(src, dst).fibers):
            if self.free(src, dst, f, w) and (not both_ways or self.free(dst, src, f, w)):
                return f
        return None

    def transponder(self, node, pair, need_tx, need_rx) -> int | None:
        for t in self.graph.nodes[node].transponders[pair]:
            if need_tx and t in self.tx_busy:
                continue
            if need_rx and t in self.rx_busy:
                continue
            return t
        return None


def expand(graph: ComponentGraph, nodes, fibers, source_trx, dest_trx) -> tuple[list[int], list[int]]:
    """Component sequence and slot ids for a node path with chosen fibers."""
    parts = graph.nodes
    first = parts[nodes[0]].degrees[(nodes[1], fibers[0])]
    seq = [source_trx, parts[nodes[0]].add_wss[first.pair]]
    for h in range(len(nodes) - 1):
        u, v, f = nodes[h], nodes[h + 1], fibers[h]
        out = parts[u].degrees[(v, f)]
        inc = parts[v].degrees[(u, f)]
        seq += [out.egress, out.booster]
        seq += graph.fibers[(u, v, f)]
        seq += [inc.preamp, inc.ingress]
    last = parts[nodes[-1]].degrees[(nodes[-2], fibers[-1])]
    seq += [parts[nodes[-1]].drop_wss[last.pair], dest_trx]
    slots = [graph.slot_between(a, b) for a, b in zip(seq, seq[1:])]
    return seq, slots


def _end_pairs(graph, nodes, fibers):
    src_pair = graph.nodes[nodes[0]].degrees[(nodes[1], fibers[0])].pair
    dst_pair = graph.nodes[nodes[-1]].degrees[(nodes[-2], fibers[-1])].pair
    return src_pair, dst_pair


def route_spff(
    graph: ComponentGraph,
    requests: list[LightpathRequest],
    wavelengths: int = DEFAULT_WAVELENGTHS,
    bidirectional: bool = False,
    plan: WavelengthPlan | None = None,
    first_id: int = 0,
) -> tuple[list[Lightpath], list[int]]:
    """Provision ``requests`` in order.

    Returns the lightpaths and the ids of blocked requests.  A bidirectional
    request yields two lightpaths (forward then reverse) or none.
    """
    plan = plan or WavelengthPlan(graph, wavelengths)
    lightpaths: list[Lightpath] = []
    blocked: list[int] = []
    next_id = first_id
    g = _node_graph(graph)
    for req in requests:
        path = shortest_node_path(graph, req.source, req.destination, g)
        found = None
        if path is not None:
            hops = list(zip(path, path[1:]))
            for w in range(plan.wavelengths):
                fibers = [plan.fiber_for(u, v, w, bidirectional) for u, v in hops]
                if any(f is None for f in fibers):
                    continue
                src_pair, dst_pair = _end_pairs(graph, path, fibers)
                t_src = plan.transponder(path[0], src_pair, True, bidirectional)
                t_dst = plan.transponder(path[-1], dst_pair, bidirectional, True)
                if t_src is None or t_dst is None:
                    continue
                found = (w, fibers, t_src, t_dst)
                break
        if found is None:
            blocked.append(req.id)
            continue
        w, fibers, t_src, t_dst = found
        legs = [(path, fibers, t_src, t_dst)]
        if bidirectional:
            legs.append((path[::-1], fibers[::-1], t_dst, t_src))
        for nodes, fibs, a, b in legs:
            seq, slots = expand(graph, nodes, fibs, a, b)
            for (u, v), f in zip(zip(nodes, nodes[1:]), fibs):
                plan.used.add((u, v, f, w))
            plan.tx_busy.add(a)
            plan.rx_busy.add(b)
            lightpaths.append(
                Lightpath(next_id, req.id, w, tuple(nodes), tuple(fibs), tuple(seq), tuple(slots))
            )
            next_id += 1
    return lightpaths, blocked
