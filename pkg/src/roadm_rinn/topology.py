"""Multi-fiber ROADM network model and its component graph.

A :class:`Topology` is the declarative input (nodes, links, WSS port
parameters).  :func:`build_component_graph` expands it into every physical
element that can fail, plus every candidate OPM position between adjacent
elements.  The closed-form counts in :func:`count_components` and
:func:`count_opm_slots` are kept independent of the builder so that each can
check the other.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import PortCapacityExceeded, TopologyParseError

FIBER_ATTENUATION_DB_PER_KM = 0.2
TRANSPONDER_LAUNCH_DBM = -1.0
LINE_WSS_IL_DB = 5.0

# uniform draw ranges for nominal parameters
NOMINAL_RANGES = {
    "local_wss_il": (3.3, 6.8),
    "preamp_gain": (18.0, 32.0),
    "booster_gain": (10.0, 20.0),
    "ila_gain": (20.0, 32.0),
}


class ComponentKind(str, Enum):
    TRANSPONDER = "transponder"
    LOCAL_WSS = "local_wss"
    LINE_WSS = "line_wss"
    PREAMP = "preamp"
    BOOSTER = "booster"
    ILA = "ila"
    FIBER_SPAN = "fiber_span"

    @property
    def category(self) -> str:
        return _CATEGORY[self]

    @property
    def is_amplifier(self) -> bool:
        return self in (ComponentKind.PREAMP, ComponentKind.BOOSTER, ComponentKind.ILA)


_CATEGORY = {
    ComponentKind.TRANSPONDER: "transponder",
    ComponentKind.LOCAL_WSS: "wss",
    ComponentKind.LINE_WSS: "wss",
    ComponentKind.PREAMP: "amplifier",
    ComponentKind.BOOSTER: "amplifier",
    ComponentKind.ILA: "amplifier",
    ComponentKind.FIBER_SPAN: "fiber",
}

CATEGORIES = ("transponder", "amplifier", "wss", "fiber")


@dataclass(frozen=True)
class WssParams:
    k: int = 32
    m: int = 8
    n: int = 24

    def __post_init__(self):
        if self.k < 1 or self.m < 1 or self.n < 1:
            raise TopologyParseError(f"wss: k, m, n must be >= 1, got {self}")
        if self.m > self.n:
            raise TopologyParseError(f"wss: m ({self.m}) must not exceed n ({self.n})")


@dataclass(frozen=True)
class LinkSpec:
    a: int
    b: int
    length_km: float
    fibers: int = 1

    def spans(self, span_km: float) -> int:
        return max(1, math.ceil(self.length_km / span_km))

    def span_lengths(self, span_km: float) -> list[float]:
        """Per-span km; the last span carries the remainder of the link."""
        s = self.spans(span_km)
        rest = self.length_km - (s - 1) * span_km
        return [span_km] * (s - 1) + [rest]


@dataclass(frozen=True)
class NodeSpec:
    id: int
    name: str = ""


@dataclass
class Topology:
    nodes: list[NodeSpec]
    links: list[LinkSpec]
    wss: WssParams = field(default_factory=WssParams)
    span_km: float = 80.0
    seed: int = 0

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise TopologyParseError("nodes: duplicate node id")
        known = set(ids)
        pairs = set()
        for idx, link in enumerate(self.links):
            where = f"links[{idx}]"
            if link.a not in known or link.b not in known:
                raise TopologyParseError(f"{where}: unknown node in ({link.a}, {link.b})")
            if link.a == link.b:
                raise TopologyParseError(f"{where}: self-link on node {link.a}")
            key = frozenset((link.a, link.b))
            if key in pairs:
                raise TopologyParseError(f"{where}: duplicate link ({link.a}, {link.b})")
            pairs.add(key)
            if link.fibers < 1:
                raise TopologyParseError(f"{where}.fibers: must be >= 1")
            if not link.length_km > 0:
                raise TopologyParseError(f"{where}.length_km: must be positive")
        if not self.span_km > 0:
            raise TopologyParseError("span_km: must be positive")

    # -- derived quantities -------------------------------------------------

    def fibers(self, i: int) -> dict[int, int]:
        """H_{i,j} for every neighbor j of node i, keyed by neighbor id."""
        out = {}
        for link in self.links:
            if link.a == i:
                out[link.b] = link.fibers
            elif link.b == i:
                out[link.a] = link.fibers
        return dict(sorted(out.items()))

    def link(self, i: int, j: int) -> LinkSpec:
        for link in self.links:
            if {link.a, link.b} == {i, j}:
                return link
        raise KeyError((i, j))

    def line_degree(self, i: int) -> int:
        return sum(self.fibers(i).values())

    def local_wss_count(self, i: int) -> int:
        return math.ceil(self.line_degree(i) / self.wss.m)

    def degree(self, i: int) -> int:
        return self.line_degree(i) + self.local_wss_count(i)

    def node_ids(self) -> list[int]:
        return [n.id for n in self.nodes]

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n.id, "name": n.name} for n in self.nodes],
            "links": [
                {"a": l.a, "b": l.b, "length_km": l.length_km, "fibers": l.fibers}
                for l in self.links
            ],
            "wss": {"k": self.wss.k, "m": self.wss.m, "n": self.wss.n},
            "span_km": self.span_km,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Topology":
        if not isinstance(doc, dict):
            raise TopologyParseError("top level: expected an object")
        nodes = []
        for idx, raw in enumerate(_field(doc, "nodes", list)):
            if isinstance(raw, int):
                nodes.append(NodeSpec(raw))
            elif isinstance(raw, dict):
                nid = raw.get("id")
                if not isinstance(nid, int):
                    raise TopologyParseError(f"nodes[{idx}].id: expected an integer")
                nodes.append(NodeSpec(nid, str(raw.get("name", ""))))
            else:
                raise TopologyParseError(f"nodes[{idx}]: expected an integer or object")
        links = []
        for idx, raw in enumerate(_field(doc, "links", list)):
            if not isinstance(raw, dict):
                raise TopologyParseError(f"links[{idx}]: expected an object")
            try:
                links.append(
                    LinkSpec(
                        a=int(raw["a"]),
                        b=int(raw["b"]),
                        length_km=float(raw["length_km"]),
                        fibers=int(raw.get("fibers", 1)),
                    )
                )
            except KeyError as exc:
                raise TopologyParseError(f"links[{idx}]: missing field {exc.args[0]!r}") from None
            except (TypeError, ValueError) as exc:
                raise TopologyParseError(f"links[{idx}]: {exc}") from None
        wss_doc = doc.get("wss", {})
        if not isinstance(wss_doc, dict):
            raise TopologyParseError("wss: expected an object")
        try:
            wss = WssParams(**{k: int(v) for k, v in wss_doc.items()})
        except TypeError as exc:
            raise TopologyParseError(f"wss: {exc}") from None
        return cls(
            nodes=nodes,
            links=links,
            wss=wss,
            span_km=float(doc.get("span_km", 80.0)),
            seed=int(doc.get("seed", 0)),
        )


def _field(doc, name, typ):
    if name not in doc:
        raise TopologyParseError(f"missing field {name!r}")
    value = doc[name]
    if not isinstance(value, typ):
        raise TopologyParseError(f"{name}: expected {typ.__name__}")
    return value


def load_topology(path) -> Topology:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise TopologyParseError(f"{path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TopologyParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return Topology.from_dict(doc)


def default_topology_path() -> Path:
    return Path(__file__).parent / "data" / "japan14.json"


# -- constraints and closed-form counts --------------------------------------


def validate(topology: Topology) -> Topology:
    k, m = topology.wss.k, topology.wss.m
    for i in topology.node_ids():
        h = topology.fibers(i)
        total = sum(h.values())
        for j in h:
            required = total - h[j] + 1
            if k < required:
                raise PortCapacityExceeded(i, required, k, f"line-WSS toward {j}")
        lam = topology.local_wss_count(i)
        if m * lam < total:
            raise PortCapacityExceeded(i, total, m * lam, "local-WSS line side")
    return topology


def count_components(topology: Topology) -> tuple[int, int, int]:
    n = topology.wss.n
    c_node = 0
    c_link = 0
    for i in topology.node_ids():
        h = topology.fibers(i)
        lam = topology.local_wss_count(i)
        c_node += n * lam + 2 * lam + 4 * sum(h.values())
        for j, hij in h.items():
            s = topology.link(i, j).spans(topology.span_km)
            c_link += hij * (2 * s - 1)
    return c_node + c_link, c_node, c_link


def count_opm_slots(topology: Topology) -> tuple[int, int, int]:
    """Candidate OPM locations (M, M_node, M_link).

    Link slots are counted per fiber: every in-line amplifier on every fiber
    has an input and an output position.
    """
    n = topology.wss.n
    m_node = 0
    m_link = 0
    for i in topology.node_ids():
        h = topology.fibers(i)
        lam = topology.local_wss_count(i)
        for j, hij in h.items():
            m_node += 6 * hij + sum(hij * hil for l, hil in h.items() if l != j)
            s = topology.link(i, j).spans(topology.span_km)
            m_link += hij * 2 * (s - 1)
        m_node += 2 * n * lam
    return m_node + m_link, m_node, m_link


# -- component graph ----------------------------------------------------------


@dataclass(frozen=True)
class Component:
    id: int
    kind: ComponentKind
    label: str
    nominal: float
    node: int | None = None
    link: tuple[int, int, int] | None = None  # (src, dst, fiber)

    @property
    def category(self) -> str:
        return self.kind.category


@dataclass(frozen=True)
class OpmSlot:
    id: int
    upstream: int
    downstream: int
    region: str  # "node" or "link"


@dataclass(frozen=True)
class Degree:
    """One outgoing/incoming fiber pair of a node toward a neighbor."""

    node: int
    neighbor: int
    fiber: int
    pair: int  # local add/drop WSS pair serving this degree
    egress: int
    ingress: int
    booster: int
    preamp: int


@dataclass
class NodeParts:
    transponders: list[list[int]]  # [pair][port]
    add_wss: list[int]
    drop_wss: list[int]
    degrees: dict[tuple[int, int], Degree]  # (neighbor, fiber) -> Degree


@dataclass
class ComponentGraph:
    topology: Topology
    components: list[Component]
    slots: list[OpmSlot]
    nodes: dict[int, NodeParts]
    fibers: dict[tuple[int, int, int], list[int]]  # directed (src, dst, fiber) -> spans/ILAs
    slot_index: dict[tuple[int, int], int]

    def slot_between(self, upstream: int, downstream: int) -> int:
        return self.slot_index[(upstream, downstream)]

    def successors(self, cid: int) -> list[int]:
        return [v for (u, v) in self.slot_index if u == cid]

    def to_dict(self) -> dict:
        return {
            "components": [
                [c.id, c.kind.value, c.label, round(c.nominal, 12)] for c in self.components
            ],
            "slots": [[s.id, s.upstream, s.downstream, s.region] for s in self.slots],
        }


def _draw(rng, key):
    lo, hi = NOMINAL_RANGES[key]
    return float(rng.uniform(lo, hi))


def build_component_graph(topology: Topology) -> ComponentGraph:
    validate(topology)
    rng = np.random.default_rng(topology.seed)
    wss = topology.wss
    components: list[Component] = []

    def add(kind, label, nominal, node=None, link=None):
        comp = Component(len(components), kind, label, nominal, node, link)
        components.append(comp)
        return comp.id

    nodes: dict[int, NodeParts] = {}
    for i in topology.node_ids():
        h = topology.fibers(i)
        lam = topology.local_wss_count(i)
        transponders = [
            [
                add(ComponentKind.TRANSPONDER, f"N{i}/trx/q{q}/u{u}", TRANSPONDER_LAUNCH_DBM, node=i)
                for u in range(wss.n)
            ]
            for q in range(lam)
        ]
        add_wss = [
            add(ComponentKind.LOCAL_WSS, f"N{i}/add/q{q}", _draw(rng, "local_wss_il"), node=i)
            for q in range(lam)
        ]
        drop_wss = [
            add(ComponentKind.LOCAL_WSS, f"N{i}/drop/q{q}", _draw(rng, "local_wss_il"), node=i)
            for q in range(lam)
        ]
        degrees = {}
        r = 0
        for j, hij in h.items():
            for f in range(hij):
                tag = f"N{i}/to{j}/f{f}"
                egress = add(ComponentKind.LINE_WSS, f"{tag}/egress", LINE_WSS_IL_DB, node=i)
                ingress = add(ComponentKind.LINE_WSS, f"{tag}/ingress", LINE_WSS_IL_DB, node=i)
                booster = add(ComponentKind.BOOSTER, f"{tag}/booster", _draw(rng, "booster_gain"), node=i)
                preamp = add(ComponentKind.PREAMP, f"{tag}/preamp", _draw(rng, "preamp_gain"), node=i)
                degrees[(j, f)] = Degree(i, j, f, r % lam, egress, ingress, booster, preamp)
                r += 1
        nodes[i] = NodeParts(transponders, add_wss, drop_wss, degrees)

    fibers: dict[tuple[int, int, int], list[int]] = {}
    for link in topology.links:
        lengths = link.span_lengths(topology.span_km)
        for src, dst in ((link.a, link.b), (link.b, link.a)):
            for f in range(link.fibers):
                chain = []
                for s, km in enumerate(lengths):
                    if s > 0:
                        chain.append(
                            add(
                                ComponentKind.ILA,
                                f"L{src}-{dst}/f{f}/ila{s}",
                                _draw(rng, "ila_gain"),
                                link=(src, dst, f),
                            )
                        )
                    chain.append(
                        add(
                            ComponentKind.FIBER_SPAN,
                            f"L{src}-{dst}/f{f}/span{s + 1}",
                            FIBER_ATTENUATION_DB_PER_KM * km,
                            link=(src, dst, f),
                        )
                    )
                fibers[(src, dst, f)] = chain

    # Candidate locations are gathered per owner (node, or directed link
    # fiber) and then numbered rank by rank across owners, so that any
    # every-I-th selection spreads over the whole network.
    groups: list[list[tuple[int, int, str]]] = []
    for i, parts in nodes.items():
        group = []
        for (j, f), d in parts.degrees.items():
            group.append((parts.add_wss[d.pair], d.egress, "node"))
            group.append((d.ingress, parts.drop_wss[d.pair], "node"))
            group.append((d.egress, d.booster, "node"))
            group.append((d.booster, fibers[(i, j, f)][0], "node"))
            group.append((fibers[(j, i, f)][-1], d.preamp, "node"))
            group.append((d.preamp, d.ingress, "node"))
        for (j, f), d_in in parts.degrees.items():
            for (l, g), d_out in parts.degrees.items():
                if l != j:
                    group.append((d_in.ingress, d_out.egress, "node"))
        for q, ports in enumerate(parts.transponders):
            for t in ports:
                group.append((t, parts.add_wss[q], "node"))
                group.append((parts.drop_wss[q], t, "node"))
        groups.append(group)
    for key, chain in fibers.items():
        group = []
        for pos, cid in enumerate(chain):
            if components[cid].kind is ComponentKind.ILA:
                group.append((chain[pos - 1], cid, "link"))
                group.append((cid, chain[pos + 1], "link"))
        groups.append(group)
    slots = [
        OpmSlot(n, u, v, region)
        for n, (u, v, region) in enumerate(
            entry for rank in itertools.zip_longest(*groups) for entry in rank if entry is not None
        )
    ]

    slot_index = {(s.upstream, s.downstream): s.id for s in slots}
    return ComponentGraph(topology, components, slots, nodes, fibers, slot_index)


def topology_stats(topology: Topology) -> dict:
    c, c_node, c_link = count_components(topology)
    m, m_node, m_link = count_opm_slots(topology)
    per_node = [
        {
            "node": i,
            "line_degree": topology.line_degree(i),
            "lambda": topology.local_wss_count(i),
            "degree": topology.degree(i),
        }
        for i in topology.node_ids()
    ]
    return {
        "nodes": per_node,
        "C": c,
        "C_node": c_node,
        "C_link": c_link,
        "M": m,
        "M_node": m_node,
        "M_link": m_link,
    }
