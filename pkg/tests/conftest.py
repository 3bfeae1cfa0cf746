from __future__ import annotations

import numpy as np
import pytest
from hypothesis import strategies as st

from roadm_rinn.monitoring import DatasetConfig, generate_dataset
from roadm_rinn.physical import PowerModel
from roadm_rinn.topology import (
    LinkSpec,
    NodeSpec,
    Topology,
    WssParams,
    build_component_graph,
    default_topology_path,
    load_topology,
)


def chain(lengths, fibers=1, wss=WssParams(4, 2, 2), seed=0) -> Topology:
    """Nodes 0..len(lengths) joined in a line."""
    nodes = [NodeSpec(i, f"n{i}") for i in range(len(lengths) + 1)]
    links = [LinkSpec(i, i + 1, km, fibers) for i, km in enumerate(lengths)]
    return Topology(nodes, links, wss, 80.0, seed)


def ring(n, km=80.0, fibers=1, wss=WssParams(4, 2, 4), seed=0) -> Topology:
    nodes = [NodeSpec(i) for i in range(n)]
    links = [LinkSpec(i, (i + 1) % n, km, fibers) for i in range(n)]
    return Topology(nodes, links, wss, 80.0, seed)


@st.composite
def small_topologies(draw, max_nodes=5):
    """Random connected-or-not small topologies that satisfy the port constraints."""
    n = draw(st.integers(1, max_nodes))
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    links = [
        LinkSpec(a, b, draw(st.sampled_from([40.0, 80.0, 100.0, 160.0, 250.0])), draw(st.integers(1, 3)))
        for a, b in chosen
    ]
    m = draw(st.integers(1, 4))
    n_ports = draw(st.integers(m, 6))
    top = Topology([NodeSpec(i) for i in range(n)], links, WssParams(1, m, n_ports), 80.0, draw(st.integers(0, 99)))
    worst = max((top.line_degree(i) for i in range(n)), default=0)
    return Topology(top.nodes, top.links, WssParams(worst + 1, m, n_ports), 80.0, top.seed)


@pytest.fixture(scope="session")
def japan():
    return load_topology(default_topology_path())


@pytest.fixture(scope="session")
def japan_graph(japan):
    return build_component_graph(japan)


@pytest.fixture(scope="session")
def small_dataset():
    """Ring network, 12 lightpaths, mixed failures, full monitoring, jitter 0."""
    cfg = DatasetConfig(
        lp_count=12, samples=60, n_f_set=(1, 2, 3), opm_fraction=1.0, power_model=PowerModel(0.0), seed=7
    )
    return generate_dataset(ring(5), cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
