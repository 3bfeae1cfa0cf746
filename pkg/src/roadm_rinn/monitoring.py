"""OPM deployment, monitor snapshots and labeled dataset generation."""
from __future__ import annotations

import gzip
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, MissingArtifact, OutOfRange
from .physical import Failure, FailureScenario, PowerModel, ledger, sample_failure_scenario
from .provisioning import (
    DEFAULT_WAVELENGTHS,
    Lightpath,
    LightpathRequest,
    WavelengthPlan,
    route_spff,
)
from .topology import ComponentGraph, Topology, build_component_graph

ALPHA = -999.0  # no OPM at this position
FORMAT = "roadm-rinn-dataset/1"


@dataclass(frozen=True)
class Deployment:
    total: int  # M
    deployed: frozenset[int]  # 0-based slot ids
    interval: int = 0

    @property
    def count(self) -> int:
        return len(self.deployed)

    @property
    def psi(self) -> np.ndarray:
        out = np.zeros(self.total, dtype=np.int8)
        out[sorted(self.deployed)] = 1
        return out

    def to_dict(self) -> dict:
        return {"M": self.total, "interval": self.interval, "deployed": sorted(self.deployed)}

    @classmethod
    def from_dict(cls, doc) -> "Deployment":
        return cls(doc["M"], frozenset(doc["deployed"]), doc["interval"])


def deploy_uniform(total: int, count: int | None = None, fraction: float | None = None) -> Deployment:
    """One OPM every floor(M/M') candidate locations: slots I, 2I, ..., M'I (1-based)."""
    if (count is None) == (fraction is None):
        raise ConfigError("give exactly one of count or fraction")
    if count is None:
        if not 0 < fraction <= 1:
            raise OutOfRange(f"OPM fraction {fraction} outside (0, 1]")
        count = max(1, int(round(fraction * total)))
    if not 1 <= count <= total:
        raise OutOfRange(f"OPM count {count} outside [1, {total}]")
    interval = total // count
    return Deployment(total, frozenset(m * interval - 1 for m in range(1, count + 1)), interval)


@dataclass
class MonitorSnapshot:
    """Per-lightpath vectors x_{l,1..p_l}: readings or ALPHA, then the reception flag."""

    readings: list[np.ndarray]

    def flat(self) -> np.ndarray:
        return np.concatenate(self.readings)

    def to_list(self) -> list[list[float]]:
        return [[round(float(v), 4) for v in row] for row in self.readings]

    @classmethod
    def from_list(cls, rows) -> "MonitorSnapshot":
        return cls([np.asarray(r, dtype=float) for r in rows])


def masks(lightpaths: list[Lightpath], deployment: Deployment) -> list[np.ndarray]:
    return [np.array([s in deployment.deployed for s in lp.slots], dtype=bool) for lp in lightpaths]


def assemble(raw: list[np.ndarray], flags: list[int], lp_masks: list[np.ndarray]) -> MonitorSnapshot:
    rows = []
    for values, flag, mask in zip(raw, flags, lp_masks):
        row = np.empty(len(values) + 1)
        row[:-1] = np.where(mask, values, ALPHA)
        row[-1] = flag
        rows.append(row)
    return MonitorSnapshot(rows)


def snapshot(
    graph: ComponentGraph,
    lightpaths: list[Lightpath],
    deployment: Deployment,
    scenario: FailureScenario | None,
    model: PowerModel,
    rng=None,
) -> MonitorSnapshot:
    raw, flags = [], []
    for lp in lightpaths:
        values, flag = ledger(lp, graph, scenario, model)
        raw.append(values)
        flags.append(flag)
    raw = add_jitter(raw, model, rng)
    return assemble(raw, flags, masks(lightpaths, deployment))


def add_jitter(raw: list[np.ndarray], model: PowerModel, rng) -> list[np.ndarray]:
    if model.jitter_sigma_db <= 0 or rng is None:
        return raw
    rng = np.random.default_rng(rng)
    sizes = [len(r) for r in raw]
    noise = rng.normal(0.0, model.jitter_sigma_db, size=sum(sizes))
    out, start = [], 0
    for values, n in zip(raw, sizes):
        out.append(values + noise[start : start + n])
        start += n
    return out


@dataclass
class Sample:
    pre: MonitorSnapshot
    post: MonitorSnapshot
    scenario: FailureScenario

    @property
    def truth(self) -> frozenset[int]:
        return self.scenario.components


@dataclass(frozen=True)
class DatasetConfig:
    lp_count: int = 100
    samples: int = 1000
    n_f_set: tuple[int, ...] = (1, 2, 3)
    opm_fraction: float = 1.0
    type_filter: str | None = None
    power_model: PowerModel = field(default_factory=PowerModel)
    wavelengths: int = DEFAULT_WAVELENGTHS
    bidirectional: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.lp_count < 1:
            raise ConfigError("lp_count must be >= 1")
        if self.samples < 0:
            raise ConfigError("samples must be >= 0")
        if not self.n_f_set or min(self.n_f_set) < 1:
            raise ConfigError("n_f_set must hold positive failure counts")
        if not 0 < self.opm_fraction <= 1:
            raise ConfigError("opm_fraction must lie in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "lp_count": self.lp_count,
            "samples": self.samples,
            "n_f_set": list(self.n_f_set),
            "opm_fraction": self.opm_fraction,
            "type_filter": self.type_filter,
            "power_model": {
                "jitter_sigma_db": self.power_model.jitter_sigma_db,
                "noise_floor_dbm": self.power_model.noise_floor_dbm,
                "sensitivity_dbm": self.power_model.sensitivity_dbm,
            },
            "wavelengths": self.wavelengths,
            "bidirectional": self.bidirectional,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc) -> "DatasetConfig":
        doc = dict(doc)
        doc["power_model"] = PowerModel(**doc["power_model"])
        doc["n_f_set"] = tuple(doc["n_f_set"])
        return cls(**doc)


@dataclass
class Dataset:
    topology: Topology
    graph: ComponentGraph
    config: DatasetConfig
    lightpaths: list[Lightpath]
    deployment: Deployment
    pre: MonitorSnapshot
    samples: list[Sample]
    blocked: int = 0

    def nominal(self) -> list[np.ndarray]:
        """Jitter-free, failure-free readings (no masking)."""
        return [ledger(lp, self.graph, None, self.config.power_model)[0] for lp in self.lightpaths]

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "metadata": {**self.config.to_dict(), "blocked_requests": self.blocked},
            "topology": self.topology.to_dict(),
            "lightpaths": [lp.to_dict() for lp in self.lightpaths],
            "deployment": self.deployment.to_dict(),
            "pre": self.pre.to_list(),
            "samples": [
                {"failures": [f.to_dict() for f in s.scenario.failures], "post": s.post.to_list()}
                for s in self.samples
            ],
        }

    @classmethod
    def from_dict(cls, doc) -> "Dataset":
        if doc.get("format") != FORMAT:
            raise ConfigError(f"not a dataset document (format={doc.get('format')!r})")
        meta = dict(doc["metadata"])
        blocked = meta.pop("blocked_requests", 0)
        config = DatasetConfig.from_dict(meta)
        topology = Topology.from_dict(doc["topology"])
        graph = build_component_graph(topology)
        pre = MonitorSnapshot.from_list(doc["pre"])
        samples = [
            Sample(
                pre,
                MonitorSnapshot.from_list(s["post"]),
                FailureScenario(tuple(Failure.from_dict(f) for f in s["failures"])),
            )
            for s in doc["samples"]
        ]
        return cls(
            topology,
            graph,
            config,
            [Lightpath.from_dict(lp) for lp in doc["lightpaths"]],
            Deployment.from_dict(doc["deployment"]),
            pre,
            samples,
            blocked,
        )


def provision(graph: ComponentGraph, config: DatasetConfig, rng: np.random.Generator):
    """Draw random source/destination pairs until ``lp_count`` lightpaths exist."""
    nodes = [i for i in graph.topology.node_ids() if graph.topology.fibers(i)]
    if len(nodes) < 2:
        raise ConfigError("topology needs at least two connected nodes")
    plan = WavelengthPlan(graph, config.wavelengths)
    lightpaths: list[Lightpath] = []
    blocked = 0
    attempts = 0
    while len(lightpaths) < config.lp_count:
        attempts += 1
        if attempts > 100 * config.lp_count:
            raise ConfigError(
                f"could only provision {len(lightpaths)} of {config.lp_count} lightpaths"
            )
        s, d = rng.choice(len(nodes), size=2, replace=False)
        req = LightpathRequest(attempts - 1, nodes[int(s)], nodes[int(d)])
        both = config.bidirectional and config.lp_count - len(lightpaths) >= 2
        new, rejected = route_spff(
            graph, [req], bidirectional=both, plan=plan, first_id=len(lightpaths)
        )
        lightpaths += new
        blocked += len(rejected)
    return lightpaths, blocked


class _Context:
    """Everything a worker needs to produce post-failure snapshots."""

    def __init__(self, graph, lightpaths, deployment, config, base_seed):
        self.graph = graph
        self.lightpaths = lightpaths
        self.deployment = deployment
        self.config = config
        self.base_seed = base_seed
        model = config.power_model
        self.nominal = [ledger(lp, graph, None, model) for lp in lightpaths]
        self.masks = masks(lightpaths, deployment)
        self.members = [set(lp.components) for lp in lightpaths]

    def observe(self, scenario: FailureScenario | None, rng) -> MonitorSnapshot:
        model = self.config.power_model
        raw, flags = [], []
        failed = scenario.components if scenario else frozenset()
        for lp, members, (values, flag) in zip(self.lightpaths, self.members, self.nominal):
            if failed & members:
                values, flag = ledger(lp, self.graph, scenario, model)
            raw.append(values)
            flags.append(flag)
        return assemble(add_jitter(raw, model, rng), flags, self.masks)

    def sample(self, index: int) -> tuple[FailureScenario, MonitorSnapshot]:
        rng = np.random.default_rng([self.base_seed, index])
        scenario = sample_failure_scenario(
            self.graph, self.lightpaths, self.config.n_f_set, self.config.type_filter, rng
        )
        return scenario, self.observe(scenario, rng)


_WORKER: _Context | None = None


def _init_worker(ctx):
    global _WORKER
    _WORKER = ctx


def _work(index):
    return _WORKER.sample(index)


def generate_dataset(
    topology: Topology,
    config: DatasetConfig,
    graph: ComponentGraph | None = None,
    jobs: int = 1,
) -> Dataset:
    graph = graph or build_component_graph(topology)
    root = np.random.SeedSequence(config.seed)
    route_seq, pre_seq, sample_seq = root.spawn(3)
    lightpaths, blocked = provision(graph, config, np.random.default_rng(route_seq))
    deployment = deploy_uniform(len(graph.slots), fraction=config.opm_fraction)
    base_seed = int(sample_seq.generate_state(1)[0])
    ctx = _Context(graph, lightpaths, deployment, config, base_seed)
    pre = ctx.observe(None, np.random.default_rng(pre_seq))
    if jobs > 1 and config.samples > 1:
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(ctx,)) as pool:
            results = list(pool.map(_work, range(config.samples), chunksize=32))
    else:
        results = [ctx.sample(i) for i in range(config.samples)]
    samples = [Sample(pre, post, scenario) for scenario, post in results]
    return Dataset(topology, graph, config, lightpaths, deployment, pre, samples, blocked)


def with_deployment(dataset: Dataset, deployment: Deployment) -> Dataset:
    """Re-mask a dataset generated at 100% OPM to a sparser deployment."""
    lp_masks = masks(dataset.lightpaths, deployment)

    def remask(snap):
        rows = []
        for row, mask in zip(snap.readings, lp_masks):
            new = row.copy()
            new[:-1] = np.where(mask, row[:-1], ALPHA)
            rows.append(new)
        return MonitorSnapshot(rows)

    pre = remask(dataset.pre)
    samples = [Sample(pre, remask(s.post), s.scenario) for s in dataset.samples]
    return replace(dataset, deployment=deployment, pre=pre, samples=samples)


# -- files ---------------------------------------------------------------------


def _dumps(doc) -> bytes:
    return json.dumps(doc, separators=(",", ":")).encode()


def write_json(path, doc) -> None:
    """Write-then-rename; ``.gz`` paths are gzip-compressed with a fixed mtime."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = _dumps(doc)
    if path.suffix == ".gz":
        buf = io.BytesIO()
        with gzip.GzipFile(fileobj=buf, mode="wb", mtime=0, filename="") as fh:
            fh.write(data)
        data = buf.getvalue()
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def read_json(path, what="artifact"):
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(path, what)
    data = path.read_bytes()
    if path.suffix == ".gz":
        data = gzip.decompress(data)
    return json.loads(data)


def save_dataset(dataset: Dataset, path) -> None:
    write_json(path, dataset.to_dict())


def load_dataset(path) -> Dataset:
    return Dataset.from_dict(read_json(path, "dataset"))
