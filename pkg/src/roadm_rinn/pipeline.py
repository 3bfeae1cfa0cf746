"""Rules, ANN and RINN localization engines, training-pair builders and scoring."""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, LengthMismatch
from .mlp import FeatureIndex, MlpModel, TrainConfig, TrainReport, classify, train
from .monitoring import Dataset, Sample
from .physical import sample_failure_scenario
from .rules import (
    DEFAULT_WINDOW,
    Reasoner,
    SuspectPartition,
    ThresholdTable,
    collect_history,
    fit_thresholds,
)


def structural_l_max(dataset: Dataset) -> int:
    """Upper bound on lightpaths through any one component.

    A fiber carries at most one lightpath per wavelength and a local WSS at
    most one per transponder port, so the bound holds for every lightpath
    count on the same network and one model fits them all.
    """
    return max(dataset.config.wavelengths, dataset.topology.wss.n)


def calibrate(
    dataset: Dataset,
    window: int = DEFAULT_WINDOW,
    mode: str = "healthy",
    seed=None,
) -> ThresholdTable:
    """Fit thresholds from a simulated monitoring window.

    ``healthy``: the window is failure-free operation.  ``incidents``: every
    observation carries a failure drawn like the dataset's own.
    """
    rng = np.random.default_rng(seed)
    cfg = dataset.config
    scenarios = None
    if mode == "incidents":
        scenarios = [
            sample_failure_scenario(dataset.graph, dataset.lightpaths, cfg.n_f_set, cfg.type_filter, rng)
            for _ in range(window)
        ]
    elif mode != "healthy":
        raise ConfigError(f"unknown calibration mode {mode!r}")
    history = collect_history(
        dataset.graph, dataset.lightpaths, dataset.deployment, cfg.power_model, window, rng, scenarios
    )
    return fit_thresholds(dataset.graph, dataset.lightpaths, history, cfg.power_model)


@dataclass(frozen=True)
class LocalizationResult:
    predicted: frozenset[int]
    engine: str
    inference_time: float = 0.0


class Localizer:
    """Engines bound to one network state (lightpaths, deployment, thresholds)."""

    def __init__(
        self,
        dataset: Dataset,
        thresholds: ThresholdTable,
        rinn_model: MlpModel | None = None,
        ann_model: MlpModel | None = None,
        l_max: int | None = None,
    ):
        self.dataset = dataset
        self.thresholds = thresholds
        self.rinn_model = rinn_model
        self.ann_model = ann_model
        self.reasoner = Reasoner(dataset.graph, dataset.lightpaths, thresholds)
        self.l_max = l_max or structural_l_max(dataset)
        self.index = FeatureIndex(dataset.lightpaths, dataset.deployment, self.l_max)
        self.all = self.index.traversed
        self._all_plan = self.index.plan(self.all)

    def partition(self, sample: Sample) -> SuspectPartition:
        return self.reasoner.reason(sample.post)

    def _classify(self, model: MlpModel, components, sample: Sample, plan=None) -> frozenset[int]:
        if not components:
            return frozenset()
        x = self.index.features(components, sample.pre, sample.post, plan)
        return frozenset(c for c, hit in zip(components, classify(model, x)) if hit)

    def rinn(self, sample: Sample) -> LocalizationResult:
        t0 = time.perf_counter()
        part = self.partition(sample)
        extra = self._classify(self.rinn_model, sorted(part.suspect), sample)
        return LocalizationResult(part.faulty | extra, "rinn", time.perf_counter() - t0)

    def rules(self, sample: Sample, rng, p: float = 0.5) -> LocalizationResult:
        t0 = time.perf_counter()
        part = self.partition(sample)
        suspects = sorted(part.suspect)
        keep = rng.random(len(suspects)) < p
        picked = frozenset(c for c, k in zip(suspects, keep) if k)
        return LocalizationResult(part.faulty | picked, "rules", time.perf_counter() - t0)

    def ann(self, sample: Sample) -> LocalizationResult:
        t0 = time.perf_counter()
        predicted = self._classify(self.ann_model, self.all, sample, self._all_plan)
        return LocalizationResult(predicted, "ann", time.perf_counter() - t0)


def rinn_localize(sample: Sample, localizer: Localizer) -> LocalizationResult:
    return localizer.rinn(sample)


def rules_benchmark(sample: Sample, localizer: Localizer, rng, p: float = 0.5) -> LocalizationResult:
    return localizer.rules(sample, rng, p)


def ann_benchmark(sample: Sample, localizer: Localizer) -> LocalizationResult:
    return localizer.ann(sample)


# ---------------------------------------------------------------- training


@dataclass
class PairConfig:
    """How many healthy components accompany the faulty ones per sample (ANN)."""

    affected_normals: int = 8  # healthy components sharing a lightpath with a failure
    random_normals: int = 8
    # extra copies of every row with its lightpath tuples shuffled across the
    # l_max slots, so a fault signature is learned in every slot
    slot_shuffles: int = 1


def ann_pairs(localizer: Localizer, samples: list[Sample], rng, pairs: PairConfig | None = None):
    """Labeled (features, label) rows over all traversed components."""
    pairs = pairs or PairConfig()
    lps = localizer.dataset.lightpaths
    all_c = np.array(localizer.all)
    xs, ys = [], []
    for sample in samples:
        truth = sample.truth
        faulty = sorted(truth)
        touched = sorted(
            {c for lp in lps if truth.intersection(lp.components) for c in lp.components} - truth
        )
        chosen = list(faulty)
        if touched:
            k = min(pairs.affected_normals, len(touched))
            chosen += [touched[i] for i in rng.choice(len(touched), k, replace=False)]
        healthy = np.setdiff1d(all_c, chosen)
        k = min(pairs.random_normals, healthy.size)
        chosen += [int(c) for c in rng.choice(healthy, k, replace=False)]
        xs.append(localizer.index.features(chosen, sample.pre, sample.post))
        ys.append([c in truth for c in chosen])
    return _stack(xs, ys, localizer)


def rinn_pairs(localizer: Localizer, samples: list[Sample]):
    """One row per suspected-faulty component per sample."""
    xs, ys = [], []
    for sample in samples:
        suspects = sorted(localizer.partition(sample).suspect)
        if suspects:
            xs.append(localizer.index.features(suspects, sample.pre, sample.post))
            ys.append([c in sample.truth for c in suspects])
    return _stack(xs, ys, localizer)


def _stack(xs, ys, localizer):
    width = 6 * localizer.l_max
    if not xs:
        return np.zeros((0, width)), np.zeros(0)
    return np.vstack(xs), np.concatenate([np.asarray(y, dtype=float) for y in ys])


def shuffle_slots(x, y, l_max: int, rng, copies: int):
    """Append ``copies`` versions of (x, y) with tuple slots permuted per row."""
    if copies <= 0 or x.shape[0] == 0:
        return x, y
    n = x.shape[0]
    tuples = x.reshape(n, l_max, -1)
    xs, ys = [x], [y]
    for _ in range(copies):
        order = np.argsort(rng.random((n, l_max)), axis=1)
        xs.append(np.take_along_axis(tuples, order[:, :, None], axis=1).reshape(n, -1))
        ys.append(y)
    return np.vstack(xs), np.concatenate(ys)


def fit_model(x, y, l_max: int, config: TrainConfig | None = None, seed: int = 0) -> tuple[MlpModel, TrainReport]:
    config = config or TrainConfig()
    model = MlpModel.init(x.shape[1], l_max, config, seed)
    return train(model, x, y, config, seed)


def train_rinn(localizer: Localizer, samples, config=None, seed=0, rng=None, pairs=None):
    """Train on suspects; with no suspects anywhere, train on all-component pairs."""
    pairs = pairs or PairConfig()
    rng = np.random.default_rng(rng)
    x, y = rinn_pairs(localizer, samples)
    source = "suspects"
    if x.shape[0] == 0 or y.min() == y.max():
        x, y = ann_pairs(localizer, samples, rng, pairs)
        source = "all-components"
    x, y = shuffle_slots(x, y, localizer.l_max, rng, pairs.slot_shuffles)
    model, report = fit_model(x, y, localizer.l_max, config, seed)
    model.meta = {"engine": "rinn", "pairs": source, "rows": int(x.shape[0])}
    return model, report


def train_ann(localizer: Localizer, samples, config=None, seed=0, rng=None, pairs=None):
    pairs = pairs or PairConfig()
    rng = np.random.default_rng(rng)
    x, y = ann_pairs(localizer, samples, rng, pairs)
    x, y = shuffle_slots(x, y, localizer.l_max, rng, pairs.slot_shuffles)
    model, report = fit_model(x, y, localizer.l_max, config, seed)
    model.meta = {"engine": "ann", "pairs": "all-components", "rows": int(x.shape[0])}
    return model, report


# ---------------------------------------------------------------- scoring


@dataclass
class AccuracyReport:
    complete: float
    partial: float
    total: float
    count: int
    key: dict = field(default_factory=dict)


def score(results: list[LocalizationResult], truths: list[frozenset[int]], key: dict | None = None) -> AccuracyReport:
    """Exact-match and strict-partial-overlap rates.

    Single-failure samples never count as partial.
    """
    if len(results) != len(truths):
        raise LengthMismatch(f"{len(results)} results for {len(truths)} truths")
    complete = partial = 0
    for res, truth in zip(results, truths):
        predicted = res.predicted if isinstance(res, LocalizationResult) else frozenset(res)
        if predicted == truth:
            complete += 1
        elif len(truth) > 1 and predicted & truth:
            partial += 1
    n = len(truths)
    c = complete / n if n else 0.0
    p = partial / n if n else 0.0
    return AccuracyReport(c, p, (complete + partial) / n if n else 0.0, n, dict(key or {}))


def measure_inference(engine, samples) -> float:
    """Mean wall-clock seconds per sample for ``engine(sample)``."""
    if not samples:
        return 0.0
    engine(samples[0])  # warm-up
    t0 = time.perf_counter()
    for s in samples:
        engine(s)
    return (time.perf_counter() - t0) / len(samples)


@dataclass
class Evaluation:
    reports: dict[str, AccuracyReport]
    times: dict[str, float]
    suspect_ratio: float


def evaluate(
    localizer: Localizer,
    samples: list[Sample],
    engines=("rules", "ann", "rinn"),
    seed=0,
    key: dict | None = None,
    rules_p: float = 0.5,
) -> Evaluation:
    rng = np.random.default_rng(seed)
    truths = [s.truth for s in samples]
    reports, times = {}, {}
    ratios = [len(localizer.partition(s).suspect) / max(len(localizer.all), 1) for s in samples]
    for name in engines:
        if name == "rules":
            results = [localizer.rules(s, rng, rules_p) for s in samples]
        elif name == "ann":
            results = [localizer.ann(s) for s in samples]
        elif name == "rinn":
            results = [localizer.rinn(s) for s in samples]
        else:
            raise ConfigError(f"unknown engine {name!r}")
        reports[name] = score(results, truths, key)
        times[name] = float(np.mean([r.inference_time for r in results])) if results else 0.0
    return Evaluation(reports, times, float(np.mean(ratios)) if ratios else 0.0)


KEY_COLUMNS = ("opm_pct", "failures", "failure_type", "lps")
REPORT_COLUMNS = ("engine", *KEY_COLUMNS, "samples", "complete", "partial", "total", "suspect_ratio")
TIMING_COLUMNS = ("engine", *KEY_COLUMNS, "samples", "time_ms")


def _key_cells(key: dict) -> dict:
    return {
        "opm_pct": key.get("opm_pct", ""),
        "failures": key.get("failures", ""),
        "failure_type": key.get("failure_type") or "mixed",
        "lps": key.get("lps", ""),
    }


def report_rows(evaluation: Evaluation, key: dict) -> list[dict]:
    """Accuracy rows; free of wall-clock values so reruns are byte-identical."""
    return [
        {
            "engine": name,
            **_key_cells(key),
            "samples": rep.count,
            "complete": f"{rep.complete:.4f}",
            "partial": f"{rep.partial:.4f}",
            "total": f"{rep.total:.4f}",
            "suspect_ratio": f"{evaluation.suspect_ratio:.4f}",
        }
        for name, rep in evaluation.reports.items()
    ]


def timing_rows(evaluation: Evaluation, key: dict) -> list[dict]:
    return [
        {
            "engine": name,
            **_key_cells(key),
            "samples": evaluation.reports[name].count,
            "time_ms": f"{t * 1e3:.3f}",
        }
        for name, t in evaluation.times.items()
    ]


def format_rows(rows: list[dict], columns=REPORT_COLUMNS) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, columns, delimiter="\t", lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


__all__ = [
    "AccuracyReport",
    "Evaluation",
    "LocalizationResult",
    "Localizer",
    "PairConfig",
    "ann_benchmark",
    "ann_pairs",
    "calibrate",
    "evaluate",
    "fit_model",
    "format_rows",
    "measure_inference",
    "report_rows",
    "timing_rows",
    "rinn_localize",
    "rinn_pairs",
    "shuffle_slots",
    "rules_benchmark",
    "score",
    "structural_l_max",
    "train_ann",
    "train_rinn",
]
