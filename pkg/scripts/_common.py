"""Shared plumbing for the experiment scripts."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

from roadm_rinn.mlp import TrainConfig
from roadm_rinn.monitoring import DatasetConfig, generate_dataset
from roadm_rinn.physical import PowerModel
from roadm_rinn.pipeline import (
    REPORT_COLUMNS,
    TIMING_COLUMNS,
    Localizer,
    calibrate,
    evaluate,
    format_rows,
    report_rows,
    timing_rows,
    train_ann,
    train_rinn,
)
from roadm_rinn.topology import build_component_graph, default_topology_path, load_topology


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--topology", type=Path, default=None)
    p.add_argument("--train-samples", type=int, default=1000)
    p.add_argument("--test-samples", type=int, default=1000)
    p.add_argument("--lps", type=int, default=100)
    p.add_argument("--jitter", type=float, default=0.1, help="OPM jitter sigma, dB")
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("runs/experiments"))
    p.add_argument("--quick", action="store_true", help="200 train / 200 test samples, 30 epochs")
    return p


def parse(p: argparse.ArgumentParser) -> argparse.Namespace:
    args = p.parse_args()
    if args.quick:
        args.train_samples, args.test_samples, args.epochs = 200, 200, 30
    return args


@dataclass
class Network:
    topology: object
    graph: object
    jitter: float
    jobs: int = 1

    @classmethod
    def load(cls, args) -> "Network":
        topo = load_topology(args.topology or default_topology_path())
        return cls(topo, build_component_graph(topo), args.jitter, args.jobs)

    def dataset(self, *, opm, samples, lps, n_f_set=(1, 2, 3), type_filter=None, seed=0):
        cfg = DatasetConfig(
            lp_count=lps,
            samples=samples,
            n_f_set=tuple(n_f_set),
            opm_fraction=opm,
            type_filter=type_filter,
            power_model=PowerModel(jitter_sigma_db=self.jitter),
            seed=seed,
        )
        return generate_dataset(self.topology, cfg, self.graph, jobs=self.jobs)


@dataclass
class Models:
    ann: object
    rinn: object
    ann_losses: list
    rinn_losses: list


def train_models(dataset, epochs: int, seed: int) -> Models:
    loc = Localizer(dataset, calibrate(dataset, seed=seed))
    cfg = TrainConfig(epochs=epochs)
    ann, ra = train_ann(loc, dataset.samples, cfg, seed=seed, rng=seed + 1)
    rinn, rr = train_rinn(loc, dataset.samples, cfg, seed=seed, rng=seed + 1)
    return Models(ann, rinn, ra.epoch_losses, rr.epoch_losses)


def evaluate_models(dataset, models: Models, seed: int, key: dict):
    loc = Localizer(dataset, calibrate(dataset, seed=seed), models.rinn, models.ann)
    return evaluate(loc, dataset.samples, seed=seed, key=key)


class Table:
    """Accumulates report and timing rows and writes them as TSV."""

    def __init__(self, out: Path, name: str):
        self.out = out
        self.name = name
        self.rows: list[dict] = []
        self.timings: list[dict] = []

    def add(self, evaluation, key: dict) -> None:
        self.rows += report_rows(evaluation, key)
        self.timings += timing_rows(evaluation, key)
        for row in report_rows(evaluation, key):
            print("\t".join(str(row[c]) for c in REPORT_COLUMNS), file=sys.stderr, flush=True)

    def write(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / f"{self.name}.tsv").write_text(format_rows(self.rows))
        (self.out / f"{self.name}_timing.tsv").write_text(format_rows(self.timings, TIMING_COLUMNS))
        print(self.out / f"{self.name}.tsv")
