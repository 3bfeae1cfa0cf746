"""``roadm-rinn`` command line.

Artifacts live in one output directory (``--out``, else ``$ROADM_RINN_OUT``,
else ``./runs``) under names derived from the run configuration, so each
stage finds its inputs without extra flags:

    train_opm060.json.gz                   training dataset for a 60 % deployment
    test_opm060_f1-2-3_mixed_lps100.json.gz  test dataset
    <dataset stem>.thresholds.json         threshold table for that dataset
    model_rinn_opm060.json, model_ann_opm060.json, loss_opm060.tsv
    eval_<test stem>.tsv, timing_<test stem>.tsv, report.tsv

Every random stage draws its seed from the root seed and the stage name
(see :func:`stage_seed`), so stages can be rerun independently.
"""
from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .errors import ConfigError, MissingArtifact, RinnError
from .mlp import TrainConfig, load_model, save_model
from .monitoring import DatasetConfig, generate_dataset, load_dataset, save_dataset
from .physical import PowerModel
from .pipeline import (
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
from .rules import load_thresholds, save_thresholds
from .topology import CATEGORIES, build_component_graph, default_topology_path, load_topology, topology_stats

OUT_ENV = "ROADM_RINN_OUT"


def stage_seed(root: int, stage: str) -> int:
    """64-bit seed for one pipeline stage: first 8 bytes of sha256("<root>/<stage>")."""
    digest = hashlib.sha256(f"{root}/{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def parse_failures(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"--failures expects comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise ConfigError(f"--failures needs positive counts, got {text!r}")
    return values


@dataclass(frozen=True)
class RunConfig:
    topology: Path
    seed: int = 0
    opm_fraction: float = 1.0
    lp_count: int = 100
    train_samples: int = 1000
    test_samples: int = 1000
    n_f_set: tuple[int, ...] = (1, 2, 3)
    type_filter: str | None = None
    out: Path = Path("runs")
    jitter: float = 0.1
    train_lp_count: int = 100
    train_n_f_set: tuple[int, ...] = (1, 2, 3)
    jobs: int = 1

    def __post_init__(self):
        if not 0 < self.opm_fraction <= 1:
            raise ConfigError(f"--opm-fraction must lie in (0, 1], got {self.opm_fraction}")
        for name in ("lp_count", "train_lp_count"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("train_samples", "test_samples"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.type_filter is not None and self.type_filter not in CATEGORIES:
            raise ConfigError(f"--failure-type must be one of {', '.join(CATEGORIES)}")
        if self.jitter < 0:
            raise ConfigError("--jitter must be >= 0")
        if self.jobs < 1:
            raise ConfigError("--jobs must be >= 1")

    @property
    def opm_pct(self) -> int:
        return int(round(self.opm_fraction * 100))

    @property
    def train_stem(self) -> str:
        return f"train_opm{self.opm_pct:03d}"

    @property
    def test_stem(self) -> str:
        fs = "-".join(str(v) for v in self.n_f_set)
        return f"test_opm{self.opm_pct:03d}_f{fs}_{self.type_filter or 'mixed'}_lps{self.lp_count}"

    def dataset_path(self, split: str) -> Path:
        return self.out / f"{self.train_stem if split == 'train' else self.test_stem}.json.gz"

    def thresholds_path(self, split: str) -> Path:
        return self.out / f"{self.train_stem if split == 'train' else self.test_stem}.thresholds.json"

    def model_path(self, engine: str) -> Path:
        return self.out / f"model_{engine}_opm{self.opm_pct:03d}.json"

    def dataset_config(self, split: str) -> DatasetConfig:
        model = PowerModel(jitter_sigma_db=self.jitter)
        if split == "train":
            # the training set depends only on the deployment, so one model
            # serves every failure-count/type/lightpath-count test variant
            return DatasetConfig(
                lp_count=self.train_lp_count,
                samples=self.train_samples,
                n_f_set=self.train_n_f_set,
                opm_fraction=self.opm_fraction,
                power_model=model,
                seed=stage_seed(self.seed, f"dataset/train/opm{self.opm_pct}"),
            )
        return DatasetConfig(
            lp_count=self.lp_count,
            samples=self.test_samples,
            n_f_set=self.n_f_set,
            opm_fraction=self.opm_fraction,
            type_filter=self.type_filter,
            power_model=model,
            seed=stage_seed(self.seed, f"dataset/{self.test_stem}"),
        )

    def key(self) -> dict:
        return {
            "opm_pct": self.opm_pct,
            "failures": ",".join(str(v) for v in self.n_f_set),
            "failure_type": self.type_filter,
            "lps": self.lp_count,
        }


def _say(text: str) -> None:
    print(text, flush=True)


def cmd_topo_stats(args) -> int:
    topo = load_topology(args.topology)
    stats = topology_stats(topo)
    names = {n.id: n.name for n in topo.nodes}
    _say(f"nodes\t{len(topo.nodes)}")
    _say(f"links\t{len(topo.links)}")
    _say("node\tname\tline_degree\tlambda\tdegree")
    for row in stats["nodes"]:
        _say(f"{row['node']}\t{names[row['node']]}\t{row['line_degree']}\t{row['lambda']}\t{row['degree']}")
    for k in ("C_node", "C_link", "C", "M_node", "M_link", "M"):
        _say(f"{k}\t{stats[k]}")
    return 0


def cmd_generate(args, cfg: RunConfig) -> int:
    topo = load_topology(cfg.topology)
    graph = build_component_graph(topo)
    splits = ("train", "test") if args.split == "both" else (args.split,)
    for split in splits:
        dataset = generate_dataset(topo, cfg.dataset_config(split), graph=graph, jobs=cfg.jobs)
        path = cfg.dataset_path(split)
        save_dataset(dataset, path)
        _say(
            f"{split}\t{path}\tlightpaths={len(dataset.lightpaths)}\tblocked={dataset.blocked}"
            f"\tsamples={len(dataset.samples)}\topms={dataset.deployment.count}/{dataset.deployment.total}"
        )
    return 0


def cmd_fit(args, cfg: RunConfig) -> int:
    splits = ("train", "test") if args.split == "both" else (args.split,)
    for split in splits:
        dataset = load_dataset(cfg.dataset_path(split))
        stem = cfg.train_stem if split == "train" else cfg.test_stem
        table = calibrate(dataset, args.window, args.calibration, stage_seed(cfg.seed, f"fit/{stem}"))
        save_thresholds(table, cfg.thresholds_path(split))
        fitted = sum(int(f.sum()) for f in table.fitted)
        total = sum(len(f) for f in table.fitted)
        _say(f"{split}\t{cfg.thresholds_path(split)}\tfitted={fitted}/{total}")
    return 0


def cmd_train(args, cfg: RunConfig) -> int:
    dataset = load_dataset(cfg.dataset_path("train"))
    thresholds = load_thresholds(cfg.thresholds_path("train"))
    localizer = Localizer(dataset, thresholds)
    tc = TrainConfig(learning_rate=args.learning_rate, epochs=args.epochs, batch_size=args.batch_size)
    losses = {}
    for engine, fn in (("rinn", train_rinn), ("ann", train_ann)):
        model, report = fn(
            localizer,
            dataset.samples,
            tc,
            seed=stage_seed(cfg.seed, f"train/{engine}/opm{cfg.opm_pct}") % 2**32,
            rng=stage_seed(cfg.seed, f"pairs/{engine}/opm{cfg.opm_pct}"),
        )
        model.meta["opm_pct"] = cfg.opm_pct
        save_model(model, cfg.model_path(engine))
        losses[engine] = report.epoch_losses
        _say(f"{engine}\t{cfg.model_path(engine)}\trows={model.meta['rows']}\tfinal_loss={report.final_loss:.6f}")
    lines = ["epoch\trinn_loss\tann_loss"]
    for e, (a, b) in enumerate(zip(losses["rinn"], losses["ann"]), start=1):
        lines.append(f"{e}\t{a:.8f}\t{b:.8f}")
    _write_text(cfg.out / f"loss_opm{cfg.opm_pct:03d}.tsv", "\n".join(lines) + "\n")
    return 0


def cmd_eval(args, cfg: RunConfig) -> int:
    dataset = load_dataset(cfg.dataset_path("test"))
    thresholds = load_thresholds(cfg.thresholds_path("test"))
    rinn = load_model(cfg.model_path("rinn"))
    ann = load_model(cfg.model_path("ann"))
    localizer = Localizer(dataset, thresholds, rinn, ann, l_max=rinn.l_max)
    evaluation = evaluate(
        localizer, dataset.samples, seed=stage_seed(cfg.seed, f"eval/{cfg.test_stem}"), rules_p=args.rules_p
    )
    rows = report_rows(evaluation, cfg.key())
    text = format_rows(rows)
    _write_text(cfg.out / f"eval_{cfg.test_stem}.tsv", text)
    _write_text(
        cfg.out / f"timing_{cfg.test_stem}.tsv",
        format_rows(timing_rows(evaluation, cfg.key()), TIMING_COLUMNS),
    )
    sys.stdout.write(text)
    return 0


def cmd_report(args, cfg: RunConfig) -> int:
    files = sorted(cfg.out.glob("eval_*.tsv"))
    if not files:
        raise MissingArtifact(cfg.out / "eval_*.tsv", "evaluation rows")
    header = "\t".join(REPORT_COLUMNS)
    body = []
    for path in files:
        lines = path.read_text().splitlines()
        if not lines or lines[0] != header:
            raise ConfigError(f"{path}: unexpected header")
        body += lines[1:]
    text = header + "\n" + "".join(line + "\n" for line in body)
    _write_text(cfg.out / "report.tsv", text)
    sys.stdout.write(text)
    return 0


def cmd_all(args, cfg: RunConfig) -> int:
    for step in (cmd_generate, cmd_fit):
        step(args, cfg)
    cmd_train(args, cfg)
    cmd_eval(args, cfg)
    return 0


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    return value / 100 if value > 1 else value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--topology", type=Path, default=None, help="topology JSON (default: bundled Japan-like network)")
    common.add_argument("--seed", type=int, default=0, help="root seed")
    common.add_argument(
        "--opm-fraction", type=_fraction, default=1.0, help="deployed OPM share, 0-1 or percent (default 1.0)"
    )
    common.add_argument("--lps", type=int, default=100, help="lightpaths in the test network")
    common.add_argument("--train-lps", type=int, default=100, help="lightpaths in the training network")
    common.add_argument("--train-samples", type=int, default=1000)
    common.add_argument("--test-samples", type=int, default=1000)
    common.add_argument("--failures", default="1,2,3", help='test failure counts, e.g. "1" or "1,2,3"')
    common.add_argument("--train-failures", default="1,2,3", help="training failure counts")
    common.add_argument("--failure-type", choices=CATEGORIES, default=None, help="restrict test failures to one category")
    common.add_argument("--jitter", type=float, default=0.1, help="OPM reading jitter sigma, dB")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for generate")
    common.add_argument("--out", type=Path, default=None, help=f"output directory (default: ${OUT_ENV} or ./runs)")

    parser = argparse.ArgumentParser(prog="roadm-rinn", description="Multi-failure localization in ROADM networks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("topo-stats", help="print degrees and component / OPM-location counts")
    p.add_argument("--topology", type=Path, default=None)
    p.set_defaults(func=cmd_topo_stats, needs_config=False)

    split = argparse.ArgumentParser(add_help=False)
    split.add_argument("--split", choices=("train", "test", "both"), default="both")

    fit = argparse.ArgumentParser(add_help=False)
    fit.add_argument("--window", type=int, default=50, help="monitoring window |T|")
    fit.add_argument("--calibration", choices=("healthy", "incidents"), default="healthy")

    train = argparse.ArgumentParser(add_help=False)
    train.add_argument("--epochs", type=int, default=100)
    train.add_argument("--learning-rate", type=float, default=1e-4)
    train.add_argument("--batch-size", type=int, default=32, help="0 for full batch")

    ev = argparse.ArgumentParser(add_help=False)
    ev.add_argument("--rules-p", type=float, default=0.5, help="suspect inclusion probability of the Rules baseline")

    for name, func, parents, text in (
        ("generate", cmd_generate, [common, split], "simulate training and/or test datasets"),
        ("fit", cmd_fit, [common, split, fit], "fit threshold tables"),
        ("train", cmd_train, [common, train], "train the RINN and ANN models"),
        ("eval", cmd_eval, [common, ev], "score Rules, ANN and RINN on the test dataset"),
        ("report", cmd_report, [common], "collect evaluation rows into report.tsv"),
        ("all", cmd_all, [common, split, fit, train, ev], "generate, fit, train and eval in one go"),
    ):
        p = sub.add_parser(name, parents=parents, help=text)
        p.set_defaults(func=func, needs_config=True)
    return parser


def config_from_args(args) -> RunConfig:
    out = args.out or Path(os.environ.get(OUT_ENV) or "runs")
    return RunConfig(
        topology=args.topology or default_topology_path(),
        seed=args.seed,
        opm_fraction=args.opm_fraction,
        lp_count=args.lps,
        train_samples=args.train_samples,
        test_samples=args.test_samples,
        n_f_set=parse_failures(args.failures),
        type_filter=args.failure_type,
        out=out,
        jitter=args.jitter,
        train_lp_count=args.train_lps,
        train_n_f_set=parse_failures(args.train_failures),
        jobs=args.jobs,
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if not args.needs_config:
            args.topology = args.topology or default_topology_path()
            return args.func(args)
        cfg = config_from_args(args)
        if args.command == "all":
            args.split = "both"
        return args.func(args, cfg)
    except RinnError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        print("error: Interrupted: interrupted", file=sys.stderr)
        return 130
    except Exception as exc:  # noqa: BLE001  the CLI contract is one error line
        print(f"error: {type(exc).__name__}: {' '.join(str(exc).split())}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["RunConfig", "build_parser", "main", "stage_seed"]
