"""Command-line entry point: ``udsdm {ingest,train,run,compare,metrics}``."""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, apply_config
from .fuzzy import FuzzyConfigError
from .ingest import IngestError, build_streams, parse_dataset, synthesize_lab_file, write_clean_csv
from .lstm import TrainingDivergence, save_cell
from .metrics import MetricsError, report, write_comparison, write_plot_data, write_report
from .runio import read_run, write_run
from .simulator import (
    DEFAULT_T_VALUES,
    DEFAULT_THETAS,
    POLICIES,
    ModelCache,
    SimConfig,
    SimulationError,
    compare,
    run,
)

PROG = "udsdm"


class CliError(Exception):
    pass


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _list(kind):
    def parse(text):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None
    return parse


def _common(p: argparse.ArgumentParser, *, sim: bool = True) -> None:
    p.add_argument("--dataset", type=Path, required=True, help="sensor log (text) or node_id,v1..vd CSV")
    p.add_argument("--nodes", type=_positive_int, default=6, help="number of edge nodes N")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--max-records", type=_positive_int, default=None, help="use only the first accepted records")
    if sim:
        p.add_argument("--config", type=Path, default=None, help="key = value overrides (fuzzy, lstm, holt)")
        p.add_argument("--experiments", type=_positive_int, default=None, help="repetitions E")
        p.add_argument("--max-steps", type=_positive_int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description="Uncertainty-driven synopsis dissemination.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="clean the sensor log into per-node CSV")
    _common(p, sim=False)
    p.add_argument("--synthesize", action="store_true",
                   help="first write a synthetic log with the same layout to --dataset")
    p.add_argument("--synthetic-epochs", type=_positive_int, default=3000)

    p = sub.add_parser("train", help="train one LSTM per node and report its loss")
    _common(p)
    p.add_argument("--experiment", type=int, default=0)

    p = sub.add_parser("run", help="simulate one experiment and write its run directory")
    _common(p)
    p.add_argument("--epoch", type=_positive_int, default=100, help="update epoch T")
    p.add_argument("--theta", type=float, default=0.60)
    p.add_argument("--policy", choices=POLICIES, default="udsdm")
    p.add_argument("--experiment", type=int, default=0)
    p.add_argument("--name", default=None, help="run name (default derived from the settings)")

    p = sub.add_parser("compare", help="tabulate metrics over policies, thresholds and epochs")
    _common(p)
    p.add_argument("--epoch", type=_list(int), default=list(DEFAULT_T_VALUES), help="comma-separated T values")
    p.add_argument("--theta", type=_list(float), default=list(DEFAULT_THETAS), help="comma-separated thresholds")
    p.add_argument("--policy", type=_list(str), default=list(POLICIES), help="comma-separated policies")

    p = sub.add_parser("metrics", help="recompute metrics from a stored run directory")
    p.add_argument("--run", type=Path, required=True, help="run directory written by 'run'")
    p.add_argument("--out", type=Path, default=None, help="metrics CSV (default: print)")
    return parser


def _sim_config(args, **extra) -> SimConfig:
    cfg = SimConfig(
        n_nodes=args.nodes, seed=args.seed, dataset=str(args.dataset), max_records=args.max_records,
        max_steps=args.max_steps, **extra,
    )
    if args.config is not None:
        cfg = apply_config(cfg, args.config)
    if args.experiments is not None:
        cfg = replace(cfg, experiments=args.experiments)
    return cfg


def _check_dataset(path: Path) -> None:
    if not path.is_file():
        raise CliError(f"--dataset: file not found: {path}")


def cmd_ingest(args) -> None:
    if args.synthesize:
        args.dataset.parent.mkdir(parents=True, exist_ok=True)
        synthesize_lab_file(args.dataset, n_epochs=args.synthetic_epochs, seed=args.seed)
    _check_dataset(args.dataset)
    records, rejects = parse_dataset(args.dataset, args.max_records)
    streams = build_streams(records, args.nodes)
    args.out.mkdir(parents=True, exist_ok=True)
    write_clean_csv(streams, args.out / "clean.csv")
    with (args.out / "rejects.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["reason", "count"])
        for reason, count in rejects.as_dict().items():
            w.writerow([reason, count])
    print(f"accepted {len(records)} records, rejected {rejects.total}; "
          f"{len(streams)} node streams -> {args.out / 'clean.csv'}")


def cmd_train(args) -> None:
    _check_dataset(args.dataset)
    cfg = _sim_config(args)
    cache = ModelCache()
    models = args.out / "models"
    models.mkdir(parents=True, exist_ok=True)
    with (args.out / "train_report.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "final_loss", "cal_min", "cal_max", "model"])
        for node in range(cfg.n_nodes):
            lane = cache.lane(cfg, args.experiment, node, True)
            path = models / f"node_{node}.lstm"
            save_cell(lane.cell, path)
            w.writerow([node, repr(lane.train_loss), repr(lane.calibration.min), repr(lane.calibration.max), path.name])
            print(f"node {node}: loss {lane.train_loss:.6g} -> {path}")


def cmd_run(args) -> None:
    _check_dataset(args.dataset)
    cfg = _sim_config(args, epoch_length=args.epoch, theta=args.theta, policy=args.policy)
    cache = ModelCache()
    result = run(cfg, args.experiment, cache)
    name = args.name or f"{cfg.policy}_theta{cfg.theta:g}_T{cfg.epoch_length}_e{args.experiment}"
    out = write_run(result, args.out / "runs" / name, cache)
    rep = report([result])
    print(f"{name}: {len(result.log)} messages, phi={rep.phi:.4f} delta={rep.delta:.4f} psi={rep.psi:.2f} -> {out}")


def cmd_compare(args) -> None:
    _check_dataset(args.dataset)
    for p in args.policy:
        if p not in POLICIES:
            raise CliError(f"--policy: unknown policy {p!r} (choose from {', '.join(POLICIES)})")
    base = _sim_config(args)
    configs = [
        replace(base, policy=p, theta=th, epoch_length=T)
        for p in args.policy for th in args.theta for T in args.epoch
    ]
    rows = compare(configs)
    args.out.mkdir(parents=True, exist_ok=True)
    write_comparison(rows, args.out / "compare.csv")
    write_plot_data(rows, args.out)
    print(f"{len(rows)} rows -> {args.out / 'compare.csv'}")


def cmd_metrics(args) -> None:
    result = read_run(args.run)
    rep = report([result])
    if args.out is not None:
        write_report(rep, args.out)
    print(f"phi={rep.phi!r} delta={rep.delta!r} psi={rep.psi!r} "
          f"voluntary={rep.messages_voluntary} forced={rep.messages_forced}")


COMMANDS = {"ingest": cmd_ingest, "train": cmd_train, "run": cmd_run, "compare": cmd_compare, "metrics": cmd_metrics}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (CliError, ConfigError, FuzzyConfigError, IngestError, MetricsError, SimulationError,
            TrainingDivergence, ValueError, OSError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
