"""Flat-file export and re-import of experiment runs.

A run directory holds

``config.csv``    ``key,value`` pairs of the scalar run settings;
``nodes.csv``     one row per node: phase offset, stream length, evaluation
                  start and normalisation range;
``messages.csv``  the message log;
``synopses.csv``  the synopsis carried by every message;
``trace.csv``     per-step decisions of the evaluation phase;
``metrics.csv``   the metrics of the run.

Floats are written with ``repr`` so files round-trip exactly.
"""

from __future__ import annotations

import csv
from dataclasses import replace
from pathlib import Path

import numpy as np

from .metrics import report, write_report
from .simulator import (
    FORCED,
    HOLD,
    VOLUNTARY,
    ExperimentRun,
    LogEntry,
    MessageLog,
    ModelCache,
    NodeInfo,
    SimConfig,
    SimulationError,
)

DECISION_NAMES = {HOLD: "hold", VOLUNTARY: "disseminate", FORCED: "forced"}
TRACE_HEADER = ["node_id", "step", "e_raw", "e_norm", "dod_p", "dod_f", "G", "decision"]
MESSAGE_HEADER = ["node_id", "step", "payload_length", "kind", "drift"]
NODE_HEADER = ["node_id", "offset", "n_vectors", "eval_start", "cal_min", "cal_max"]
_CONFIG_FIELDS = ("n_nodes", "epoch_length", "theta", "policy", "seed", "train_split", "dataset",
                  "max_steps", "max_records", "experiments", "window", "quantum_mode", "holt_alpha", "holt_beta")


def _num(v) -> str:
    v = float(v)
    return "" if np.isnan(v) else repr(v)


def _writer(path):
    fh = Path(path).open("w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def write_run(run: ExperimentRun, out_dir, cache: ModelCache | None = None) -> Path:
    """Write every file of a run directory; returns the directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = run.config

    fh, w = _writer(out / "config.csv")
    with fh:
        w.writerow(["key", "value"])
        for name in _CONFIG_FIELDS:
            value = getattr(cfg, name)
            w.writerow([name, "" if value is None else value])
        w.writerow(["experiment", run.experiment])

    fh, w = _writer(out / "nodes.csv")
    with fh:
        w.writerow(NODE_HEADER)
        for n in run.nodes:
            w.writerow([n.node_id, n.offset, n.n_vectors, n.eval_start, repr(n.cal_min), repr(n.cal_max)])

    fh, w = _writer(out / "messages.csv")
    with fh:
        w.writerow(MESSAGE_HEADER)
        for e in run.log.entries:
            w.writerow([e.node_id, e.step, e.payload_length, e.kind, repr(e.drift)])

    if cache is not None:
        trajectories = {n.node_id: cache.lane(cfg, run.experiment, n.node_id, False).trajectory for n in run.nodes}
        l = next(iter(trajectories.values())).shape[1]
        fh, w = _writer(out / "synopses.csv")
        with fh:
            w.writerow(["node_id", "step"] + [f"s{j + 1}" for j in range(l)])
            for e in run.log.entries:
                traj = trajectories[e.node_id]
                row = traj[min(e.step, len(traj)) - 1]
                w.writerow([e.node_id, e.step] + [repr(float(v)) for v in row])

    if run.trace is not None:
        tr = run.trace
        fh, w = _writer(out / "trace.csv")
        with fh:
            w.writerow(TRACE_HEADER)
            for i in range(len(tr.step)):
                w.writerow([
                    int(tr.node_id[i]), int(tr.step[i]), _num(tr.e_raw[i]), _num(tr.e_norm[i]),
                    _num(tr.dod_p[i]), _num(tr.dod_f[i]), _num(tr.G[i]), DECISION_NAMES[int(tr.decision[i])],
                ])

    write_report(report([run]), out / "metrics.csv")
    return out


def _read_rows(path: Path) -> list[dict[str, str]]:
    if not path.is_file():
        raise SimulationError(f"missing run file: {path}")
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def read_run(run_dir) -> ExperimentRun:
    """Rebuild the log and node table of a run directory (no trace)."""
    d = Path(run_dir)
    if not d.is_dir():
        raise SimulationError(f"run directory not found: {d}")
    raw = {r["key"]: r["value"] for r in _read_rows(d / "config.csv")}
    defaults = SimConfig()
    kw = {}
    for name in _CONFIG_FIELDS:
        value = raw.get(name, "")
        if value == "":
            continue
        kind = type(getattr(defaults, name)) if getattr(defaults, name) is not None else (
            str if name == "dataset" else int)
        kw[name] = kind(value)
    try:
        config = replace(defaults, **kw)
        experiment = int(raw.get("experiment", 0))
    except ValueError as exc:
        raise SimulationError(f"{d / 'config.csv'}: {exc}") from None
    nodes = [
        NodeInfo(int(r["node_id"]), int(r["offset"]), int(r["n_vectors"]), int(r["eval_start"]),
                 float(r["cal_min"]), float(r["cal_max"]))
        for r in _read_rows(d / "nodes.csv")
    ]
    log = MessageLog([
        LogEntry(int(r["node_id"]), int(r["step"]), int(r["payload_length"]), r["kind"], float(r["drift"]))
        for r in _read_rows(d / "messages.csv")
    ])
    return ExperimentRun(config, experiment, nodes, log)
