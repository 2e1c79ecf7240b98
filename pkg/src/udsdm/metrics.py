"""Decision-time, drift and frequency metrics.

* ``phi``   mean of ``t*/T``. A node's epoch starts at its last
  dissemination and ends at the next one, which the forced rule places at
  most ``T`` steps later, so ``t*`` is the gap between consecutive stops.
* ``delta`` mean L1 distance between the synopsis sent at a stop and the
  previously sent synopsis.
* ``psi``   ``T`` divided by the number of stops in a fixed audit window
  ``(offset + (k-1) T, offset + k T]``.

Each is averaged within an experiment (over nodes and epochs or windows)
and then across experiments. Only the evaluation part of each stream
counts.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class MetricsError(ValueError):
    pass


def compute_phi(stops: Sequence[Sequence[int]], T: int) -> float:
    """Mean normalised decision time over experiments.

    Args:
        stops: per experiment, the ``t*`` of each epoch (``1 <= t* <= T``).
        T: epoch length.
    """
    if not stops or any(len(s) == 0 for s in stops):
        raise MetricsError("phi needs at least one stop per experiment")
    per_exp = []
    for s in stops:
        s = np.asarray(s, dtype=float)
        if np.any((s < 1) | (s > T)):
            raise MetricsError("t* must lie in [1, T]")
        per_exp.append(float(np.mean(s / T)))
    return float(np.mean(per_exp))


def compute_delta(pairs: Sequence[Sequence[tuple]]) -> float:
    """Mean L1 distance between synopses at decision time and the last sent ones.

    ``pairs`` holds, per experiment, ``(synopsis_at_stop, last_sent)`` pairs.
    """
    if not pairs or any(len(p) == 0 for p in pairs):
        raise MetricsError("delta needs at least one synopsis pair per experiment")
    per_exp = []
    for exp in pairs:
        dists = []
        for current, last in exp:
            a, b = np.asarray(current, dtype=float), np.asarray(last, dtype=float)
            if a.shape != b.shape:
                raise MetricsError("synopsis pair has mismatched lengths")
            dists.append(float(np.abs(a - b).sum()))
        per_exp.append(float(np.mean(dists)))
    return float(np.mean(per_exp))


def compute_psi(T: int, stop_count: int) -> float:
    if stop_count < 1:
        raise MetricsError("psi needs at least one stop in the window")
    return T / stop_count


@dataclass(frozen=True)
class WindowDetail:
    experiment: int
    node_id: int
    window_start: int
    first_stop: int  # offset of the first stop from the window start
    stops: int
    voluntary: int
    forced: int
    mean_drift: float


@dataclass
class MetricsReport:
    phi: float
    delta: float
    psi: float
    T: int
    experiments: int
    messages_voluntary: int
    messages_forced: int
    details: list[WindowDetail] = field(default_factory=list)


def window_details(run) -> list[WindowDetail]:
    """Per evaluation window of every node: first stop, stop count, drift."""
    T = run.config.epoch_length
    by_node: dict[int, list] = {}
    for e in run.log.entries:
        by_node.setdefault(e.node_id, []).append(e)
    out = []
    for info in run.nodes:
        entries = by_node.get(info.node_id, [])
        steps = np.array([e.step for e in entries], dtype=int)
        for start in info.eval_windows(T):
            lo = np.searchsorted(steps, start, side="right")
            hi = np.searchsorted(steps, start + T, side="right")
            inside = entries[lo:hi]
            if not inside:
                raise MetricsError(
                    f"experiment {run.experiment} node {info.node_id}: no stop in window ({start}, {start + T}]"
                )
            out.append(
                WindowDetail(
                    run.experiment, info.node_id, start, inside[0].step - start, len(inside),
                    sum(e.kind == "voluntary" for e in inside), sum(e.kind == "forced" for e in inside),
                    float(np.mean([e.drift for e in inside])),
                )
            )
    return out


def decision_times(run) -> list[int]:
    """``t*`` of every evaluation epoch of every node.

    An epoch opens at a stop at or after the node's evaluation start and
    closes at the next stop, as long as that stop still has data behind it.
    """
    by_node: dict[int, list[int]] = {}
    for e in run.log.entries:
        by_node.setdefault(e.node_id, []).append(e.step)
    out = []
    for info in run.nodes:
        steps = by_node.get(info.node_id, [])
        for prev, cur in zip(steps, steps[1:]):
            if prev >= info.eval_start and cur <= info.n_vectors:
                out.append(cur - prev)
    return out


def report(runs) -> MetricsReport:
    """Aggregate metrics over the evaluation part of several experiments."""
    runs = list(runs)
    if not runs:
        raise MetricsError("no runs to report on")
    T = runs[0].config.epoch_length
    details, stops, drifts, psis = [], [], [], []
    for r in runs:
        d = window_details(r)
        if not d:
            raise MetricsError(f"experiment {r.experiment}: no complete evaluation window for T={T}")
        details.extend(d)
        t_star = decision_times(r)
        if not t_star:
            raise MetricsError(f"experiment {r.experiment}: no complete evaluation epoch for T={T}")
        stops.append(t_star)
        drifts.append(float(np.sum([w.mean_drift * w.stops for w in d]) / np.sum([w.stops for w in d])))
        psis.append(float(np.mean([compute_psi(T, w.stops) for w in d])))
    return MetricsReport(
        phi=compute_phi(stops, T),
        delta=float(np.mean(drifts)),
        psi=float(np.mean(psis)),
        T=T,
        experiments=len(runs),
        messages_voluntary=sum(w.voluntary for w in details),
        messages_forced=sum(w.forced for w in details),
        details=details,
    )


@dataclass
class ComparisonRow:
    policy: str
    theta: float
    T: int
    phi: float
    delta: float
    psi: float
    messages_voluntary: int
    messages_forced: int
    dod_p_mean: float | None = None
    dod_f_mean: float | None = None

    @classmethod
    def from_runs(cls, config, runs, rep: MetricsReport) -> "ComparisonRow":
        dod_p = dod_f = None
        if config.policy == "udsdm":
            p = np.concatenate([r.trace.dod_p for r in runs if r.trace is not None])
            f = np.concatenate([r.trace.dod_f for r in runs if r.trace is not None])
            p, f = p[~np.isnan(p)], f[~np.isnan(f)]
            dod_p = float(p.mean()) if p.size else None
            dod_f = float(f.mean()) if f.size else None
        return cls(config.policy, config.theta, config.epoch_length, rep.phi, rep.delta, rep.psi,
                   rep.messages_voluntary, rep.messages_forced, dod_p, dod_f)


COMPARE_HEADER = ["policy", "theta", "T", "phi", "delta", "psi", "messages_voluntary", "messages_forced",
                  "dod_p_mean", "dod_f_mean"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_comparison(rows: Sequence[ComparisonRow], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARE_HEADER)
        for r in rows:
            w.writerow([_fmt(getattr(r, k)) for k in COMPARE_HEADER])


def write_plot_data(rows: Sequence[ComparisonRow], out_dir) -> list[Path]:
    """One ``series,x,y`` file per metric: x = T, one series per policy/theta."""
    out_dir = Path(out_dir)
    paths = []
    for metric in ("phi", "delta", "psi"):
        path = out_dir / f"plot_{metric}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["series", "x", "y"])
            for r in rows:
                w.writerow([f"{r.policy}@theta={r.theta:g}", r.T, repr(float(getattr(r, metric)))])
        paths.append(path)
    return paths


def write_report(rep: MetricsReport, path) -> None:
    """``metrics.csv``: summary line, then one row per evaluation window."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phi", "delta", "psi", "T", "experiments", "messages_voluntary", "messages_forced"])
        w.writerow([repr(rep.phi), repr(rep.delta), repr(rep.psi), rep.T, rep.experiments,
                    rep.messages_voluntary, rep.messages_forced])
        w.writerow([])
        w.writerow(["experiment", "node_id", "window_start", "first_stop", "stops", "voluntary", "forced",
                    "mean_drift"])
        for d in rep.details:
            w.writerow([d.experiment, d.node_id, d.window_start, d.first_stop, d.stops, d.voluntary, d.forced,
                        repr(d.mean_drift)])
