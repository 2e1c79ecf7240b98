"""Lockstep replay of edge nodes over their sensor streams.

Every node owns one stream. At global step ``t`` each node reads its
``t``-th vector (if any), updates its synopsis, computes its update
quantum and applies its policy. The first ``train_split`` of each stream is
the node's history: during it the node only performs forced
disseminations, and the last half of it is profiled to calibrate the
quanta scale and train the node's LSTM. Metrics only cover evaluation
windows.

Quanta profile: the history is replayed with the reference synopsis reset
every ``window`` steps, giving a series of short accumulation ramps that
does not depend on ``T``, ``theta`` or the policy under test. Its min and
max define the normalisation and the normalised series trains the LSTM.

A run with several experiments (``compare``) advances all
``experiments x nodes`` lanes together; each lane's arithmetic does not
depend on the other lanes, so a lane produces the same log whether it is
simulated alone or in a batch.
"""

from __future__ import annotations

import functools
import hashlib
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .decision import phase_offset
from .fuzzy import FuzzySystem
from .ingest import NodeStream, build_streams, parse_dataset, read_csv_streams
from .lstm import LstmCell, TrainConfig, forecast3, sliding_windows, stack_cells, train, window_loss
from .synopsis import NormalizationCalibration, synopsis_trajectory

POLICIES = ("bm", "pm", "udsdm")
DEFAULT_T_VALUES = (100, 500, 1000)
DEFAULT_THETAS = (0.60, 0.75)
HOLD, VOLUNTARY, FORCED = 0, 1, 2
KIND_NAMES = {VOLUNTARY: "voluntary", FORCED: "forced"}


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    n_nodes: int = 6
    epoch_length: int = 100
    theta: float = 0.60
    policy: str = "udsdm"
    seed: int = 0
    train_split: float = 0.5
    dataset: str | None = None
    max_steps: int | None = None
    max_records: int | None = None
    experiments: int = 10
    window: int = 10
    quantum_mode: str = "since_last"
    holt_alpha: float = 0.5
    holt_beta: float = 0.5
    lstm: TrainConfig = field(default_factory=TrainConfig)
    fuzzy: FuzzySystem = field(default_factory=FuzzySystem, compare=False)

    def __post_init__(self):
        if self.n_nodes < 1:
            raise SimulationError("n_nodes must be >= 1")
        if self.epoch_length <= 0:
            raise SimulationError("epoch length T must be positive")
        if not 0.0 < self.theta <= 1.0:
            raise SimulationError("theta must be in (0, 1]")
        if self.policy not in POLICIES:
            raise SimulationError(f"policy must be one of {POLICIES}")
        if not 0.0 < self.train_split < 1.0:
            raise SimulationError("train_split must be in (0, 1)")
        if self.experiments < 1:
            raise SimulationError("experiments must be >= 1")
        if self.window < 3:
            raise SimulationError("window must be >= 3")
        if self.quantum_mode not in ("since_last", "consecutive"):
            raise SimulationError("quantum_mode must be 'since_last' or 'consecutive'")

    def data_key(self) -> tuple:
        return (self.dataset, self.max_records, self.n_nodes)

    def model_key(self) -> tuple:
        return (self.data_key(), self.seed, self.train_split, self.window, self.lstm, self.quantum_mode)


@dataclass(frozen=True)
class LogEntry:
    node_id: int
    step: int
    payload_length: int
    kind: str
    drift: float


@dataclass
class MessageLog:
    entries: list[LogEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def for_node(self, node_id: int) -> list[LogEntry]:
        return [e for e in self.entries if e.node_id == node_id]

    def digest(self) -> str:
        h = hashlib.sha256()
        for e in self.entries:
            h.update(f"{e.node_id},{e.step},{e.payload_length},{e.kind},{e.drift!r}\n".encode())
        return h.hexdigest()


@dataclass(frozen=True)
class NodeInfo:
    node_id: int
    offset: int
    n_vectors: int
    eval_start: int
    cal_min: float
    cal_max: float

    def eval_windows(self, T: int) -> list[int]:
        """Starts (exclusive) of the grid windows lying fully inside evaluation data."""
        first = self.offset + max(0, -((self.offset - self.eval_start) // T)) * T
        return list(range(first, self.n_vectors - T + 1, T))


@dataclass
class Trace:
    """Per-step decision records of the evaluation phase (column arrays)."""

    node_id: np.ndarray
    step: np.ndarray
    e_raw: np.ndarray
    e_norm: np.ndarray
    dod_p: np.ndarray
    dod_f: np.ndarray
    G: np.ndarray
    decision: np.ndarray


@dataclass
class ExperimentRun:
    config: SimConfig
    experiment: int
    nodes: list[NodeInfo]
    log: MessageLog
    trace: Trace | None = None
    duration_s: float = 0.0

    def stops(self, node_id: int) -> list[int]:
        return [e.step for e in self.log.entries if e.node_id == node_id]


# --- data and model preparation ---------------------------------------------------


@functools.lru_cache(maxsize=4)
def _records(path: str, mtime: float, limit: int | None):
    records, rejects = parse_dataset(path, limit)
    return records, rejects


def load_streams(config: SimConfig, experiment: int = 0) -> list[NodeStream]:
    """Node streams for one experiment; experiments rotate the mote grouping."""
    if config.dataset is None:
        raise SimulationError("no dataset configured")
    path = Path(config.dataset)
    if not path.exists():
        raise SimulationError(f"dataset not found: {path}")
    if path.suffix.lower() == ".csv":
        streams = read_csv_streams(path)
        if len(streams) < config.n_nodes:
            raise SimulationError(f"dataset has {len(streams)} nodes, config asks for {config.n_nodes}")
        streams = streams[: config.n_nodes]
    else:
        records, _ = _records(str(path), path.stat().st_mtime, config.max_records)
        streams = build_streams(records, config.n_nodes, rotation=experiment)
    for s in streams:
        if len(s) == 0:
            raise SimulationError(f"node {s.node_id} has an empty stream")
    return streams


def lane_seed(seed: int, experiment: int, node: int) -> int:
    return int(np.random.SeedSequence([seed, experiment, node]).generate_state(1)[0])


def quanta_profile(trajectory: np.ndarray, n_train: int, window: int, mode: str = "since_last") -> list[np.ndarray]:
    """Raw quanta over the second half of the history, as reset-free segments.

    ``since_last``: distance to a reference synopsis reset every ``window``
    steps, one segment per reset; ``consecutive``: distance between
    neighbouring synopses, a single segment.
    """
    start = n_train // 2
    seg = trajectory[start:n_train]
    if len(seg) < 2:
        raise SimulationError("history too short to profile update quanta")
    if mode == "consecutive":
        return [np.abs(np.diff(seg, axis=0)).sum(axis=1)]
    out = []
    for r in range(0, len(seg) - 1, window):
        block = seg[r + 1 : r + 1 + window]
        out.append(np.abs(block - seg[r]).sum(axis=1))
    return out


@dataclass
class LaneModel:
    trajectory: np.ndarray
    n_train: int
    calibration: NormalizationCalibration
    cell: LstmCell | None
    train_loss: float | None = None


class ModelCache:
    """Streams, synopsis trajectories and trained cells, shared across configs.

    None of these depend on ``T``, ``theta`` or the policy, so a comparison
    prepares each node once.
    """

    def __init__(self):
        self._streams: dict = {}
        self._lanes: dict = {}

    def streams(self, config: SimConfig, experiment: int) -> list[NodeStream]:
        rotation = experiment % config.n_nodes
        key = (config.data_key(), rotation)
        if key not in self._streams:
            streams = load_streams(config, rotation)
            self._streams[key] = (streams, [synopsis_trajectory(s.vectors) for s in streams])
        return self._streams[key]

    def lane(self, config: SimConfig, experiment: int, node: int, need_cell: bool) -> LaneModel:
        key = (config.model_key(), experiment, node)
        model = self._lanes.get(key)
        if model is not None and (model.cell is not None or not need_cell):
            return model
        streams, trajectories = self.streams(config, experiment)
        traj = trajectories[node]
        n_train = int(len(traj) * config.train_split)
        profile = quanta_profile(traj, n_train, config.window, config.quantum_mode)
        cal = NormalizationCalibration.fit(np.concatenate(profile))
        cell = loss = None
        if need_cell:
            # the engine forgets its quanta on every send, so the cell only
            # ever sees windows inside one accumulation segment
            series = [cal.apply(p) for p in profile]
            cfg = replace(config.lstm, seed=lane_seed(config.seed, experiment, node))
            if max(len(p) for p in series) < cfg.window_length:
                raise SimulationError(f"node {node}: quanta series shorter than the LSTM window")
            cell = train(series, cfg)
            loss = window_loss(cell, sliding_windows(series, cfg.window_length, cfg.max_windows))
        model = LaneModel(traj, n_train, cal, cell, loss)
        self._lanes[key] = model
        return model


# --- batched simulation -----------------------------------------------------


def _simulate(config: SimConfig, lanes: list[tuple[int, int]], cache: ModelCache, record_trace: bool):
    """Simulate ``(experiment, node)`` lanes under one policy/theta/T."""
    T = config.epoch_length
    theta = config.theta
    policy = config.policy
    models = [cache.lane(config, e, n, policy == "udsdm") for e, n in lanes]
    B = len(lanes)
    lengths = np.array([len(m.trajectory) for m in models])
    n_train = np.array([m.n_train for m in models])
    offsets = np.array([phase_offset(n, T, config.n_nodes) for _, n in lanes])
    l = models[0].trajectory.shape[1]
    S = int(lengths.max()) if config.max_steps is None else min(int(lengths.max()), config.max_steps)
    traj = np.zeros((B, int(lengths.max()), l))
    for i, m in enumerate(models):
        traj[i, : len(m.trajectory)] = m.trajectory
    cal_min = np.array([m.calibration.min for m in models])
    cal_span = np.array([m.calibration.max - m.calibration.min for m in models])
    cells = stack_cells([m.cell for m in models]) if policy == "udsdm" else None
    fls = config.fuzzy
    lane_idx = np.arange(B)

    last_vals = np.zeros((B, l))
    prev_vals = np.zeros((B, l))
    last_step = np.where(offsets > 0, offsets - T, 0)
    qcount = np.zeros(B, dtype=int)
    hist = np.zeros((B, 3))
    h_level = np.zeros(B)
    h_trend = np.zeros(B)
    h_seen = np.zeros(B, dtype=int)
    alpha, beta = config.holt_alpha, config.holt_beta

    log_rows: list[tuple[int, int, int, float]] = []  # lane, step, kind, drift
    trace_cols: dict[str, list] = {k: [] for k in ("lane", "step", "e_raw", "e_norm", "dod_p", "dod_f", "G", "decision")}

    for t in range(1, S + 1):
        has_data = t <= lengths
        cur = traj[lane_idx, np.minimum(t, lengths) - 1]
        ref = prev_vals if config.quantum_mode == "consecutive" else last_vals
        raw = np.abs(cur - ref).sum(axis=1)
        norm = np.clip((raw - cal_min) / cal_span, 0.0, 1.0)
        prev_vals = cur

        qcount = qcount + has_data
        hist = np.where(has_data[:, None], np.concatenate([hist[:, 1:], norm[:, None]], axis=1), hist)
        evaluating = has_data & (t > n_train)

        voluntary = np.zeros(B, dtype=bool)
        dod_p = dod_f = G = None
        if policy == "bm":
            voluntary = evaluating & (raw > 0)
        elif policy == "pm":
            first = has_data & (h_seen == 0)
            second = has_data & (h_seen == 1)
            later = has_data & (h_seen >= 2)
            new_level = alpha * norm + (1 - alpha) * (h_level + h_trend)
            new_trend = beta * (new_level - h_level) + (1 - beta) * h_trend
            h_trend = np.where(first, 0.0, np.where(second, norm - h_level, np.where(later, new_trend, h_trend)))
            h_level = np.where(first, norm, np.where(later, new_level, h_level))
            h_seen = h_seen + has_data
            voluntary = evaluating & (h_seen >= max(config.window, 2)) & (h_level + h_trend > theta)
        else:
            ready = evaluating & (qcount >= 3)
            if ready.any():
                past = np.where(ready[:, None], hist, 0.0)
                future = forecast3(cells, past)
                dod_p, dod_f = np.split(fls.infer_dod(np.concatenate([past, future])), 2)
                G = np.sqrt(dod_p * dod_f)
                voluntary = ready & (G > theta)

        forced = ~voluntary & (t - last_step >= T)
        send = voluntary | forced

        if record_trace and evaluating.any():
            rows = np.flatnonzero(evaluating | send)
            trace_cols["lane"].append(rows)
            trace_cols["step"].append(np.full(len(rows), t))
            trace_cols["e_raw"].append(np.where(has_data, raw, np.nan)[rows])
            trace_cols["e_norm"].append(np.where(has_data, norm, np.nan)[rows])
            if G is not None:
                ok = (evaluating & (qcount >= 3))[rows]
                trace_cols["dod_p"].append(np.where(ok, dod_p[rows], np.nan))
                trace_cols["dod_f"].append(np.where(ok, dod_f[rows], np.nan))
                trace_cols["G"].append(np.where(ok, G[rows], np.nan))
            else:
                for k in ("dod_p", "dod_f", "G"):
                    trace_cols[k].append(np.full(len(rows), np.nan))
            trace_cols["decision"].append(np.where(voluntary, VOLUNTARY, np.where(forced, FORCED, HOLD))[rows])

        if send.any():
            drift = np.abs(cur - last_vals).sum(axis=1)
            for i in np.flatnonzero(send):
                log_rows.append((int(i), t, VOLUNTARY if voluntary[i] else FORCED, float(drift[i])))
            last_vals = np.where(send[:, None], cur, last_vals)
            last_step = np.where(send, t, last_step)
            qcount = np.where(send, 0, qcount)
            h_seen = np.where(send, 0, h_seen)
            h_level = np.where(send, 0.0, h_level)
            h_trend = np.where(send, 0.0, h_trend)
            hist = np.where(send[:, None], 0.0, hist)

    infos = [
        NodeInfo(n, int(offsets[i]), int(lengths[i]), int(n_train[i]), models[i].calibration.min, models[i].calibration.max)
        for i, (_, n) in enumerate(lanes)
    ]
    trace = None
    if record_trace:
        cat = {k: (np.concatenate(v) if v else np.zeros(0)) for k, v in trace_cols.items()}
        trace = cat
    return infos, log_rows, trace, l


def _split_runs(config, lanes, infos, log_rows, trace, l, duration) -> list[ExperimentRun]:
    experiments = sorted({e for e, _ in lanes})
    runs = []
    for e in experiments:
        mine = [i for i, (ee, _) in enumerate(lanes) if ee == e]
        index = {lane: pos for pos, lane in enumerate(mine)}
        log = MessageLog(
            [
                LogEntry(lanes[i][1], step, l, KIND_NAMES[kind], drift)
                for i, step, kind, drift in log_rows
                if i in index
            ]
        )
        tr = None
        if trace is not None:
            sel = np.isin(trace["lane"], mine)
            node_ids = np.array([lanes[i][1] for i in range(len(lanes))])
            tr = Trace(
                node_ids[trace["lane"][sel].astype(int)],
                trace["step"][sel].astype(int),
                trace["e_raw"][sel], trace["e_norm"][sel], trace["dod_p"][sel],
                trace["dod_f"][sel], trace["G"][sel], trace["decision"][sel].astype(int),
            )
        runs.append(ExperimentRun(config, e, [infos[i] for i in mine], log, tr, duration / len(experiments)))
    return runs


def run(config: SimConfig, experiment: int = 0, cache: ModelCache | None = None,
        record_trace: bool = True) -> ExperimentRun:
    """Simulate one experiment (one mote grouping and seed)."""
    cache = cache or ModelCache()
    lanes = [(experiment, n) for n in range(config.n_nodes)]
    t0 = time.perf_counter()
    infos, log_rows, trace, l = _simulate(config, lanes, cache, record_trace)
    return _split_runs(config, lanes, infos, log_rows, trace, l, time.perf_counter() - t0)[0]


def run_experiments(config: SimConfig, cache: ModelCache | None = None,
                    record_trace: bool = False) -> list[ExperimentRun]:
    """Simulate ``config.experiments`` experiments in one batched pass."""
    cache = cache or ModelCache()
    lanes = [(e, n) for e in range(config.experiments) for n in range(config.n_nodes)]
    t0 = time.perf_counter()
    infos, log_rows, trace, l = _simulate(config, lanes, cache, record_trace)
    return _split_runs(config, lanes, infos, log_rows, trace, l, time.perf_counter() - t0)


def compare(configs: Sequence[SimConfig], cache: ModelCache | None = None):
    """Run every config (all its experiments) and tabulate the metrics."""
    from .metrics import ComparisonRow, report

    configs = list(configs)
    if not configs:
        return []
    base = configs[0]
    for c in configs[1:]:
        if replace(c, policy=base.policy, theta=base.theta, epoch_length=base.epoch_length) != base:
            raise SimulationError("compared configs may differ only in policy, theta and T")
    cache = cache or ModelCache()
    rows = []
    for c in sorted(configs, key=lambda c: (c.policy, c.theta, c.epoch_length)):
        runs = run_experiments(c, cache, record_trace=c.policy == "udsdm")
        rows.append(ComparisonRow.from_runs(c, runs, report(runs)))
    return rows
