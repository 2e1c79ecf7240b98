"""Reading, cleaning and replaying the Intel Berkeley Lab sensor log.

The published log is a whitespace separated text file with one reading per
line::

    2004-02-28 00:59:16.02785 3 1 19.9884 37.0933 45.08 2.69964

i.e. ``date time epoch mote_id temperature humidity light voltage``.
Readings that cannot be used are dropped (never repaired) and counted by
reason so a run can report what it discarded.

:func:`synthesize_lab_file` writes a log in the same layout from a seeded
generator; it stands in for the real file when the latter is unavailable.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

N_MOTES = 54
N_FIELDS = 8
DIMENSIONS = ("temperature", "humidity", "light", "voltage")

SHORT_LINE = "short line"
UNPARSEABLE = "unparseable number"
MOTE_OUT_OF_RANGE = "mote out of range"
NON_FINITE = "non-finite value"
REJECT_REASONS = (SHORT_LINE, UNPARSEABLE, MOTE_OUT_OF_RANGE, NON_FINITE)


class IngestError(ValueError):
    """Raised for input that cannot be turned into node streams."""


@dataclass(frozen=True)
class SensorRecord:
    date: dt.date
    time: dt.time
    epoch: int
    mote_id: int
    temperature: float
    humidity: float
    light: float
    voltage: float

    @property
    def vector(self) -> tuple[float, float, float, float]:
        return (self.temperature, self.humidity, self.light, self.voltage)


@dataclass
class RejectStats:
    """Counts of dropped lines, keyed by reason."""

    counts: Counter = field(default_factory=Counter)

    def add(self, reason: str) -> None:
        self.counts[reason] += 1

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def as_dict(self) -> dict[str, int]:
        return {reason: self.counts.get(reason, 0) for reason in REJECT_REASONS}


@dataclass
class NodeStream:
    """Ordered context vectors hosted by one edge node."""

    node_id: int
    vectors: np.ndarray
    source_motes: frozenset[int]

    def __len__(self) -> int:
        return len(self.vectors)


def _parse_time(text: str) -> dt.time:
    # the log uses a variable number of fractional digits, e.g. "00:59:16.02785"
    hms, _, frac = text.partition(".")
    hh, mm, ss = hms.split(":")
    micro = int((frac + "000000")[:6]) if frac else 0
    if frac and not frac.isdigit():
        raise ValueError(text)
    return dt.time(int(hh), int(mm), int(ss), micro)


def parse_line(line: str) -> SensorRecord | str:
    """Parse one log line; return the record or the reject reason."""
    parts = line.split()
    if len(parts) < N_FIELDS:
        return SHORT_LINE
    try:
        date = dt.date.fromisoformat(parts[0])
        time = _parse_time(parts[1])
        epoch = int(parts[2])
        mote = int(parts[3])
        values = [float(p) for p in parts[4:N_FIELDS]]
    except ValueError:
        return UNPARSEABLE
    if not 1 <= mote <= N_MOTES:
        return MOTE_OUT_OF_RANGE
    if not all(math.isfinite(v) for v in values):
        return NON_FINITE
    return SensorRecord(date, time, epoch, mote, *values)


def parse_dataset(path, limit: int | None = None) -> tuple[list[SensorRecord], RejectStats]:
    """Read an Intel Lab style log.

    Args:
        path: log file location.
        limit: stop once this many records have been accepted.

    Returns:
        Accepted records in file order and the reject counts. Every line
        read is either accepted or counted exactly once.
    """
    path = Path(path)
    try:
        fh = path.open("r", encoding="utf-8", errors="replace")
    except OSError as exc:
        raise IngestError(f"cannot read dataset {path}: {exc.strerror}") from exc
    records: list[SensorRecord] = []
    rejects = RejectStats()
    with fh:
        for line in fh:
            if limit is not None and len(records) >= limit:
                break
            parsed = parse_line(line)
            if isinstance(parsed, str):
                rejects.add(parsed)
            else:
                records.append(parsed)
    return records, rejects


def build_streams(
    records: Sequence[SensorRecord], n_nodes: int, rotation: int = 0
) -> list[NodeStream]:
    """Group mote readings into per-node streams.

    Mote ``m`` goes to node ``(m - 1 + rotation) % n_nodes``. ``rotation``
    lets repeated experiments use different mote groupings; 0 is the plain
    round-robin assignment. Each stream is sorted by ``(epoch, time)``.
    """
    if n_nodes < 1:
        raise IngestError("n_nodes must be >= 1")
    if not records:
        raise IngestError("no records to build streams from")
    motes = sorted({r.mote_id for r in records})
    if n_nodes > len(motes):
        raise IngestError(f"more nodes than motes ({n_nodes} > {len(motes)})")

    buckets: list[list[SensorRecord]] = [[] for _ in range(n_nodes)]
    for r in records:
        buckets[(r.mote_id - 1 + rotation) % n_nodes].append(r)

    streams = []
    for node_id, bucket in enumerate(buckets):
        # stable sort keeps file order among exact (epoch, time) ties
        bucket.sort(key=lambda r: (r.epoch, r.time))
        vectors = np.array([r.vector for r in bucket], dtype=float).reshape(-1, len(DIMENSIONS))
        streams.append(NodeStream(node_id, vectors, frozenset(r.mote_id for r in bucket)))
    return streams


def read_csv_streams(path) -> list[NodeStream]:
    """Read generic ``node_id,v1,...,vd`` rows (header optional) into streams.

    A header whose second column is ``seq`` marks the layout of
    :func:`write_clean_csv`; that column is skipped.

    Rows keep their file order within a node. Node ids are renumbered
    0..n-1 in ascending order of the ids found in the file.
    """
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise IngestError(f"cannot read dataset {path}: {exc.strerror}") from exc
    rows: dict[int, list[list[float]]] = {}
    width = None
    first = 1  # first value column
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                node = int(row[0])
                values = [float(v) for v in row[first:]]
            except ValueError:
                if lineno == 1:
                    # header; a "seq" column (as written by write_clean_csv) is not data
                    first = 2 if len(row) > 1 and row[1].strip() == "seq" else 1
                    continue
                raise IngestError(f"{path}:{lineno}: unparseable row")
            if width is None:
                width = len(values)
            if len(values) != width or width == 0 or not all(map(math.isfinite, values)):
                raise IngestError(f"{path}:{lineno}: expected {width} finite values")
            rows.setdefault(node, []).append(values)
    if not rows:
        raise IngestError(f"{path}: no data rows")
    return [
        NodeStream(i, np.array(rows[node], dtype=float), frozenset())
        for i, node in enumerate(sorted(rows))
    ]


def write_clean_csv(streams: Iterable[NodeStream], path) -> None:
    """Write streams as ``node_id,seq,temperature,humidity,light,voltage``."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node_id", "seq", *DIMENSIONS])
        for s in streams:
            for seq, v in enumerate(s.vectors):
                writer.writerow([s.node_id, seq, *(repr(float(x)) for x in v)])


def synthesize_lab_file(
    path,
    n_epochs: int = 3000,
    seed: int = 2004,
    n_motes: int = N_MOTES,
    period_s: float = 31.0,
) -> Path:
    """Write a synthetic sensor log in the Intel Lab layout.

    Each mote samples every ``period_s`` seconds with mote-specific loss
    rates. Temperature follows a daily cycle with occupancy heating and AR(1)
    noise, humidity moves against temperature, light switches with office
    hours and per-room habits, voltage drains slowly. A small fraction of
    lines is corrupted (truncated, garbled, bad mote id, ``nan``) and a few
    readings carry the glitch values typical of failing motes (122.153 C,
    negative humidity), so the cleaning path sees realistic input.
    """
    rng = np.random.default_rng(seed)
    start = dt.datetime(2004, 2, 28, 0, 58, 46)
    t_sec = np.arange(n_epochs) * period_s
    hours = (start.hour + start.minute / 60 + t_sec / 3600.0) % 24.0
    days = t_sec / 86400.0

    base_temp = rng.uniform(17.0, 21.0, n_motes)
    base_hum = rng.uniform(34.0, 44.0, n_motes)
    lamp = rng.uniform(250.0, 600.0, n_motes)
    window = rng.uniform(0.0, 250.0, n_motes)
    on_hour = rng.uniform(6.5, 9.5, n_motes)
    off_hour = rng.uniform(17.0, 22.0, n_motes)
    base_volt = rng.uniform(2.62, 2.74, n_motes)
    drain = rng.uniform(0.01, 0.04, n_motes)
    keep = rng.uniform(0.6, 0.95, n_motes)

    diurnal = np.sin(2 * np.pi * (hours - 9.0) / 24.0)
    sun = np.clip(np.sin(np.pi * (hours - 6.5) / 12.5), 0.0, None)

    noise_t = np.zeros(n_motes)
    noise_h = np.zeros(n_motes)
    lines = []
    for k in range(n_epochs):
        noise_t = 0.97 * noise_t + rng.normal(0.0, 0.08, n_motes)
        noise_h = 0.97 * noise_h + rng.normal(0.0, 0.25, n_motes)
        lit = (hours[k] >= on_hour) & (hours[k] < off_hour)
        temp = base_temp + 2.5 * diurnal[k] + 1.2 * lit + noise_t
        hum = base_hum - 1.6 * (temp - base_temp) + noise_h
        light = lit * lamp + window * sun[k] + rng.normal(0.0, 4.0, n_motes)
        light = np.clip(light, 0.0, None)
        volt = base_volt - drain * days[k] - 0.003 * (temp - 20.0) + rng.normal(0.0, 0.002, n_motes)

        present = np.flatnonzero(rng.random(n_motes) < keep)
        rng.shuffle(present)
        offsets = np.sort(rng.uniform(0.0, period_s, len(present)))
        for m, off in zip(present, offsets):
            stamp = start + dt.timedelta(seconds=float(t_sec[k] + off))
            values = [temp[m], hum[m], light[m], volt[m]]
            if rng.random() < 0.001:
                values[0], values[1] = 122.153, -3.91264
            fields = [
                stamp.strftime("%Y-%m-%d"),
                stamp.strftime("%H:%M:%S.%f")[:-1],
                str(k + 1),
                str(m + 1),
                *(f"{v:.4f}" if i < 2 else f"{v:.5g}" for i, v in enumerate(values)),
            ]
            u = rng.random()
            if u < 0.002:
                fields = fields[: int(rng.integers(4, 8))]
            elif u < 0.0025:
                fields[3] = str(int(rng.integers(55, 66)))
            elif u < 0.003:
                fields[6] = fields[6] + "x"
            elif u < 0.0033:
                fields[4] = "nan"
            lines.append(" ".join(fields))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path
