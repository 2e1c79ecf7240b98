"""Incremental synopses and update quanta.

A synopsis summarises everything a node has received so far as the
per-dimension running mean followed by the per-dimension population
standard deviation, so ``l = 2 d``. It is maintained with Welford's
recurrence. The update quantum is the L1 distance between the current
synopsis and the last one the node disseminated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Synopsis:
    values: np.ndarray
    step: int = 0
    count: int = 0
    # running sum of squared deviations; carried so updates stay single pass
    m2: np.ndarray | None = field(default=None, repr=False, compare=False)

    @classmethod
    def empty(cls, d: int) -> "Synopsis":
        return cls(np.zeros(2 * d), 0, 0, np.zeros(d))

    @property
    def d(self) -> int:
        return len(self.values) // 2

    @property
    def mean(self) -> np.ndarray:
        return self.values[: self.d]

    @property
    def std(self) -> np.ndarray:
        return self.values[self.d :]

    def to_row(self, node_id: int) -> list:
        """Message-log row ``node_id,step,count,v1..vl``."""
        return [node_id, self.step, self.count, *(repr(float(v)) for v in self.values)]


@dataclass(frozen=True)
class UpdateQuantum:
    value: float
    step: int


@dataclass
class QuantaSeries:
    """Update quanta observed since the last dissemination."""

    quanta: list[UpdateQuantum] = field(default_factory=list)

    def append(self, q: UpdateQuantum) -> None:
        if self.quanta and q.step <= self.quanta[-1].step:
            raise ValueError("quantum steps must be strictly increasing")
        self.quanta.append(q)

    def clear(self) -> None:
        self.quanta.clear()

    def __len__(self) -> int:
        return len(self.quanta)

    def values(self) -> list[float]:
        return [q.value for q in self.quanta]


def update_synopsis(current: Synopsis, x) -> Synopsis:
    x = np.asarray(x, dtype=float)
    d = current.d
    if x.shape != (d,):
        raise ValueError(f"expected a {d}-dimensional vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("context vector has non-finite components")
    m2 = current.m2 if current.m2 is not None else (current.std**2) * current.count
    n = current.count + 1
    delta = x - current.mean
    mean = current.mean + delta / n
    m2 = m2 + delta * (x - mean)
    std = np.sqrt(np.maximum(m2, 0.0) / n)
    return Synopsis(np.concatenate([mean, std]), current.step + 1, n, m2)


def synopsis_trajectory(vectors: np.ndarray) -> np.ndarray:
    """Synopsis values after each vector of a stream, shape ``(n, 2 d)``.

    Runs the same recurrence as :func:`update_synopsis` without building
    intermediate objects.
    """
    vectors = np.asarray(vectors, dtype=float)
    n, d = vectors.shape
    out = np.empty((n, 2 * d))
    mean = np.zeros(d)
    m2 = np.zeros(d)
    for i in range(n):
        x = vectors[i]
        delta = x - mean
        mean = mean + delta / (i + 1)
        m2 = m2 + delta * (x - mean)
        out[i, :d] = mean
        out[i, d:] = np.sqrt(np.maximum(m2, 0.0) / (i + 1))
    return out


def update_quantum(current: Synopsis, last_sent: Synopsis) -> UpdateQuantum:
    a, b = np.asarray(current.values), np.asarray(last_sent.values)
    if a.shape != b.shape:
        raise ValueError(f"synopsis length mismatch: {a.shape} vs {b.shape}")
    return UpdateQuantum(float(np.abs(a - b).sum()), current.step)


@dataclass(frozen=True)
class NormalizationCalibration:
    min: float
    max: float

    def __post_init__(self):
        if not (math.isfinite(self.min) and math.isfinite(self.max)) or self.max <= self.min:
            raise ValueError(f"invalid calibration range [{self.min}, {self.max}]")

    @classmethod
    def fit(cls, raw_quanta) -> "NormalizationCalibration":
        raw = np.asarray(raw_quanta, dtype=float)
        if raw.size == 0:
            raise ValueError("cannot calibrate on an empty quanta series")
        lo, hi = float(raw.min()), float(raw.max())
        if hi <= lo:
            # flat training series: any positive quantum reads as maximal
            hi = lo + 1e-12
        return cls(lo, hi)

    def apply(self, raw):
        """Vectorised :func:`normalize_quantum` on raw values."""
        raw = np.asarray(raw, dtype=float)
        return np.clip((raw - self.min) / (self.max - self.min), 0.0, 1.0)


def normalize_quantum(e: UpdateQuantum | float, cal: NormalizationCalibration) -> float:
    value = e.value if isinstance(e, UpdateQuantum) else float(e)
    if not math.isfinite(value):
        raise ValueError("quantum is not finite")
    return min(max((value - cal.min) / (cal.max - cal.min), 0.0), 1.0)
