"""Per-node dissemination policy.

At every step the node scores its last three normalised quanta with the
fuzzy system (``dod_p``), forecasts the next three with its LSTM and
scores those too (``dod_f``). The two degrees are fused by their geometric
mean and the synopsis is sent when the fused value exceeds ``theta``.
Independently, a node that has not sent anything for ``T`` steps is forced
to send.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .fuzzy import FuzzySystem
from .lstm import LstmCell, forecast3
from .synopsis import NormalizationCalibration, QuantaSeries, Synopsis, UpdateQuantum, normalize_quantum


class Decision(str, Enum):
    HOLD = "hold"
    DISSEMINATE = "disseminate"
    FORCED = "forced"


def fuse(dod_p, dod_f):
    """Geometric mean of the past and future degrees of distribution."""
    if not (0.0 <= dod_p <= 1.0 and 0.0 <= dod_f <= 1.0):
        raise ValueError("degrees of distribution must lie in [0, 1]")
    return math.sqrt(dod_p * dod_f)


def phase_offset(node_index: int, T: int, n_nodes: int) -> int:
    """Stagger of node ``node_index``'s epoch grid, ``floor(i T / N)``."""
    return (node_index * T) // n_nodes


@dataclass(frozen=True)
class DecisionPolicy:
    theta: float
    epoch_length: int
    phase_offset: int = 0

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must be in (0, 1]")
        if self.epoch_length <= 0:
            raise ValueError("epoch length T must be positive")
        if self.phase_offset < 0:
            raise ValueError("phase offset must be >= 0")

    def forced_due(self, step: int, last_sent_step: int | None) -> bool:
        """True when ``T`` steps have passed without a dissemination.

        Before the first dissemination the node counts from its grid, so a
        silent node sends at ``phase_offset, phase_offset + T, ...``
        (``T, 2T, ...`` for offset 0).
        """
        anchor = last_sent_step if last_sent_step is not None else self.initial_anchor
        return step - anchor >= self.epoch_length

    @property
    def initial_anchor(self) -> int:
        return self.phase_offset - self.epoch_length if self.phase_offset > 0 else 0

    def window_start(self, step: int) -> int:
        """Start (exclusive) of the fixed grid window holding ``step``."""
        k = -((self.phase_offset - step) // self.epoch_length)  # ceil((step - offset) / T)
        return self.phase_offset + (k - 1) * self.epoch_length


@dataclass
class DecisionTrace:
    step: int
    e_raw: float | None
    e_norm: float | None
    past_triple: tuple[float, float, float] | None
    forecast_triple: tuple[float, float, float] | None
    dod_p: float | None
    dod_f: float | None
    G: float | None
    decision: Decision

    def check(self, theta: float) -> None:
        """Raise if the trace violates its own invariants."""
        if self.G is not None and abs(self.G - math.sqrt(self.dod_p * self.dod_f)) > 1e-12:
            raise AssertionError(f"step {self.step}: G is not the geometric mean")
        if self.decision is Decision.DISSEMINATE and not (self.G is not None and self.G > theta):
            raise AssertionError(f"step {self.step}: voluntary dissemination with G <= theta")


@dataclass
class NodeState:
    """Mutable state owned by one node's decision engine."""

    node_id: int
    synopsis: Synopsis
    last_sent: Synopsis
    quanta: QuantaSeries = field(default_factory=QuantaSeries)
    normalized: list[float] = field(default_factory=list)
    last_sent_step: int | None = None
    log: list[tuple[int, int, int, str]] = field(default_factory=list)

    @classmethod
    def fresh(cls, node_id: int, d: int) -> "NodeState":
        empty = Synopsis.empty(d)
        return cls(node_id, empty, empty)

    def record_quantum(self, q: UpdateQuantum, cal: NormalizationCalibration) -> float:
        self.quanta.append(q)
        e_norm = normalize_quantum(q, cal)
        self.normalized.append(e_norm)
        return e_norm


def decide(
    policy: DecisionPolicy,
    step: int,
    state: NodeState,
    lstm: LstmCell,
    fls: FuzzySystem,
) -> DecisionTrace:
    """Score the node's current quanta and pick hold / disseminate / forced.

    The quanta of ``state`` must already include this step's quantum, if the
    node received data at this step.
    """
    e_raw = e_norm = past = future = dod_p = dod_f = G = None
    if state.quanta.quanta and state.quanta.quanta[-1].step == step:
        e_raw = state.quanta.quanta[-1].value
        e_norm = state.normalized[-1]
    decision = Decision.HOLD
    if e_raw is not None and len(state.normalized) >= 3:
        past = tuple(state.normalized[-3:])
        future = tuple(float(v) for v in forecast3(lstm, past))
        dod_p = float(fls.infer_dod(past))
        dod_f = float(fls.infer_dod(future))
        G = fuse(dod_p, dod_f)
        if G > policy.theta:
            decision = Decision.DISSEMINATE
    if decision is Decision.HOLD and policy.forced_due(step, state.last_sent_step):
        decision = Decision.FORCED
    return DecisionTrace(step, e_raw, e_norm, past, future, dod_p, dod_f, G, decision)


def on_disseminate(state: NodeState, step: int, kind: Decision) -> None:
    """Send the current synopsis: reset the baseline and clear the quanta."""
    state.log.append((state.node_id, step, len(state.synopsis.values), kind.value))
    state.last_sent = state.synopsis
    state.last_sent_step = step
    state.quanta.clear()
    state.normalized.clear()
