"""Comparison policies.

``bm`` sends whenever the synopsis changed at all. ``pm`` smooths the
normalised quanta with Holt's double exponential smoothing and sends when
the one-step forecast exceeds ``theta``, after a warm-up of ``W``
observations. Both share the forced-dissemination rule of
:class:`~udsdm.decision.DecisionPolicy`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .synopsis import UpdateQuantum


def bm_decide(e: UpdateQuantum | float) -> bool:
    value = e.value if isinstance(e, UpdateQuantum) else e
    return value > 0


@dataclass(frozen=True)
class HoltState:
    alpha: float = 0.5
    beta: float = 0.5
    level: float = 0.0
    trend: float = 0.0
    observations_seen: int = 0

    def __post_init__(self):
        if not (0 < self.alpha < 1 and 0 < self.beta < 1):
            raise ValueError("alpha and beta must be in (0, 1)")

    @property
    def ready(self) -> bool:
        return self.observations_seen >= 2

    def forecast(self, horizon: int = 1) -> float:
        if not self.ready:
            raise ValueError("Holt state needs two observations before forecasting")
        return self.level + horizon * self.trend


def holt_update(state: HoltState, e: float) -> HoltState:
    """Fold one observation into the smoother.

    The first observation sets the level, the second the trend
    (``second - first``); later ones apply the usual level/trend recursion.
    """
    n = state.observations_seen
    if n == 0:
        return replace(state, level=e, trend=0.0, observations_seen=1)
    if n == 1:
        return replace(state, trend=e - state.level, observations_seen=2)
    level = state.alpha * e + (1 - state.alpha) * (state.level + state.trend)
    trend = state.beta * (level - state.level) + (1 - state.beta) * state.trend
    return replace(state, level=level, trend=trend, observations_seen=n + 1)


def pm_decide(state: HoltState, theta: float, window: int = 10) -> bool:
    if state.observations_seen < max(window, 2):
        return False
    return state.forecast(1) > theta
