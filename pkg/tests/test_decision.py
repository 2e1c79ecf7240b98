import math

import numpy as np
import pytest

from udsdm.decision import (
    Decision,
    DecisionPolicy,
    DecisionTrace,
    NodeState,
    decide,
    fuse,
    on_disseminate,
    phase_offset,
)
from udsdm.fuzzy import FuzzySystem
from udsdm.lstm import LstmCell
from udsdm.synopsis import NormalizationCalibration, update_quantum, update_synopsis

FLS = FuzzySystem()
CAL = NormalizationCalibration(0.0, 1.0)


def constant_forecaster(value: float) -> LstmCell:
    return LstmCell.zeros(2).with_params({"b_out": np.asarray(value)})


def feed(state: NodeState, step: int, x) -> float:
    state.synopsis = update_synopsis(state.synopsis, x)
    return state.record_quantum(update_quantum(state.synopsis, state.last_sent), CAL)


def test_fuse_examples():
    assert fuse(0.0, 0.9) == 0.0
    assert fuse(0.64, 0.81) == pytest.approx(0.72, abs=1e-12)
    assert fuse(0.37, 0.37) == pytest.approx(0.37, abs=1e-12)


@pytest.mark.parametrize("bad", [(-0.1, 0.5), (0.5, 1.01), (float("nan"), 0.5)])
def test_fuse_domain(bad):
    with pytest.raises(ValueError):
        fuse(*bad)


def test_gate_example():
    G = fuse(0.9, 0.7)
    assert G == pytest.approx(0.7937, abs=1e-4) and G > 0.75


def test_phase_offsets():
    assert [phase_offset(i, 100, 6) for i in range(6)] == [0, 16, 33, 50, 66, 83]
    assert [phase_offset(i, 100, 2) for i in range(2)] == [0, 50]


def test_policy_validation():
    with pytest.raises(ValueError):
        DecisionPolicy(0.0, 100)
    with pytest.raises(ValueError):
        DecisionPolicy(0.6, 0)
    with pytest.raises(ValueError):
        DecisionPolicy(0.6, 100, -1)


def test_silent_node_sends_on_its_grid():
    for offset, expected in [(0, [100, 200]), (50, [50, 150])]:
        policy = DecisionPolicy(0.6, 100, offset)
        state = NodeState.fresh(0, 2)
        sent = []
        for t in range(1, 201):
            trace = decide(policy, t, state, constant_forecaster(0.0), FLS)
            if trace.decision is not Decision.HOLD:
                assert trace.decision is Decision.FORCED
                on_disseminate(state, t, trace.decision)
                sent.append(t)
        assert sent == expected


def test_forced_at_boundary_when_gate_closed():
    policy = DecisionPolicy(0.6, 100)
    state = NodeState.fresh(0, 1)
    for t in range(1, 101):
        feed(state, t, [0.0])
        trace = decide(policy, t, state, constant_forecaster(0.0), FLS)
        if t < 100:
            assert trace.decision is Decision.HOLD
    assert trace.G is not None and trace.G < 0.6
    assert trace.decision is Decision.FORCED


def test_zero_forecast_degree_holds():
    # forecasts of 0 still score 0.2 with the default sets; use theta above that
    policy = DecisionPolicy(0.5, 100)
    state = NodeState.fresh(0, 1)
    for t, x in enumerate([5.0, 10.0, 20.0], start=1):
        feed(state, t, [x])
    trace = decide(policy, 3, state, constant_forecaster(0.0), FLS)
    assert trace.dod_p > 0.5 and trace.decision is Decision.HOLD


def test_voluntary_dissemination_and_reset():
    policy = DecisionPolicy(0.6, 100)
    state = NodeState.fresh(0, 1)
    for t, x in enumerate([5.0, 10.0, 20.0], start=1):
        feed(state, t, [x])
    trace = decide(policy, 3, state, constant_forecaster(1.0), FLS)
    assert trace.past_triple == (1.0, 1.0, 1.0)
    assert trace.forecast_triple == (1.0, 1.0, 1.0)
    assert trace.G == pytest.approx(0.8) and trace.decision is Decision.DISSEMINATE
    trace.check(policy.theta)
    on_disseminate(state, 3, trace.decision)
    assert update_quantum(state.synopsis, state.last_sent).value == 0.0
    assert len(state.quanta) == 0 and state.log == [(0, 3, 2, "disseminate")]


def test_voluntary_send_suppresses_forced_at_next_boundary():
    policy = DecisionPolicy(0.6, 100)
    state = NodeState.fresh(0, 1)
    on_disseminate(state, 60, Decision.DISSEMINATE)
    assert not policy.forced_due(100, state.last_sent_step)
    assert policy.forced_due(160, state.last_sent_step)


def test_needs_three_quanta():
    state = NodeState.fresh(0, 1)
    feed(state, 1, [1.0])
    feed(state, 2, [2.0])
    trace = decide(DecisionPolicy(0.6, 100), 2, state, constant_forecaster(1.0), FLS)
    assert trace.G is None and trace.decision is Decision.HOLD


def test_trace_check_catches_inconsistency():
    bad = DecisionTrace(5, 1.0, 1.0, (1, 1, 1), (1, 1, 1), 0.5, 0.5, 0.9, Decision.HOLD)
    with pytest.raises(AssertionError):
        bad.check(0.6)
    low = DecisionTrace(5, 1.0, 1.0, (1, 1, 1), (1, 1, 1), 0.25, 0.25, 0.25, Decision.DISSEMINATE)
    with pytest.raises(AssertionError):
        low.check(0.6)


def test_higher_theta_sends_subset():
    rng = np.random.default_rng(0)
    for _ in range(200):
        p, f = rng.uniform(0, 1, 2)
        G = fuse(p, f)
        if G > 0.75:
            assert G > 0.6
        assert min(p, f) - 1e-12 <= G <= max(p, f) + 1e-12
        assert math.isclose(G, math.sqrt(p * f))


def test_window_start():
    policy = DecisionPolicy(0.6, 100, 16)
    assert policy.window_start(17) == 16
    assert policy.window_start(116) == 16
    assert policy.window_start(117) == 116
    assert policy.window_start(5) == -84
