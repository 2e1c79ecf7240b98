import pytest

from udsdm.baselines import HoltState, bm_decide, holt_update, pm_decide
from udsdm.synopsis import UpdateQuantum


@pytest.mark.parametrize("e, send", [(0.0, False), (1e-9, True), (3.2, True)])
def test_bm_decide(e, send):
    assert bm_decide(e) is send
    assert bm_decide(UpdateQuantum(e, 1)) is send


def test_holt_initialisation_and_step():
    s = holt_update(HoltState(), 1.0)
    assert not s.ready
    s = holt_update(s, 2.0)
    assert (s.level, s.trend) == (1.0, 1.0)
    s = holt_update(s, 3.0)
    assert s.level == pytest.approx(2.5) and s.trend == pytest.approx(1.25)


def test_forecast_needs_two_observations():
    with pytest.raises(ValueError):
        holt_update(HoltState(), 0.3).forecast()


def test_holt_constant_series():
    s = HoltState()
    for _ in range(50):
        s = holt_update(s, 0.4)
    assert abs(s.trend) < 1e-6 and s.level == pytest.approx(0.4)


def test_holt_tracks_linear_series():
    s = HoltState()
    for t in range(100):
        s = holt_update(s, 0.01 * t)
    assert abs(s.forecast(1) - 0.01 * 100) < 1e-3


def test_holt_parameters_validated():
    with pytest.raises(ValueError):
        HoltState(alpha=1.0)


def test_pm_decide_examples():
    assert pm_decide(HoltState(level=0.7, trend=0.1, observations_seen=10), 0.75)
    assert not pm_decide(HoltState(level=0.5, trend=0.0, observations_seen=10), 0.6)
    assert not pm_decide(HoltState(level=0.9, trend=0.5, observations_seen=5), 0.6, window=10)
