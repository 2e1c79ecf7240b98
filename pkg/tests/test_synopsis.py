import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from udsdm.synopsis import (
    NormalizationCalibration,
    QuantaSeries,
    Synopsis,
    UpdateQuantum,
    normalize_quantum,
    synopsis_trajectory,
    update_quantum,
    update_synopsis,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def syn(values):
    return Synopsis(np.asarray(values, dtype=float))


def test_single_sample():
    s = update_synopsis(Synopsis.empty(2), [2, 4])
    np.testing.assert_array_equal(s.mean, [2, 4])
    np.testing.assert_array_equal(s.std, [0, 0])
    assert s.count == 1


def test_two_samples_population_std():
    s = update_synopsis(update_synopsis(Synopsis.empty(2), [2, 4]), [4, 8])
    np.testing.assert_allclose(s.mean, [3, 6])
    np.testing.assert_allclose(s.std, [1, 2])
    assert s.count == 2


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        update_synopsis(Synopsis.empty(2), [1, 2, 3])


@pytest.mark.parametrize(
    "current, last, expected",
    [([1.5, 1.0], [1.0, 2.0], 1.5), ([0.3, 0.7], [0.3, 0.7], 0.0), ([0, 0, 0], [1, 1, 1], 3.0)],
)
def test_update_quantum_examples(current, last, expected):
    assert update_quantum(syn(current), syn(last)).value == expected


def test_update_quantum_length_mismatch():
    with pytest.raises(ValueError):
        update_quantum(syn([1, 2]), syn([1, 2, 3]))


@pytest.mark.parametrize("e, expected", [(5, 0.5), (12, 1.0), (0, 0.0), (-3, 0.0)])
def test_normalize_examples(e, expected):
    assert normalize_quantum(UpdateQuantum(e, 1), NormalizationCalibration(0, 10)) == expected


def test_normalize_rejects_nan():
    with pytest.raises(ValueError):
        normalize_quantum(float("nan"), NormalizationCalibration(0, 10))


def test_calibration_validation():
    with pytest.raises(ValueError):
        NormalizationCalibration(1.0, 1.0)
    flat = NormalizationCalibration.fit([2.0, 2.0])
    assert flat.max > flat.min


def test_reset_gives_zero_quantum():
    s = update_synopsis(update_synopsis(Synopsis.empty(1), [1.0]), [3.0])
    last_sent = s  # dissemination
    assert update_quantum(s, last_sent).value == 0.0


def test_quanta_series_steps_increase():
    q = QuantaSeries()
    q.append(UpdateQuantum(0.1, 3))
    with pytest.raises(ValueError):
        q.append(UpdateQuantum(0.2, 3))


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=40))
def test_trajectory_matches_incremental_updates(rows):
    x = np.array(rows)
    traj = synopsis_trajectory(x)
    s = Synopsis.empty(2)
    for i, row in enumerate(x):
        s = update_synopsis(s, row)
        assert s.values.tobytes() == traj[i].tobytes()


@given(st.lists(finite, min_size=1, max_size=60), st.randoms(use_true_random=False))
def test_mean_is_permutation_insensitive(values, rnd):
    shuffled = list(values)
    rnd.shuffle(shuffled)
    a = synopsis_trajectory(np.array(values)[:, None])[-1, 0]
    b = synopsis_trajectory(np.array(shuffled)[:, None])[-1, 0]
    assert abs(a - b) <= 1e-9


vec = st.lists(finite, min_size=4, max_size=4).map(np.array)


@settings(max_examples=200)
@given(vec, vec, vec)
def test_quantum_is_a_metric(a, b, c):
    d = lambda x, y: update_quantum(syn(x), syn(y)).value  # noqa: E731
    assert d(a, b) >= 0
    assert d(a, b) == d(b, a)
    assert d(a, a) == 0
    assert (d(a, b) == 0) == np.array_equal(a, b)
    assert d(a, c) <= d(a, b) + d(b, c) + 1e-9


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_normalized_in_unit_interval(e):
    assert 0.0 <= normalize_quantum(e, NormalizationCalibration(-3.0, 7.5)) <= 1.0
