import math

import pytest
from hypothesis import given, settings, strategies as st

from sasim.dynamics import Label
from sasim.predictor import (
    CounterStore,
    DomainError,
    EmptyHistory,
    PredictorConfig,
    QuantileHistory,
    actuation_chain,
    estimate_green,
    estimate_travel_time,
    label_all,
    label_vehicle,
    quantile_predict,
    record_crossing,
)

from oracles import drive_green

CFG = PredictorConfig(t_a_i=4, t_th=35, min_gap=3, min_duration=39, max_duration=48, assumed_accel=2.5)


def kinematic_time(v, d, sl, a, h=0.001):
    x = t = 0.0
    while x < d:
        nv = min(sl, v + a * h)
        x += 0.5 * (v + nv) * h
        v = nv
        t += h
    return t


@pytest.mark.parametrize("v,d,expected", [(15, 150, 10.0), (10, 100, 7.0), (0, 45, 6.0)])
def test_travel_time(v, d, expected):
    got = estimate_travel_time(v, d, 15, 2.5)
    assert got == pytest.approx(expected)
    assert got == pytest.approx(kinematic_time(v, d, 15, 2.5), abs=0.01)


def test_travel_time_limit_not_reached():
    got = estimate_travel_time(0, 20, 15, 2.5)
    assert got == pytest.approx(math.sqrt(2 * 20 / 2.5))


def test_travel_time_domain():
    with pytest.raises(DomainError):
        estimate_travel_time(16, 100, 15, 2.5)
    with pytest.raises(DomainError):
        estimate_travel_time(10, 0, 15, 2.5)


def test_record_crossing_and_store():
    store = CounterStore()
    rec = record_crossing(store, "a", 10, 20, CFG, distance=100, speed_limit=15, cycle_index=0)
    assert rec.t_est == pytest.approx(27)
    record_crossing(store, "b", 15, 15, CFG, distance=100, speed_limit=15, cycle_index=0)
    assert store.estimates == sorted(store.estimates)
    assert [r.vehicle for r in store.records] == ["b", "a"]
    store.roll(1)
    assert len(store) == 0


@pytest.mark.parametrize(
    "store,t,label",
    [
        ([30], 30, Label.PASS),
        ([36, 40], 40, Label.WAIT),
        ([36, 38, 40.5, 43, 45.5], 45.5, Label.WAIT),
        ([36, 38, 40.5, 43], 43, Label.PASS),
        ([39], 39, Label.WAIT),
    ],
)
def test_labels(store, t, label):
    assert label_vehicle(store, t, CFG) is label


@pytest.mark.parametrize(
    "store,green",
    [([], 39), ([37, 39, 41], 45), ([36, 38, 40, 42, 44.7], 48), ([30], 39), ([36], 40)],
)
def test_estimate_green(store, green):
    assert estimate_green(store, CFG) == pytest.approx(green)
    assert drive_green(store)[0] == pytest.approx(green)


def test_quantiles():
    assert quantile_predict(QuantileHistory(0.8, [39.0] * 10)) == 39
    low = quantile_predict(QuantileHistory(0.1, [39, 41, 43, 45, 48]))
    assert low == pytest.approx(39.8)
    with pytest.raises(EmptyHistory):
        quantile_predict(QuantileHistory(0.5))
    with pytest.raises(ValueError):
        QuantileHistory(1.0)


def independent_quantile(xs, eta):
    # linear interpolation between order statistics at rank eta * (n - 1)
    xs = sorted(xs)
    r = eta * (len(xs) - 1)
    i = int(r)
    if i + 1 >= len(xs):
        return xs[-1]
    return xs[i] * (1 - (r - i)) + xs[i + 1] * (r - i)


def test_quantile_stuck_after_demand_step():
    hist = QuantileHistory(0.8, [48.0] * 20)
    preds = []
    for _ in range(10):
        preds.append(quantile_predict(hist))
        hist.update(39.0)
    assert all(p == 48 for p in preds)


@given(st.lists(st.floats(30, 60), min_size=1, max_size=50), st.floats(0.01, 0.99))
def test_quantile_matches_independent(xs, eta):
    q = quantile_predict(QuantileHistory(eta, list(xs)))
    assert q == pytest.approx(independent_quantile(xs, eta))
    assert min(xs) <= q <= max(xs)


@given(st.lists(st.floats(30, 60), min_size=1, max_size=50), st.floats(0.01, 0.98), st.floats(0.001, 0.5))
def test_quantile_monotone_in_eta(xs, eta, step):
    hi = min(0.99, eta + step)
    assert quantile_predict(QuantileHistory(eta, xs)) <= quantile_predict(QuantileHistory(hi, xs)) + 1e-9


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(20, 55).map(lambda x: round(x, 1)), min_size=1, max_size=12))
def test_labels_match_controller(ests):
    green, _, _ = drive_green(ests)
    labels = label_all(sorted(ests), CFG)
    for t, lab in zip(sorted(ests), labels):
        assert label_vehicle(sorted(ests), t, CFG) is lab
        assert (lab is Label.PASS) == (t + 4 <= green + 1e-9)
    assert estimate_green(ests, CFG) == pytest.approx(green)
    chain = actuation_chain(sorted(ests), CFG)
    assert chain == sorted(chain)
