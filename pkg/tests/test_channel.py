import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import poisson

from passive_qkd.channel import (
    ChannelParams,
    DecoyObservables,
    _error_gain_generic,
    _error_gain_series,
    click_prob,
    error_prob,
    exact_n_photon,
    n_photon_outcomes,
    observables,
)
from passive_qkd.fock import delta_s
from passive_qkd.oracles import detector_mc, end_to_end_mc
from passive_qkd.regions import BASIS_CENTRES, DEFAULT_QUADRATURE
from passive_qkd.transmitter import WINDOW_LABELS, TransmitterParams


def test_channel_transmittance():
    ch = ChannelParams(distance_km=50.0)
    assert ch.channel_transmittance == pytest.approx(0.1)
    assert ch.eta == pytest.approx(0.065)
    assert ch.at_distance(0.0).eta == pytest.approx(0.65)


@pytest.mark.parametrize(
    "kwargs",
    [{"attenuation_db_km": -1}, {"distance_km": -1}, {"detector_efficiency": 0}, {"dark_count": 1.0}],
)
def test_channel_validation(kwargs):
    with pytest.raises(ValueError):
        ChannelParams(**kwargs)


def test_click_and_error_examples(channel):
    pd = channel.dark_count
    assert click_prob(0.0, channel) == pytest.approx(1 - (1 - pd) ** 2)
    assert error_prob(0.0, math.pi / 2, 0.0, channel) == pytest.approx((1 - (1 - pd) ** 2) / 2)
    ideal = ChannelParams(dark_count=0.0)
    assert error_prob(0.7, math.pi / 2, 0.0, ideal) == pytest.approx(0.0, abs=1e-15)
    assert error_prob(0.7, math.pi / 2, math.pi, ideal) == pytest.approx(click_prob(0.7, ideal))
    assert error_prob(0.7, 0.0, 0.3, ideal) == pytest.approx(click_prob(0.7, ideal) / 2)


@pytest.mark.parametrize("pulse", [(0.3, math.pi / 2, 0.1), (1.2, 1.2, -0.3), (0.05, 1.9, 0.6)])
def test_detector_model_against_photon_sampling(pulse):
    ch = ChannelParams(distance_km=5.0, dark_count=0.01)
    est = detector_mc(*pulse, ch, trials=400_000, seed=3)
    assert abs(est.click - click_prob(pulse[0], ch)) < 4 * est.click_se
    assert abs(est.error - error_prob(*pulse, ch)) < 4 * max(est.error_se, 1e-6)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 3), st.floats(-1, 1), st.floats(0, 0.1), st.floats(0.01, 1))
def test_poisson_resummation(intensity, s, pd, eff):
    ch = ChannelParams(detector_efficiency=eff, dark_count=pd)
    n = np.arange(80)
    w = poisson.pmf(n, intensity)
    y, e = n_photon_outcomes(n, s, ch)
    theta, phi = math.pi / 2, math.acos(s)
    assert w @ y == pytest.approx(float(click_prob(intensity, ch)), abs=1e-12)
    assert w @ e == pytest.approx(float(error_prob(intensity, theta, phi, ch)), abs=1e-12)


def test_vacuum_outcomes(channel):
    y, e = n_photon_outcomes(0, 0.3, channel)
    assert y == pytest.approx(1 - (1 - channel.dark_count) ** 2)
    assert e == pytest.approx(y / 2)


def test_single_photon_error_tracks_delta_s(params, channel):
    # mean alignment of the signal single-photon component is 2 * Delta_s
    ch = channel.at_distance(30.0)
    _, e1 = exact_n_photon(params, "s", 1, "Z", ch)
    _, expected = n_photon_outcomes(1, 2 * float(delta_s(params)), ch)
    assert e1 == pytest.approx(float(expected), rel=1e-10)


def test_vanishing_transmittance(params):
    ch = ChannelParams(distance_km=2000.0, dark_count=1e-3)
    obs = observables(params, ch)
    floor = 1 - (1 - ch.dark_count) ** 2
    for j in WINDOW_LABELS:
        assert obs.q("Z", j) == pytest.approx(floor, rel=1e-9)
        assert obs.e("Z", j) == pytest.approx(floor / 2, rel=1e-9)


def test_gains_decrease_with_distance(params, channel):
    rows = [observables(params, channel.at_distance(L)) for L in range(0, 201, 25)]
    for j in WINDOW_LABELS:
        q = [r.q("Z", j) for r in rows]
        e = [r.e("Z", j) for r in rows]
        assert all(a > b for a, b in zip(q, q[1:]))
        assert all(a > b for a, b in zip(e, e[1:]))
        assert all(0 <= ee <= qq for ee, qq in zip(e, q))


@pytest.mark.parametrize("misalignment", [0.0, 0.05, -0.2])
def test_series_and_direct_routes_agree(params, misalignment):
    ch = ChannelParams(distance_km=10.0, misalignment=misalignment)
    for j in WINDOW_LABELS:
        n1, e1 = _error_gain_series(params, ch, j, DEFAULT_QUADRATURE)
        n2, e2 = _error_gain_generic(params, ch, j, (0.0,), DEFAULT_QUADRATURE)
        n3, e3 = _error_gain_generic(params, ch, j, BASIS_CENTRES["X"], DEFAULT_QUADRATURE)
        assert e1 / n1 == pytest.approx(e2 / n2, rel=1e-9, abs=1e-15)
        assert e1 / n1 == pytest.approx(e3 / n3, rel=1e-9, abs=1e-15)


def test_misalignment_raises_error_rate(params):
    base = observables(params, ChannelParams())
    tilted = observables(params, ChannelParams(misalignment=0.1))
    assert tilted.qber("Z", "s") > base.qber("Z", "s")
    assert tilted.q("Z", "s") == base.q("Z", "s")


def test_observables_symmetry_shortcut(params, channel):
    full = observables(params, channel)
    fast = observables(params, channel, assume_symmetry=True)
    for j in WINDOW_LABELS:
        assert fast.q("X", j) == full.q("Z", j)
        assert abs(full.e("X", j) - full.e("Z", j)) < 1e-12


def test_observables_validation():
    with pytest.raises(ValueError):
        DecoyObservables({"Z": {"s": 0.1}}, {"Z": {"s": 0.2}})


def test_end_to_end_sampling(params):
    ch = ChannelParams(distance_km=20.0)
    mc = end_to_end_mc(params, ch, samples=3_000_000, seed=7)
    obs = observables(params, ch)
    for m in ("Z", "X"):
        for j in ("s", "d"):
            n = mc.counts[m][j]
            q, e = obs.q(m, j), obs.e(m, j)
            assert abs(mc.gains[m][j] - q) < 4.5 * math.sqrt(q * (1 - q) / n)
            assert abs(mc.error_gains[m][j] - e) < 4.5 * math.sqrt(e * (1 - e) / n)
