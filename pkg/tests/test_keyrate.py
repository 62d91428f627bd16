import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq
from scipy.stats import entropy

from passive_qkd.channel import ChannelParams
from passive_qkd.keyrate import (
    DEFAULT_FEC,
    SearchConfig,
    active_baseline_rate,
    active_rate_at,
    binary_entropy,
    key_rate,
    optimize_parameters,
    perfect_estimation_rate,
    phase_error_rate,
    rate_from_estimates,
    signal_weights,
)


def test_binary_entropy_values():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == pytest.approx(1.0, abs=1e-15)
    assert binary_entropy(0.11) == pytest.approx(entropy([0.11, 0.89], base=2), rel=1e-14)
    assert binary_entropy(0.11) == pytest.approx(0.499916, abs=1e-6)
    # the error rate at which one key bit in two is lost to error correction
    assert brentq(lambda p: binary_entropy(p) - 0.5, 0.01, 0.49) == pytest.approx(0.110028, abs=1e-6)


@given(st.floats(0.0, 1.0))
def test_binary_entropy_properties(p):
    assert binary_entropy(p) == pytest.approx(binary_entropy(1.0 - p), abs=1e-12)
    assert 0.0 <= binary_entropy(p) <= 1.0


def test_binary_entropy_rejects_out_of_range():
    with pytest.raises(ValueError):
        binary_entropy(-0.1)
    with pytest.raises(ValueError):
        binary_entropy(np.array([0.2, 1.5]))


def test_phase_error_rate():
    assert phase_error_rate(0.01, 0.5) == pytest.approx(0.02)
    assert phase_error_rate(0.4, 0.5) == 0.5
    assert phase_error_rate(0.1, 0.0) == 0.5
    assert phase_error_rate(-1e-12, 0.5) == 0.0


def test_rate_plumbing(params, channel):
    gains, errs = {"Z": 0.3, "X": 0.3}, {"Z": 0.006, "X": 0.006}
    y1, e1 = {"Z": 0.6, "X": 0.6}, {"Z": 0.012, "X": 0.012}
    pt = rate_from_estimates(params, channel, gains, errs, y1, e1)
    single, total = signal_weights(params, "Z")
    expected = 0.5 * (single * 0.6 * (1 - binary_entropy(0.02)) - DEFAULT_FEC * total * 0.3 * binary_entropy(0.02))
    assert pt.k_z == pytest.approx(expected, rel=1e-14)
    assert pt.key_rate == pytest.approx(2 * expected, rel=1e-14)
    assert pt.as_dict()["K"] == pt.key_rate


def test_rate_clamped_at_zero(params, channel):
    gains, errs = {"Z": 0.3, "X": 0.3}, {"Z": 0.1, "X": 0.1}
    pt = rate_from_estimates(params, channel, gains, errs, {"Z": 0.1, "X": 0.1}, {"Z": 0.05, "X": 0.05})
    assert pt.key_rate == 0.0


@pytest.mark.parametrize("distance_km", [0.0, 60.0])
def test_bases_contribute_equally(params, channel, distance_km):
    pt = key_rate(params, channel.at_distance(distance_km))
    assert pt.k_z == pytest.approx(pt.k_x, rel=1e-9)
    fast = key_rate(params, channel.at_distance(distance_km), assume_symmetry=True)
    assert fast.key_rate == pytest.approx(pt.key_rate, rel=1e-9)


@pytest.mark.parametrize("distance_km", [0.0, 30.0, 100.0, 150.0])
def test_bounded_rate_below_exact_rate(params, channel, distance_km):
    ch = channel.at_distance(distance_km)
    assert key_rate(params, ch).key_rate <= perfect_estimation_rate(params, ch).key_rate + 1e-15


def test_rate_decreases_with_distance(params, channel):
    k = [key_rate(params, channel.at_distance(L), assume_symmetry=True).key_rate for L in range(0, 101, 20)]
    assert all(a > b for a, b in zip(k, k[1:]))
    assert key_rate(params, channel.at_distance(400.0), assume_symmetry=True).key_rate == 0.0


def test_active_baseline_against_dense_scan():
    for L in (0.0, 50.0, 100.0):
        ch = ChannelParams(distance_km=L)
        mus = np.linspace(1e-3, 2.0, 20001)
        dense = max(active_rate_at(m, ch) for m in mus[::10])
        fine_mu = mus[np.argmax([active_rate_at(m, ch) for m in mus[::10]]) * 10]
        local = np.linspace(fine_mu - 1e-3, fine_mu + 1e-3, 2001)
        dense = max(dense, max(active_rate_at(m, ch) for m in local))
        res = active_baseline_rate(ch)
        assert res.key_rate == pytest.approx(dense, rel=1e-7)
        assert 0.3 < res.mu < 1.5


def test_active_baseline_trend():
    rates = [active_baseline_rate(ChannelParams(distance_km=L)).key_rate for L in range(0, 201, 25)]
    assert all(a > b > 0 for a, b in zip(rates, rates[1:]))
    assert active_baseline_rate(ChannelParams(distance_km=300.0)).key_rate == 0.0


def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(nu_t=(0.5, 0.1))
    with pytest.raises(ValueError):
        SearchConfig(delta_phi=(0.1, 0.9))
    with pytest.raises(ValueError):
        SearchConfig(grid=0)


def test_optimizer_never_below_grid(channel):
    search = SearchConfig(grid=2, max_evals=25)
    res = optimize_parameters(channel.at_distance(50.0), search)
    assert res.point.key_rate >= res.grid_best * (1 - 1e-9)
    assert res.evaluations <= 8 + 25 + 5
    p = res.point.params
    for value, (lo, hi) in zip((p.nu_t, p.delta_theta, p.delta_phi), search.bounds):
        assert lo <= value <= hi
