import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from passive_qkd.channel import ChannelParams
from passive_qkd.oracles import (
    amplitudes_to_output,
    closed_form_amplitudes,
    detector_mc,
    end_to_end_mc,
    explicit_mode_simulation,
    pdf_histogram_check,
)
from passive_qkd.transmitter import PhaseDraw, output_from_phases, wrap_angle

angles = st.floats(0.0, 2 * math.pi, exclude_max=True)


def test_dark_interferometers():
    draw = PhaseDraw.from_laser_phases(0.7, 0.7, 2.1, 2.1)
    modes = explicit_mode_simulation(draw, 5.0, 0.05)
    assert np.max(np.abs(modes["w"])) < 1e-15


@settings(max_examples=200, deadline=None)
@given(angles, angles, angles, angles, st.floats(0.5, 20.0), st.floats(1e-3, 1.0))
def test_mode_algebra_matches_closed_form(a, d1, d2, d3, nu, t):
    draw = PhaseDraw(a, d1, d2, d3)
    modes = explicit_mode_simulation(draw, nu, t)
    out = output_from_phases(draw, nu * t)
    assert modes.intensity("w") == pytest.approx(out.intensity, abs=1e-12)
    assert modes.intensity("w") + modes.intensity("y") == pytest.approx(modes.intensity("v"), abs=1e-12)
    if out.polarization_defined:
        ref = closed_form_amplitudes(out.intensity, out.psi, out.theta, out.phi)
        assert np.max(np.abs(modes["w"] - ref)) < 1e-12
    if out.intensity > 1e-6 and 1e-6 < out.theta < math.pi - 1e-6:
        intensity, _, theta, phi = amplitudes_to_output(modes["w"])
        assert theta == pytest.approx(out.theta, abs=1e-9)
        assert abs(wrap_angle(phi - out.phi)) < 1e-9


def test_histogram_check_small_run():
    report = pdf_histogram_check(200_000, bins=20, seed=4)
    assert report.outside_support == 0
    assert report.cells_tested > 100
    assert report.passed
    with pytest.raises(ValueError):
        pdf_histogram_check(1000)


def test_detector_sampling_is_seeded():
    ch = ChannelParams()
    a = detector_mc(0.4, 1.5, 0.2, ch, trials=10_000, seed=9)
    b = detector_mc(0.4, 1.5, 0.2, ch, trials=10_000, seed=9)
    assert a == b


def test_end_to_end_dark_channel(params):
    dark = ChannelParams(distance_km=5000.0, dark_count=0.0)
    mc = end_to_end_mc(params, dark, 1_000_000, seed=1)
    for m in ("Z", "X"):
        for j in ("s", "d", "v"):
            assert mc.gains[m][j] == 0.0
            assert mc.error_gains[m][j] == 0.0


def test_end_to_end_scaling_and_determinism(params, channel):
    one = end_to_end_mc(params, channel, 1_000_000, seed=2)
    again = end_to_end_mc(params, channel, 1_000_000, seed=2)
    assert one.gains == again.gains
    two = end_to_end_mc(params, channel, 2_000_000, seed=3)
    ratio = two.gain_se["Z"]["s"] / one.gain_se["Z"]["s"]
    assert ratio == pytest.approx(1 / math.sqrt(2), rel=0.05)
    with pytest.raises(ValueError):
        end_to_end_mc(params, channel, 10_000)
