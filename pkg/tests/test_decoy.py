import math

import numpy as np
import pytest

from passive_qkd.channel import ChannelParams, DecoyObservables, exact_n_photon
from passive_qkd.decoy import (
    DecoyProblem,
    build_problem,
    build_program,
    lower_bound_y1,
    solve_bounds,
    upper_bound_e1,
)
from passive_qkd.distance import BiasBounds
from passive_qkd.regions import PhotonStats
from passive_qkd.simplex import InfeasibleError
from passive_qkd.transmitter import WINDOW_LABELS
from reference import grid_single_photon_bound

STATS = {
    "s": (0.55, 0.30),
    "d": (0.985, 0.0145),
    "v": (0.997, 0.0029),
}


def _bias(n_cut, d1, dt1=None):
    arr = np.zeros((3, 3, n_cut + 1))
    for a in range(3):
        for b in range(3):
            if a != b:
                arr[a, b, 1:] = d1
    tilde = arr if dt1 is None else np.where(arr > 0, dt1, 0.0)
    return BiasBounds(n_cut, {"Z": arr, "X": arr}, {"Z": tilde, "X": tilde})


def _synthetic(gains, d1, n_cut=1, errors=None):
    stats = {}
    for j, (p0, p1) in STATS.items():
        probs = np.zeros(n_cut + 1)
        probs[0], probs[1] = p0, p1
        stats[j] = PhotonStats(j, probs, 1 - p0 - p1)
    errors = errors or {j: g / 20 for j, g in gains.items()}
    obs = DecoyObservables({"Z": gains, "X": gains}, {"Z": errors, "X": errors})
    return DecoyProblem(stats, obs, _bias(n_cut, d1), n_cut)


def _model(v0, v1, vh):
    """Window observables of a photon-number model with values ``v0, v1`` and ``vh`` beyond one photon."""
    return {j: p0 * v0 + p1 * v1 + (1 - p0 - p1) * vh for j, (p0, p1) in STATS.items()}


@pytest.mark.parametrize(
    "yields,errors,d1",
    [
        ((1e-3, 0.3, 0.55), (5e-4, 0.01, 0.03), 0.01),
        ((1e-3, 0.05, 0.1), (5e-4, 0.002, 0.004), 0.005),
        ((2e-4, 0.5, 0.7), (1e-4, 0.05, 0.1), 0.05),
        ((1e-3, 0.02, 0.05), (5e-4, 0.001, 0.002), 0.02),
    ],
)
def test_programs_against_grid(yields, errors, d1):
    problem = _synthetic(_model(*yields), d1, errors=_model(*errors))
    lp_value = lower_bound_y1(problem).value
    grid = grid_single_photon_bound(problem)
    assert grid >= lp_value - 1e-9
    assert grid - lp_value < 2e-3
    e_lp = upper_bound_e1(problem).value
    e_grid = grid_single_photon_bound(problem, kind="error")
    assert e_grid <= e_lp + 1e-9
    assert e_lp - e_grid < 2e-3


def test_trivial_exact_problem():
    # all yields equal to 0.1: tightly pinned up to the truncation tail
    gains = {j: 0.1 for j in WINDOW_LABELS}
    value = lower_bound_y1(_synthetic(gains, 0.0)).value
    assert 0.0 <= value <= 0.1 + 1e-12


def test_infeasible_observables_name_family():
    problem = _synthetic({"s": 0.9, "d": 0.001, "v": 0.0005}, 0.0)
    with pytest.raises(InfeasibleError) as err:
        lower_bound_y1(problem)
    assert any(f.startswith(("observable", "bias")) for f in err.value.families)


def test_program_families():
    lp = build_program(_synthetic({"s": 0.05, "d": 0.001, "v": 0.0005}, 0.01), "Z", "yield")
    fams = {row[3] for row in lp.rows}
    assert {"observable:s", "observable:d", "observable:v", "bias:sd", "bias:sv", "bias:dv", "box"} <= fams
    with pytest.raises(ValueError):
        build_program(_synthetic({"s": 0.05, "d": 0.001, "v": 0.0005}, 0.01), "Z", "other")


def test_n_cut_must_reach_single_photons():
    problem = _synthetic({"s": 0.05, "d": 0.001, "v": 0.0005}, 0.01)
    object.__setattr__(problem, "n_cut", 0)
    with pytest.raises(ValueError):
        lower_bound_y1(problem)
    with pytest.raises(ValueError):
        upper_bound_e1(problem)


def test_bounds_loosen_with_larger_bias():
    gains = {"s": 0.05, "d": 0.0012, "v": 0.00045}
    values = [lower_bound_y1(_synthetic(gains, d)).value for d in (0.0, 0.01, 0.05, 0.2)]
    assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))
    e_values = [upper_bound_e1(_synthetic(gains, d)).value for d in (0.0, 0.01, 0.05, 0.2)]
    assert all(a <= b + 1e-12 for a, b in zip(e_values, e_values[1:]))


@pytest.mark.parametrize("distance_km", [0.0, 40.0, 100.0])
def test_bounds_are_sound(params, distance_km):
    ch = ChannelParams(distance_km=distance_km)
    bounds = solve_bounds(build_problem(params, ch))
    for m in ("Z", "X"):
        y1, e1 = exact_n_photon(params, "s", 1, m, ch)
        assert bounds.y1_low[m] <= y1 + 1e-9
        assert bounds.e1_up[m] >= e1 - 1e-9
        assert bounds.y1_low[m] > 0.9 * y1


def test_truncation_order_weakly_tightens(params):
    ch = ChannelParams(distance_km=50.0)
    y = [lower_bound_y1(build_problem(params, ch, n_cut=n)).value for n in (1, 2, 3, 4)]
    # a larger truncation replaces tail slack by constrained variables
    assert all(b >= a - 1e-6 for a, b in zip(y, y[1:]))
