"""Lossy channel followed by a passive-basis BB84 receiver with threshold detectors.

A pulse of mean photon number ``I`` and polarisation ``(theta, phi)`` sent in the
region of BB84 state ``x`` reaches two threshold detectors of the matching basis.
Each photon is lost with probability ``1 - eta`` and otherwise lands in the
correct detector with probability ``q = (1 + sin(theta) cos(phi - x)) / 2``.
Dark counts fire independently with probability ``p_d`` per detector and double
clicks are assigned a random bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import iv

from .regions import (
    BASIS_CENTRES,
    DEFAULT_QUADRATURE,
    AcceptanceRegion,
    Quadrature,
    region_average,
    theta_intensity_average,
)
from .transmitter import WINDOW_LABELS, TransmitterParams

SYMMETRY_TOL = 1e-9
#: Odd Bessel orders kept in the azimuthal series of the error gain.
BESSEL_ORDERS = np.arange(1, 32, 2)


@dataclass(frozen=True)
class ChannelParams:
    """Fibre link and detector parameters.

    Attributes:
        attenuation_db_km: fibre loss in dB/km.
        distance_km: link length.
        detector_efficiency: detection efficiency, in (0, 1].
        dark_count: dark-count probability per detector and pulse, in [0, 1).
        misalignment: extra polarisation rotation about the equator (radians) applied
            by the channel; 0 means a perfectly aligned link.
    """

    attenuation_db_km: float = 0.2
    distance_km: float = 0.0
    detector_efficiency: float = 0.65
    dark_count: float = 1e-6
    misalignment: float = 0.0

    def __post_init__(self) -> None:
        if self.attenuation_db_km < 0.0:
            raise ValueError("attenuation must be nonnegative")
        if self.distance_km < 0.0:
            raise ValueError("distance must be nonnegative")
        if not 0.0 < self.detector_efficiency <= 1.0:
            raise ValueError("detector efficiency must lie in (0, 1]")
        if not 0.0 <= self.dark_count < 1.0:
            raise ValueError("dark-count probability must lie in [0, 1)")

    @property
    def channel_transmittance(self) -> float:
        return 10.0 ** (-self.attenuation_db_km * self.distance_km / 10.0)

    @property
    def eta(self) -> float:
        return self.channel_transmittance * self.detector_efficiency

    def at_distance(self, distance_km: float) -> "ChannelParams":
        from dataclasses import replace

        return replace(self, distance_km=float(distance_km))


@dataclass(frozen=True)
class DecoyObservables:
    """Gains ``Q[basis][window]`` and error gains ``E[basis][window]``, both per post-selected pulse."""

    gains: dict
    error_gains: dict

    def __post_init__(self) -> None:
        for basis, per_window in self.gains.items():
            for j, q in per_window.items():
                e = self.error_gains[basis][j]
                if not (-1e-15 <= e <= q + 1e-15 and q <= 1.0 + 1e-15):
                    raise ValueError(f"inconsistent observables for {basis},{j}: Q={q}, E={e}")

    def q(self, basis: str, window: str) -> float:
        return self.gains[basis][window]

    def e(self, basis: str, window: str) -> float:
        return self.error_gains[basis][window]

    def qber(self, basis: str, window: str) -> float:
        q = self.gains[basis][window]
        return self.error_gains[basis][window] / q if q > 0.0 else 0.0


def click_prob(intensity, channel: ChannelParams):
    """Probability that at least one detector clicks."""
    pd = channel.dark_count
    return 1.0 - (1.0 - pd) ** 2 * np.exp(-np.asarray(intensity) * channel.eta)


def error_prob(intensity, theta, phi, channel: ChannelParams, x: float = 0.0):
    """Probability of a bit error for a pulse sent in the region of state ``x``."""
    pd, eta = channel.dark_count, channel.eta
    intensity = np.asarray(intensity, dtype=float)
    s = np.sin(theta) * np.cos(np.asarray(phi) - x - channel.misalignment)
    ie = intensity * eta
    return 0.5 * (1.0 - (1.0 - pd) ** 2 * np.exp(-ie)) - 0.5 * (1.0 - pd) * (
        np.exp(-ie * (1.0 - s) / 2.0) - np.exp(-ie * (1.0 + s) / 2.0)
    )


def _error_gain_generic(params, channel, window, centres, quad) -> tuple[float, float]:
    """``(<1>, <err>)`` summed over single-``x`` regions, with error relative to each centre."""
    norm = err = 0.0
    for x in centres:
        region = AcceptanceRegion.for_setting(params, x, window)
        norm += region_average(lambda th, i: np.ones_like(i), region, quad=quad)
        err += region_average(
            lambda ph, th, i, x=x: error_prob(i, th, ph, channel, x), region, depends_on_phi=True, quad=quad
        )
    return norm, err


def _error_gain_series(params, channel, window, quad) -> tuple[float, float]:
    """``(<1>, <err>)`` over ``Omega_{0, window}`` with the azimuth integrated analytically.

    Uses ``2 sinh(c cos a) = 4 sum_{k odd} I_k(c) cos(k a)``.
    """
    pd, eta, dphi = channel.dark_count, channel.eta, params.delta_phi
    region = AcceptanceRegion.for_setting(params, 0.0, window)
    k = BESSEL_ORDERS
    coeff = 4.0 / (math.pi * k) * np.sin(k * dphi) * np.cos(k * channel.misalignment)

    def g(theta, intensity):
        ie = intensity * eta
        c = ie * np.sin(theta) / 2.0
        bessel = iv(k[None, :], c[:, None]) @ coeff
        return np.column_stack([np.ones_like(intensity), np.exp(-ie), np.exp(-ie / 2.0) * bessel])

    one, att, osc = theta_intensity_average(
        g, region.nu_t, region.theta_lo, region.theta_hi, region.i_lo, region.i_hi, quad
    )
    frac = region.phi_fraction
    # the series already carries the azimuthal density and interval
    err = frac * 0.5 * (one - (1.0 - pd) ** 2 * att) - 0.5 * (1.0 - pd) * osc
    return frac * one, err


def _gain(params, channel, basis, window, quad) -> float:
    region = AcceptanceRegion.for_basis(params, basis, window)
    one, att = theta_intensity_average(
        lambda th, i: np.column_stack([np.ones_like(i), np.exp(-i * channel.eta)]),
        region.nu_t, region.theta_lo, region.theta_hi, region.i_lo, region.i_hi, quad,
    )
    if not one > 0.0:
        raise ValueError(f"empty window {window!r}")
    return float(1.0 - (1.0 - channel.dark_count) ** 2 * att / one)


def observables(
    params: TransmitterParams,
    channel: ChannelParams,
    quad: Quadrature = DEFAULT_QUADRATURE,
    *,
    assume_symmetry: bool = False,
) -> DecoyObservables:
    """Gains and error gains for every basis and window.

    The Z error gain averages over the ``x = 0`` region with the azimuth integrated
    by a Bessel series; the X error gain averages over both X regions by direct
    azimuthal quadrature. The two routes must agree within 1e-9.

    Args:
        assume_symmetry: skip the X-basis computation and copy the Z values.

    Raises:
        ValueError: on an empty window or when the two bases disagree.
    """
    gains, errors = {"Z": {}, "X": {}}, {"Z": {}, "X": {}}
    for j in WINDOW_LABELS:
        gains["Z"][j] = _gain(params, channel, "Z", j, quad)
        norm, err = _error_gain_series(params, channel, j, quad)
        errors["Z"][j] = float(err / norm)
        if assume_symmetry:
            gains["X"][j], errors["X"][j] = gains["Z"][j], errors["Z"][j]
            continue
        gains["X"][j] = _gain(params, channel, "X", j, quad)
        norm, err = _error_gain_generic(params, channel, j, BASIS_CENTRES["X"], quad)
        errors["X"][j] = float(err / norm)
        for kind, table in (("gain", gains), ("error gain", errors)):
            gap = abs(table["X"][j] - table["Z"][j])
            if gap > SYMMETRY_TOL:
                raise ValueError(f"{kind} of window {j!r} differs between bases by {gap:.3e}")
    return DecoyObservables(gains, errors)


def n_photon_outcomes(n, s, channel: ChannelParams):
    """Click and error probabilities of an ``n``-photon state with alignment ``s = 2q - 1``."""
    pd, eta = channel.dark_count, channel.eta
    q = (1.0 + np.asarray(s)) / 2.0
    a = (1.0 - pd) * (1.0 - eta * (1.0 - q)) ** n
    b = (1.0 - pd) * (1.0 - eta * q) ** n
    c = (1.0 - pd) ** 2 * (1.0 - eta) ** n
    return 1.0 - c, 0.5 * (1.0 - a + b - c)


def exact_n_photon(
    params: TransmitterParams,
    window: str,
    n: int,
    basis: str,
    channel: ChannelParams,
    quad: Quadrature = DEFAULT_QUADRATURE,
) -> tuple[float, float]:
    """Yield and error probability of the ``n``-photon component of ``(basis, window)``.

    The error is averaged over both regions of the basis, each relative to its own
    state, with weight ``e^{-I} I^n / n!``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    yld = 1.0 - (1.0 - channel.dark_count) ** 2 * (1.0 - channel.eta) ** n
    log_fact = math.lgamma(n + 1.0)

    def weight(i):
        if n == 0:
            return np.exp(-i)
        with np.errstate(divide="ignore"):
            return np.exp(-i + n * np.log(i) - log_fact)

    norm = err = 0.0
    for x in BASIS_CENTRES[basis]:
        region = AcceptanceRegion.for_setting(params, x, window)
        norm += region_average(lambda th, i: weight(i), region, quad=quad)

        def g(ph, th, i, x=x):
            s = np.sin(th) * np.cos(ph - x - channel.misalignment)
            return weight(i) * n_photon_outcomes(n, s, channel)[1]

        err += region_average(g, region, depends_on_phi=True, quad=quad)
    if not norm > 0.0:
        raise ValueError(f"window {window!r} carries no {n}-photon weight")
    return float(yld), float(err / norm)
