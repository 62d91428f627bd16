"""Acceptance regions and weighted averages over the transmitter output space.

Averages ``<g>_Omega`` of a function of ``(phi, theta, I)`` weighted by the joint
output density are the workhorse of every downstream quantity. The density of
``(theta, I)`` diverges on the boundary ``I = I_max(theta)``, so the ``(theta, I)``
part is integrated in the phase-difference coordinates ``(delta1, delta3)`` on
``[0, pi]^2``, where the density is the constant ``1/pi^2`` and the divergence
disappears.

In those coordinates, with ``u = sin(delta1/2)`` and ``w = sin(delta3/2)``, a
rectangle ``theta in (a, b), I/(2 nu t) in (y_lo, y_hi)`` becomes a polar sector
of the unit square in ``(u, w)``. For fixed ``u`` the admissible ``w`` form one
interval, so the integral is iterated: Gauss-Legendre in ``delta3`` between the
exact interval ends, and a composite Gauss-Legendre rule in ``delta1`` split at
every point where the active constraint changes. Each outer panel uses the
``sin^2`` substitution, which regularises the square-root endpoint behaviour of
the interval ends (for instance where a circle meets ``w = 1``).

The azimuth factors out exactly when ``g`` does not depend on ``phi``; otherwise
a Gauss-Legendre rule over each azimuthal interval is used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from .transmitter import AZIMUTH_DENSITY, WINDOW_LABELS, TransmitterParams

#: Centres of the four BB84 acceptance regions on the equator.
X_LABELS = (0.0, math.pi, math.pi / 2, -math.pi / 2)
BASIS_CENTRES = {"Z": (0.0, math.pi), "X": (math.pi / 2, -math.pi / 2)}


@dataclass(frozen=True)
class Quadrature:
    """Node counts of the region-average rules.

    ``outer`` nodes per panel in ``delta1``, ``inner`` nodes in ``delta3``,
    ``phi`` nodes per azimuthal interval (only for ``phi``-dependent integrands).
    """

    outer: int = 24
    inner: int = 24
    phi: int = 64

    def refined(self, factor: int = 2) -> "Quadrature":
        return Quadrature(self.outer * factor, self.inner * factor, self.phi * factor)


DEFAULT_QUADRATURE = Quadrature()


@dataclass(frozen=True)
class AcceptanceRegion:
    """A union of rectangles in ``(phi, theta, I)`` sharing the ``(theta, I)`` ranges.

    Each azimuthal interval is ``(c - half_width, c + half_width)`` for ``c`` in
    ``phi_centres``, read modulo ``2 pi``.
    """

    nu_t: float
    phi_centres: tuple[float, ...]
    phi_half_width: float
    theta_lo: float
    theta_hi: float
    i_lo: float
    i_hi: float
    label: str = ""

    def __post_init__(self) -> None:
        if not 0.0 <= self.phi_half_width <= math.pi:
            raise ValueError("phi_half_width must lie in [0, pi]")
        if not 0.0 <= self.theta_lo <= self.theta_hi <= math.pi:
            raise ValueError("theta range must satisfy 0 <= lo <= hi <= pi")
        if self.i_lo < 0.0:
            raise ValueError("intensity range must be nonnegative")

    @classmethod
    def for_setting(cls, params: TransmitterParams, x: float, window: str) -> "AcceptanceRegion":
        """Region of BB84 state ``x`` (one of :data:`X_LABELS`) and intensity window ``window``."""
        i_lo, i_hi = params.windows.bounds(window, params.nu_t)
        return cls(
            nu_t=params.nu_t,
            phi_centres=(float(x),),
            phi_half_width=params.delta_phi,
            theta_lo=math.pi / 2 - params.delta_theta,
            theta_hi=math.pi / 2 + params.delta_theta,
            i_lo=i_lo,
            i_hi=i_hi,
            label=f"x={x:.4f},{window}",
        )

    @classmethod
    def for_basis(cls, params: TransmitterParams, basis: str, window: str) -> "AcceptanceRegion":
        """Basis region: union of the two ``x`` regions of ``basis`` ("Z" or "X")."""
        single = cls.for_setting(params, BASIS_CENTRES[basis][0], window)
        return cls(
            nu_t=single.nu_t,
            phi_centres=BASIS_CENTRES[basis],
            phi_half_width=single.phi_half_width,
            theta_lo=single.theta_lo,
            theta_hi=single.theta_hi,
            i_lo=single.i_lo,
            i_hi=single.i_hi,
            label=f"{basis},{window}",
        )

    @classmethod
    def full_space(cls, nu_t: float) -> "AcceptanceRegion":
        return cls(nu_t, (0.0,), math.pi, 0.0, math.pi, 0.0, 4.0 * nu_t, label="full")

    @property
    def phi_fraction(self) -> float:
        """Azimuthal probability mass of the region (exact)."""
        return len(self.phi_centres) * 2.0 * self.phi_half_width * AZIMUTH_DENSITY


@dataclass(frozen=True)
class PhotonStats:
    """Conditional photon-number distribution ``p(n | window)`` truncated at ``n_cut``."""

    window: str
    probs: np.ndarray = field(repr=False)
    tail: float = 0.0

    @property
    def n_cut(self) -> int:
        return len(self.probs) - 1


def _panel_breakpoints(tan_lo, tan_hi, cos_lo, cos_hi, y_lo, y_hi) -> np.ndarray:
    """Values of ``delta1`` where the admissible ``w``-interval changes form."""
    r_lo, r_hi = math.sqrt(y_lo), math.sqrt(y_hi)
    cands = [r_lo * cos_lo, r_hi * cos_lo, r_lo, r_lo * cos_hi, r_hi, r_hi * cos_hi]
    if tan_lo > 0.0:
        cands.append(1.0 / tan_lo)
    if math.isfinite(tan_hi):
        cands.append(1.0 / tan_hi)
    if y_lo > 1.0:
        cands.append(math.sqrt(y_lo - 1.0))
    if y_hi > 1.0:
        cands.append(math.sqrt(y_hi - 1.0))
    u = np.array([c for c in cands if 0.0 < c < 1.0])
    pts = np.concatenate([[0.0, math.pi], 2.0 * np.arcsin(u)])
    pts = np.unique(pts)
    keep = np.concatenate([[True], np.diff(pts) > 1e-14])
    return pts[keep]


@lru_cache(maxsize=4096)
def _gl01(n: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = leggauss(n)
    return (t + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=2048)
def _polar_grid(nu_t, theta_lo, theta_hi, y_lo, y_hi, outer, inner):
    """Flattened ``(theta, I, weight)`` nodes; ``sum(weight * g)`` integrates ``g f``."""
    chi_lo, chi_hi = theta_lo / 2.0, theta_hi / 2.0
    tan_lo = math.tan(chi_lo)
    tan_hi = math.inf if chi_hi >= math.pi / 2 - 1e-15 else math.tan(chi_hi)
    pts = _panel_breakpoints(tan_lo, tan_hi, math.cos(chi_lo), math.cos(chi_hi), y_lo, y_hi)

    t, w = _gl01(outer)
    s = np.sin(np.pi * t / 2.0) ** 2
    ds = (np.pi / 2.0) * np.sin(np.pi * t) * w
    a, b = pts[:-1, None], pts[1:, None]
    d1 = (a + (b - a) * s).ravel()
    w1 = ((b - a) * ds).ravel()

    u = np.sin(d1 / 2.0)
    w_lo = np.maximum(u * tan_lo, np.sqrt(np.maximum(y_lo - u * u, 0.0)))
    w_hi = np.minimum(1.0, np.sqrt(np.maximum(y_hi - u * u, 0.0)))
    if math.isfinite(tan_hi):
        w_hi = np.minimum(w_hi, u * tan_hi)
    w_lo = np.minimum(w_lo, 1.0)
    d3_lo = 2.0 * np.arcsin(w_lo)
    span = np.maximum(2.0 * np.arcsin(w_hi) - d3_lo, 0.0)
    live = span > 0.0
    d3_lo, span, u, w1 = d3_lo[live], span[live], u[live], w1[live]

    t3, w3 = _gl01(inner)
    d3 = d3_lo[:, None] + span[:, None] * t3
    ww = np.sin(d3 / 2.0)
    uu = np.broadcast_to(u[:, None], ww.shape)
    theta = 2.0 * np.arctan2(ww, uu)
    intensity = 2.0 * nu_t * (uu * uu + ww * ww)
    weight = (w1 * span)[:, None] * w3 / math.pi**2
    out = (theta.ravel(), intensity.ravel(), weight.ravel())
    for arr in out:
        arr.setflags(write=False)
    return out


def theta_intensity_nodes(nu_t, theta_lo, theta_hi, i_lo, i_hi, quad: Quadrature = DEFAULT_QUADRATURE):
    """Quadrature nodes for ``int dtheta dI f_{theta,I}(theta, I) g(theta, I)``.

    Returns read-only flat arrays ``(theta, I, weight)``. Empty ranges give empty arrays.
    """
    y_lo = max(i_lo, 0.0) / (2.0 * nu_t)
    y_hi = min(i_hi / (2.0 * nu_t), 2.0)
    if y_hi <= y_lo or theta_hi <= theta_lo:
        empty = np.zeros(0)
        return empty, empty, empty
    return _polar_grid(
        float(nu_t), float(theta_lo), float(theta_hi), float(y_lo), float(y_hi), quad.outer, quad.inner
    )


def theta_intensity_average(g, nu_t, theta_lo, theta_hi, i_lo, i_hi, quad: Quadrature = DEFAULT_QUADRATURE):
    """``int int g(theta, I) f(theta, I) dtheta dI`` over a rectangle.

    ``g`` is called once with flat node arrays and may return a trailing axis of
    several integrands, in which case the result is a vector.
    """
    theta, intensity, weight = theta_intensity_nodes(nu_t, theta_lo, theta_hi, i_lo, i_hi, quad)
    if weight.size == 0:
        probe = np.asarray(g(np.full(1, math.pi / 2), np.zeros(1)))
        return 0.0 if probe.ndim <= 1 else np.zeros(probe.shape[1:])
    vals = np.asarray(g(theta, intensity), dtype=float)
    if vals.ndim == 0:
        vals = np.full(weight.shape, float(vals))
    return np.tensordot(weight, vals, axes=(0, 0))


def region_average(
    g: Callable,
    region: AcceptanceRegion,
    *,
    depends_on_phi: bool = False,
    quad: Quadrature = DEFAULT_QUADRATURE,
):
    """Integral of ``g`` weighted by the output density over ``region``.

    Args:
        g: ``g(theta, I)`` or, with ``depends_on_phi``, ``g(phi, theta, I)``;
            vectorised over numpy arrays.
        region: acceptance region.
        depends_on_phi: whether ``g`` depends on the azimuth. If not, the azimuthal
            integral is the exact factor ``region.phi_fraction``.
        quad: node counts.
    """
    if not depends_on_phi:
        inner = theta_intensity_average(
            g, region.nu_t, region.theta_lo, region.theta_hi, region.i_lo, region.i_hi, quad
        )
        return region.phi_fraction * inner

    theta, intensity, weight = theta_intensity_nodes(
        region.nu_t, region.theta_lo, region.theta_hi, region.i_lo, region.i_hi, quad
    )
    if weight.size == 0 or region.phi_half_width == 0.0:
        return 0.0
    t, w = leggauss(quad.phi)
    total = 0.0
    for centre in region.phi_centres:
        phi = centre + region.phi_half_width * t
        phi_w = region.phi_half_width * w * AZIMUTH_DENSITY
        vals = np.asarray(g(phi[:, None], theta[None, :], intensity[None, :]), dtype=float)
        total = total + np.tensordot(phi_w, np.tensordot(vals, weight, axes=(1, 0)), axes=(0, 0))
    return total


def region_probability(region: AcceptanceRegion, quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """Probability that the output lies in ``region`` (sums the constituents of basis regions)."""
    return float(region_average(lambda th, i: np.ones_like(i), region, quad=quad))


def photon_number_dist(
    params: TransmitterParams,
    window: str,
    n_cut: int,
    *,
    x: float = 0.0,
    quad: Quadrature = DEFAULT_QUADRATURE,
) -> PhotonStats:
    """Photon-number statistics ``p(n | Omega_{x, window})`` for ``n <= n_cut``.

    The result does not depend on ``x``; the argument exists so that the
    independence can be checked.

    Raises:
        ValueError: if ``n_cut < 0`` or the window has zero probability.
    """
    if n_cut < 0:
        raise ValueError("n_cut must be nonnegative")
    region = AcceptanceRegion.for_setting(params, x, window)
    n = np.arange(n_cut + 1)
    log_fact = np.array([math.lgamma(k + 1.0) for k in n])

    def g(theta, intensity):
        with np.errstate(divide="ignore"):
            log_i = np.log(intensity)[:, None]
        poisson = np.exp(-intensity[:, None] + n * log_i - log_fact)
        poisson[:, 0] = np.exp(-intensity)
        return np.column_stack([np.ones_like(intensity), poisson])

    vals = region_average(g, region, quad=quad)
    norm = float(vals[0])
    if not norm > 0.0:
        raise ValueError(f"intensity window {window!r} has zero probability")
    probs = vals[1:] / norm
    return PhotonStats(window=window, probs=probs, tail=float(1.0 - probs.sum()))


def window_probabilities(params: TransmitterParams, quad: Quadrature = DEFAULT_QUADRATURE) -> dict:
    """``<1>`` of every single-``x`` region, keyed by ``(x, window)``."""
    return {
        (x, j): region_probability(AcceptanceRegion.for_setting(params, x, j), quad)
        for x in X_LABELS
        for j in WINDOW_LABELS
    }
