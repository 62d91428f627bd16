"""Post-selected n-photon polarisation states.

An n-photon state of two polarisation modes lives in the span of
``|n-k, k>`` (``n-k`` right-circular and ``k`` left-circular photons),
``k = 0..n``. Matrix index ``k`` corresponds to ``|n-k, k>``.

Averaging ``|n><n|_{theta,phi}`` over a region gives, entry ``(k, l)``::

    sqrt(C(n,k) C(n,l)) * a_{k-l} * e^{i(k-l)x} * < e^{-I} I^n/n! cos^{2n-k-l}(theta/2) sin^{k+l}(theta/2) >

with ``a_0 = dphi/pi`` and ``a_d = sin(d dphi)/(d pi)``; the bracket is a
``(theta, I)`` average. Only the phase depends on the region centre ``x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import comb

from .regions import BASIS_CENTRES, DEFAULT_QUADRATURE, Quadrature, theta_intensity_average
from .transmitter import TransmitterParams

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-12
TRACE_TOL = 1e-10


class InvalidStateError(ValueError):
    pass


@dataclass(frozen=True)
class FockMatrix:
    """Density matrix of ``n`` photons in the ``|n-k, k>`` basis."""

    n: int
    matrix: np.ndarray
    label: str = ""

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    @property
    def dim(self) -> int:
        return self.n + 1

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def check(self) -> None:
        """Raise :class:`InvalidStateError` unless Hermitian, PSD and unit trace."""
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise InvalidStateError(f"{self.label}: not Hermitian")
        lam = np.linalg.eigvalsh(m)
        if lam.min() < -PSD_TOL:
            raise InvalidStateError(f"{self.label}: negative eigenvalue {lam.min():.3e}")
        if abs(np.trace(m).real - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"{self.label}: trace {np.trace(m).real!r}")


@dataclass(frozen=True)
class DeltaS:
    """Off-diagonal magnitude of the signal single-photon state; in [0, 1/2]."""

    value: float

    def __post_init__(self) -> None:
        if not -1e-12 <= self.value <= 0.5 + 1e-12:
            raise ValueError(f"Delta_s out of range: {self.value}")

    def __float__(self) -> float:
        return float(self.value)


def _window_theta_range(params: TransmitterParams):
    return math.pi / 2 - params.delta_theta, math.pi / 2 + params.delta_theta


@lru_cache(maxsize=4096)
def _moments(nu_t, delta_theta, lo_frac, hi_frac, n_cut, quad):
    """``A[n, m] = < e^{-I} I^n/n! cos^{2n-m}(theta/2) sin^m(theta/2) >_{theta,I}`` for m <= 2n."""
    th_lo, th_hi = math.pi / 2 - delta_theta, math.pi / 2 + delta_theta
    i_lo, i_hi = 4.0 * nu_t * lo_frac, 4.0 * nu_t * hi_frac
    pairs = [(n, m) for n in range(n_cut + 1) for m in range(2 * n + 1)]

    def g(theta, intensity):
        c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
        cols = []
        for n, m in pairs:
            cols.append(np.exp(-intensity) * intensity**n / math.factorial(n) * c ** (2 * n - m) * s**m)
        return np.column_stack(cols)

    vals = theta_intensity_average(g, nu_t, th_lo, th_hi, i_lo, i_hi, quad)
    out = np.zeros((n_cut + 1, 2 * n_cut + 1))
    for (n, m), v in zip(pairs, np.atleast_1d(vals)):
        out[n, m] = v
    out.setflags(write=False)
    return out


def fock_moments(params: TransmitterParams, window: str, n_cut: int, quad: Quadrature = DEFAULT_QUADRATURE):
    lo, hi = params.windows.fractions(window)
    return _moments(params.nu_t, params.delta_theta, lo, hi, n_cut, quad)


def _phi_factor(d: int, delta_phi: float) -> float:
    if d == 0:
        return delta_phi / math.pi
    return math.sin(d * delta_phi) / (d * math.pi)


def unnormalized_matrix(params: TransmitterParams, x: float, window: str, n: int, quad=DEFAULT_QUADRATURE):
    """The unnormalised average of ``e^{-I} I^n/n! |n><n|`` over ``Omega_{x, window}``."""
    mom = fock_moments(params, window, max(n, 3), quad)[n]
    m = np.zeros((n + 1, n + 1), dtype=complex)
    for k in range(n + 1):
        for l in range(n + 1):
            d = k - l
            m[k, l] = (
                math.sqrt(comb(n, k, exact=True) * comb(n, l, exact=True))
                * _phi_factor(abs(d), params.delta_phi)
                * mom[k + l]
                * np.exp(1j * d * x)
            )
    return m


def build_fock_matrix(
    params: TransmitterParams, x: float, window: str, n: int, quad: Quadrature = DEFAULT_QUADRATURE
) -> FockMatrix:
    """Normalised n-photon state post-selected in ``Omega_{x, window}``.

    Raises:
        ValueError: if the window carries no n-photon weight (trace below 1e-300).
    """
    raw = unnormalized_matrix(params, x, window, n, quad)
    tr = np.trace(raw).real
    if not tr > 1e-300:
        raise ValueError(f"empty window {window!r} for n={n}: trace {tr!r}")
    return FockMatrix(n, raw / tr, label=f"x={x:.4f},{window},n={n}")


def basis_averaged(
    params: TransmitterParams, window: str, n: int, basis: str, quad: Quadrature = DEFAULT_QUADRATURE
) -> FockMatrix:
    """Equal mixture of the two n-photon states of ``basis``."""
    a, b = (build_fock_matrix(params, x, window, n, quad) for x in BASIS_CENTRES[basis])
    return FockMatrix(n, (a.matrix + b.matrix) / 2.0, label=f"{basis},{window},n={n}")


def phase_rotation(n: int, angle: float) -> np.ndarray:
    """Diagonal unitary ``diag(e^{i k angle})`` mapping the ``x`` state family to ``x + angle``."""
    return np.diag(np.exp(1j * angle * np.arange(n + 1)))


def delta_s(params: TransmitterParams, quad: Quadrature = DEFAULT_QUADRATURE) -> DeltaS:
    """Off-diagonal magnitude of the signal-window single-photon state.

    ``sin(dphi)/(2 dphi) * <sin(theta) e^{-I} I> / <e^{-I} I>`` over the signal
    window, both brackets being ``(theta, I)`` averages.
    """
    th_lo, th_hi = _window_theta_range(params)
    i_lo, i_hi = params.windows.bounds("s", params.nu_t)
    num, den = theta_intensity_average(
        lambda th, i: np.column_stack([np.sin(th) * np.exp(-i) * i, np.exp(-i) * i]),
        params.nu_t, th_lo, th_hi, i_lo, i_hi, quad,
    )
    if not den > 0.0:
        raise ValueError("signal window carries no single-photon weight")
    return DeltaS(math.sin(params.delta_phi) / (2.0 * params.delta_phi) * num / den)
