"""Closed-form physics of the passive transmitter.

Four phase-randomised coherent pulses of common intensity ``nu`` interfere in
two 50:50 beamsplitters (one per circular polarisation), are merged in a PBS
and attenuated by a beamsplitter of transmittance ``t``. Everything downstream
depends only on the product ``nu * t``.

The output pulse is described by its mean photon number ``I``, a global phase
``psi`` and a polarisation ``(theta, phi)`` on the Bloch sphere whose poles are
the right/left circular states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

#: Density of the azimuth ``phi``: uniform on (-pi, pi] and independent of (theta, I).
AZIMUTH_DENSITY = 1.0 / TWO_PI

SIGNAL, DECOY, VACUUM = "s", "d", "v"
WINDOW_LABELS = (SIGNAL, DECOY, VACUUM)


class DomainError(ValueError):
    """Raised when a point lies outside the support of the output distribution."""


@dataclass(frozen=True)
class IntensityWindows:
    """Partition of the accessible intensity range ``(0, 4 nu t)`` into three windows.

    ``v_hi`` and ``d_hi`` are fractions of ``4 nu t``: the vacuum window is
    ``(0, v_hi)``, the decoy window ``(v_hi, d_hi)`` and the signal window
    ``(d_hi, 1)``.
    """

    v_hi: float = 0.005
    d_hi: float = 0.010

    def __post_init__(self) -> None:
        if not 0.0 < self.v_hi < self.d_hi < 1.0:
            raise ValueError(
                f"window boundaries must satisfy 0 < v_hi < d_hi < 1, got {self.v_hi}, {self.d_hi}"
            )

    def fractions(self, label: str) -> tuple[float, float]:
        """Window ``label`` as a pair of fractions of ``4 nu t``."""
        if label == VACUUM:
            return 0.0, self.v_hi
        if label == DECOY:
            return self.v_hi, self.d_hi
        if label == SIGNAL:
            return self.d_hi, 1.0
        raise KeyError(f"unknown intensity window {label!r}")

    def bounds(self, label: str, nu_t: float) -> tuple[float, float]:
        """Window ``label`` in absolute intensity units."""
        lo, hi = self.fractions(label)
        return 4.0 * nu_t * lo, 4.0 * nu_t * hi


@dataclass(frozen=True)
class TransmitterParams:
    nu_t: float = 0.25
    delta_phi: float = 0.4
    delta_theta: float = 0.4
    windows: IntensityWindows = field(default_factory=IntensityWindows)

    def __post_init__(self) -> None:
        if not self.nu_t > 0.0:
            raise ValueError(f"nu_t must be positive, got {self.nu_t}")
        if not 0.0 < self.delta_phi < math.pi / 4:
            raise ValueError(f"delta_phi must lie in (0, pi/4), got {self.delta_phi}")
        if not 0.0 < self.delta_theta < math.pi / 2:
            raise ValueError(f"delta_theta must lie in (0, pi/2), got {self.delta_theta}")

    @property
    def max_intensity(self) -> float:
        return 4.0 * self.nu_t

    def with_(self, **changes) -> "TransmitterParams":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class PhaseDraw:
    """The four independent phases ``alpha`` and the differences ``delta1..3``."""

    alpha: float
    delta1: float
    delta2: float
    delta3: float

    def __post_init__(self) -> None:
        for name in ("alpha", "delta1", "delta2", "delta3"):
            value = getattr(self, name)
            if not 0.0 <= value < TWO_PI:
                raise ValueError(f"{name} must lie in [0, 2pi), got {value}")

    @classmethod
    def from_laser_phases(cls, alpha: float, beta: float, gamma: float, delta: float) -> "PhaseDraw":
        wrap = lambda a: float(np.mod(a, TWO_PI))  # noqa: E731
        return cls(wrap(alpha), wrap(beta - alpha), wrap(gamma - beta), wrap(delta - gamma))

    def laser_phases(self) -> tuple[float, float, float, float]:
        """Absolute input phases ``(alpha, beta, gamma, delta)`` (not reduced mod 2pi)."""
        beta = self.alpha + self.delta1
        gamma = beta + self.delta2
        return self.alpha, beta, gamma, gamma + self.delta3


@dataclass(frozen=True)
class OutputPulse:
    """One realisation of the transmitter output.

    When ``intensity == 0`` the polarisation is meaningless; ``theta`` is then NaN
    and ``polarization_defined`` is False.
    """

    intensity: float
    psi: float
    theta: float
    phi: float
    polarization_defined: bool = True


def wrap_angle(a):
    """Reduce angles to the interval (-pi, pi]."""
    r = np.pi - np.mod(np.pi - np.asarray(a, dtype=float), TWO_PI)
    return float(r) if np.ndim(r) == 0 else r


def output_from_phases(draw: PhaseDraw, params: TransmitterParams | float) -> OutputPulse:
    """Map a phase draw to ``(I, psi, theta, phi)`` of the attenuated output pulse.

    ``params`` may be a :class:`TransmitterParams` or the bare product ``nu*t``.
    """
    nu_t = params.nu_t if isinstance(params, TransmitterParams) else float(params)
    s1 = math.sin(draw.delta1 / 2.0)
    s3 = math.sin(draw.delta3 / 2.0)
    intensity = 2.0 * nu_t * (s1 * s1 + s3 * s3)
    psi = draw.alpha + (draw.delta1 - math.pi) / 2.0
    phi = wrap_angle(draw.delta2 + (draw.delta1 + draw.delta3) / 2.0)
    if s1 == 0.0 and s3 == 0.0:
        return OutputPulse(0.0, psi, math.nan, phi, polarization_defined=False)
    # both sines are >= 0 on [0, 2pi), so atan2 lands in [0, pi/2]
    theta = 2.0 * math.atan2(s3, s1)
    return OutputPulse(intensity, psi, theta, phi)


def outputs_from_phases(delta1, delta2, delta3, nu_t: float):
    """Vectorised ``(I, theta, phi)`` for arrays of phase differences."""
    s1 = np.sin(np.asarray(delta1) / 2.0)
    s3 = np.sin(np.asarray(delta3) / 2.0)
    intensity = 2.0 * nu_t * (s1 * s1 + s3 * s3)
    theta = 2.0 * np.arctan2(s3, s1)
    phi = wrap_angle(np.asarray(delta2) + (np.asarray(delta1) + np.asarray(delta3)) / 2.0)
    return intensity, theta, phi


def i_max(theta, nu_t: float):
    """Largest reachable intensity for polar angle ``theta``.

    Equals ``min(2 nu t / cos^2(theta/2), 2 nu t / sin^2(theta/2))``.
    """
    c2 = np.cos(np.asarray(theta, dtype=float) / 2.0) ** 2
    s2 = 1.0 - c2
    with np.errstate(divide="ignore"):
        out = 2.0 * nu_t / np.maximum(c2, s2)
    return float(out) if np.ndim(out) == 0 else out


def joint_pdf(theta, intensity, nu_t: float):
    """Joint density of ``(theta, I)`` per radian per unit intensity.

    The full density of ``(phi, theta, I)`` is this times :data:`AZIMUTH_DENSITY`.

    Raises:
        DomainError: if ``theta`` is outside [0, pi] or ``I`` outside [0, I_max(theta)).
            The density diverges on the boundary ``I = I_max(theta)``.
    """
    theta = np.asarray(theta, dtype=float)
    intensity = np.asarray(intensity, dtype=float)
    if np.any((theta < 0.0) | (theta > math.pi)):
        raise DomainError("theta must lie in [0, pi]")
    if np.any(intensity < 0.0) or np.any(intensity >= i_max(theta, nu_t)):
        raise DomainError("intensity must lie in [0, I_max(theta))")
    y = intensity / (2.0 * nu_t)
    c2 = np.cos(theta / 2.0) ** 2
    out = 1.0 / (2.0 * nu_t * math.pi**2 * np.sqrt(1.0 - y * c2) * np.sqrt(1.0 - y * (1.0 - c2)))
    return float(out) if out.ndim == 0 else out
