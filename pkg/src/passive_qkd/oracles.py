"""Independent Monte-Carlo and linear-optics oracles.

Nothing in the analytic pipeline imports this module. Every routine takes an
explicit seed for ``numpy.random.default_rng`` and records it in its report.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.stats import kstest

from .channel import ChannelParams
from .regions import BASIS_CENTRES
from .transmitter import (
    TWO_PI,
    WINDOW_LABELS,
    PhaseDraw,
    TransmitterParams,
    i_max,
    joint_pdf,
    outputs_from_phases,
    wrap_angle,
)

INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class ModeAmplitudes:
    """Coherent amplitudes ``(R, L)`` of every spatial mode of the transmitter.

    Top arm: inputs ``a``, ``b``; outputs ``c`` (used) and ``d``. Bottom arm:
    inputs ``g``, ``h``; outputs ``r`` (used) and ``s``. ``v`` leaves the PBS and
    the attenuator splits it into ``w`` (to the channel) and ``y``.
    """

    modes: dict

    def __getitem__(self, name: str) -> np.ndarray:
        return self.modes[name]

    def intensity(self, name: str) -> float:
        return float(np.sum(np.abs(self.modes[name]) ** 2))


def _beamsplitter(in1: np.ndarray, in2: np.ndarray):
    """50:50 map ``in1^+ -> (c^+ + d^+)/sqrt2``, ``in2^+ -> (d^+ - c^+)/sqrt2``; returns ``(c, d)``."""
    return INV_SQRT2 * (in1 - in2), INV_SQRT2 * (in1 + in2)


def explicit_mode_simulation(draw: PhaseDraw, nu: float, t: float) -> ModeAmplitudes:
    """Propagate the four input amplitudes through both beamsplitters, the PBS and the attenuator."""
    if not nu > 0.0 or not 0.0 < t <= 1.0:
        raise ValueError("need nu > 0 and t in (0, 1]")
    alpha, beta, gamma, delta = draw.laser_phases()
    amp = math.sqrt(nu)
    zero = 0.0 + 0.0j
    a = np.array([amp * np.exp(1j * alpha), zero])
    b = np.array([amp * np.exp(1j * beta), zero])
    g = np.array([zero, amp * np.exp(1j * gamma)])
    h = np.array([zero, amp * np.exp(1j * delta)])
    c, d = _beamsplitter(a, b)
    r, s = _beamsplitter(g, h)
    # the PBS transmits the R component of c and reflects the L component of r into v
    v = np.array([c[0], r[1]])
    w = math.sqrt(t) * v
    y = math.sqrt(1.0 - t) * v
    return ModeAmplitudes({"a": a, "b": b, "c": c, "d": d, "g": g, "h": h, "r": r, "s": s, "v": v, "w": w, "y": y})


def closed_form_amplitudes(intensity: float, psi: float, theta: float, phi: float) -> np.ndarray:
    """``sqrt(I) e^{i psi} (cos(theta/2), e^{i phi} sin(theta/2))``."""
    pre = math.sqrt(intensity) * np.exp(1j * psi)
    return np.array([pre * math.cos(theta / 2.0), pre * np.exp(1j * phi) * math.sin(theta / 2.0)])


def amplitudes_to_output(amps) -> tuple[float, float, float, float]:
    """Recover ``(I, psi, theta, phi)`` from an ``(R, L)`` amplitude pair."""
    amp_r, amp_l = complex(amps[0]), complex(amps[1])
    intensity = abs(amp_r) ** 2 + abs(amp_l) ** 2
    theta = 2.0 * math.atan2(abs(amp_l), abs(amp_r))
    psi = math.atan2(amp_r.imag, amp_r.real)
    phi = wrap_angle(math.atan2(amp_l.imag, amp_l.real) - psi)
    return intensity, psi, theta, phi


@dataclass(frozen=True)
class HistogramReport:
    seed: int
    samples: int
    bins: int
    cells_tested: int
    max_abs_z: float
    outside_support: int
    ks_statistic: float
    ks_pvalue: float
    z_limit: float = 5.0
    ks_level: float = 0.01

    @property
    def passed(self) -> bool:
        return self.max_abs_z < self.z_limit and self.outside_support == 0 and self.ks_pvalue > self.ks_level


def _cell_probability(theta_lo, theta_hi, y_lo, y_hi, nu_t, nodes: int = 8) -> float:
    """Tensor Gauss-Legendre integral of the closed-form density over one interior cell."""
    t, w = leggauss(nodes)
    th = (theta_lo + theta_hi) / 2.0 + (theta_hi - theta_lo) / 2.0 * t
    ii = 2.0 * nu_t * ((y_lo + y_hi) / 2.0 + (y_hi - y_lo) / 2.0 * t)
    dens = joint_pdf(th[:, None], ii[None, :], nu_t)
    jac = (theta_hi - theta_lo) / 2.0 * 2.0 * nu_t * (y_hi - y_lo) / 2.0
    return float(w @ dens @ w) * jac


def pdf_histogram_check(
    samples: int = 1_000_000, bins: int = 40, *, nu_t: float = 0.25, seed: int = 0
) -> HistogramReport:
    """Compare a histogram of sampled ``(theta, I/2 nu t)`` with the closed-form density.

    Cells on a ``bins x bins`` grid over ``[0, pi] x [0, 2]`` are tested only when
    they lie at least one cell height below the support edge ``I_max(theta)``,
    where the density diverges.
    """
    if samples < 100_000:
        raise ValueError("need at least 1e5 samples")
    rng = np.random.default_rng(seed)
    d1, d2, d3 = rng.uniform(0.0, TWO_PI, size=(3, samples))
    intensity, theta, phi = outputs_from_phases(d1, d2, d3, nu_t)
    outside = int(np.count_nonzero(intensity >= i_max(theta, nu_t)))
    y = intensity / (2.0 * nu_t)
    th_edges = np.linspace(0.0, math.pi, bins + 1)
    y_edges = np.linspace(0.0, 2.0, bins + 1)
    counts, _, _ = np.histogram2d(theta, y, bins=[th_edges, y_edges])
    dy = y_edges[1] - y_edges[0]
    worst, tested = 0.0, 0
    for a in range(bins):
        y_cap = min(i_max(th_edges[a], nu_t), i_max(th_edges[a + 1], nu_t)) / (2.0 * nu_t)
        for b in range(bins):
            if y_edges[b + 1] + dy > y_cap:
                continue
            p = _cell_probability(th_edges[a], th_edges[a + 1], y_edges[b], y_edges[b + 1], nu_t)
            z = (counts[a, b] - samples * p) / math.sqrt(samples * p * (1.0 - p))
            worst = max(worst, abs(z))
            tested += 1
    ks = kstest(phi, "uniform", args=(-math.pi, TWO_PI))
    return HistogramReport(seed, samples, bins, tested, worst, outside, float(ks.statistic), float(ks.pvalue))


def _simulate_detection(rng, intensity, s, channel: ChannelParams):
    """Sample click and error indicators for pulses with alignment ``s`` toward the sent state."""
    eta, pd = channel.eta, channel.dark_count
    photons = rng.poisson(intensity)
    detected = rng.binomial(photons, eta)
    correct = rng.binomial(detected, (1.0 + s) / 2.0)
    wrong = detected - correct
    click_c = (correct > 0) | (rng.random(intensity.shape) < pd)
    click_w = (wrong > 0) | (rng.random(intensity.shape) < pd)
    double = click_c & click_w
    error = (click_w & ~click_c) | (double & (rng.random(intensity.shape) < 0.5))
    return click_c | click_w, error


@dataclass(frozen=True)
class DetectorEstimate:
    click: float
    click_se: float
    error: float
    error_se: float
    trials: int


def _estimate(clicks, errors) -> DetectorEstimate:
    n = clicks.size
    pc, pe = clicks.mean(), errors.mean()
    se = lambda p: math.sqrt(max(p * (1.0 - p), 0.0) / n) if n else math.nan  # noqa: E731
    return DetectorEstimate(float(pc), se(pc), float(pe), se(pe), int(n))


def detector_mc(
    intensity: float, theta: float, phi: float, channel: ChannelParams, trials: int = 1_000_000, *, x: float = 0.0,
    seed: int = 0,
) -> DetectorEstimate:
    """Click and error frequencies of one fixed pulse, sampled photon by photon."""
    rng = np.random.default_rng(seed)
    s = math.sin(theta) * math.cos(phi - x - channel.misalignment)
    clicks, errors = _simulate_detection(rng, np.full(trials, float(intensity)), np.full(trials, s), channel)
    return _estimate(clicks, errors)


@dataclass(frozen=True)
class MCObservables:
    """Empirical gains and error gains with their standard errors, per basis and window."""

    seed: int
    samples: int
    gains: dict = field(default_factory=dict)
    gain_se: dict = field(default_factory=dict)
    error_gains: dict = field(default_factory=dict)
    error_se: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)


def end_to_end_mc(
    params: TransmitterParams, channel: ChannelParams, samples: int = 1_000_000, *, seed: int = 0,
    chunk: int = 1_000_000,
) -> MCObservables:
    """Sample transmitter draws, post-select them into regions and simulate detection."""
    if samples < 1_000_000:
        raise ValueError("need at least 1e6 samples")
    rng = np.random.default_rng(seed)
    clicks = {(m, j): 0 for m in BASIS_CENTRES for j in WINDOW_LABELS}
    errs = dict(clicks)
    totals = dict(clicks)
    done = 0
    while done < samples:
        size = min(chunk, samples - done)
        d1, d2, d3 = rng.uniform(0.0, TWO_PI, size=(3, size))
        intensity, theta, phi = outputs_from_phases(d1, d2, d3, params.nu_t)
        theta_ok = np.abs(theta - math.pi / 2) < params.delta_theta
        for m, centres in BASIS_CENTRES.items():
            for x in centres:
                sel_phi = theta_ok & (np.abs(wrap_angle(phi - x)) < params.delta_phi)
                for j in WINDOW_LABELS:
                    lo, hi = params.windows.bounds(j, params.nu_t)
                    sel = sel_phi & (intensity > lo) & (intensity < hi)
                    if not np.any(sel):
                        continue
                    s = np.sin(theta[sel]) * np.cos(phi[sel] - x - channel.misalignment)
                    c, e = _simulate_detection(rng, intensity[sel], s, channel)
                    clicks[m, j] += int(c.sum())
                    errs[m, j] += int(e.sum())
                    totals[m, j] += int(sel.sum())
        done += size
    out = MCObservables(seed=seed, samples=samples)
    for m in BASIS_CENTRES:
        for key in ("gains", "gain_se", "error_gains", "error_se", "counts"):
            getattr(out, key)[m] = {}
        for j in WINDOW_LABELS:
            n = totals[m, j]
            q = clicks[m, j] / n if n else math.nan
            e = errs[m, j] / n if n else math.nan
            out.gains[m][j], out.error_gains[m][j] = q, e
            out.gain_se[m][j] = math.sqrt(q * (1.0 - q) / n) if n else math.nan
            out.error_se[m][j] = math.sqrt(e * (1.0 - e) / n) if n else math.nan
            out.counts[m][j] = n
    return out
