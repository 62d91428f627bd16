"""Asymptotic secret key rate, its baselines and the parameter search.

Both bases are used for key extraction and Bob picks each with probability
``q_M = 1/2``. For basis ``M``::

    K_M = q_M { <e^{-I} I>_{s,M} y_{s,1} [1 - h(phi_s)] - f_EC <1>_{s,M} Q_s h(E_s / Q_s) }

where ``<.>_{s,M}`` integrates over the signal-window region of the basis and
the phase-error rate ``phi_s`` of one basis comes from the single-photon bounds
of the other.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .channel import ChannelParams, exact_n_photon, n_photon_outcomes
from .decoy import DEFAULT_NCUT, build_problem, solve_bounds
from .regions import DEFAULT_QUADRATURE, AcceptanceRegion, Quadrature, theta_intensity_average
from .transmitter import SIGNAL, TransmitterParams

DEFAULT_FEC = 1.16
BOB_BASIS_PROB = 0.5
OTHER_BASIS = {"Z": "X", "X": "Z"}


def binary_entropy(p):
    """Shannon binary entropy in bits, with ``h(0) = h(1) = 0``.

    Raises:
        ValueError: if any ``p`` lies outside [0, 1].
    """
    arr = np.asarray(p, dtype=float)
    if np.any((arr < 0.0) | (arr > 1.0)) or np.any(np.isnan(arr)):
        raise ValueError("binary entropy needs p in [0, 1]")
    q = 1.0 - arr
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.where(arr > 0.0, arr * np.log2(arr), 0.0) - np.where(q > 0.0, q * np.log2(q), 0.0)
    return float(out) if out.ndim == 0 else out


def phase_error_rate(e1_up_other: float, y1_low_other: float) -> float:
    """Phase-error rate from the opposite basis' single-photon bounds, capped at 1/2.

    A vanishing yield bound leaves no certified single photons and gives 1/2.
    """
    if not y1_low_other > 0.0:
        return 0.5
    return min(max(e1_up_other, 0.0) / y1_low_other, 0.5)


@dataclass(frozen=True)
class BasisTerms:
    """Per-basis ingredients of the rate."""

    gain: float
    error_gain: float
    single_weight: float
    signal_weight: float
    y1: float
    e1: float
    phase_error: float
    rate: float

    @property
    def qber(self) -> float:
        return self.error_gain / self.gain if self.gain > 0.0 else 0.0


@dataclass(frozen=True)
class KeyRatePoint:
    """Key rate at one distance with the full provenance of its intermediates."""

    distance_km: float
    params: TransmitterParams
    n_cut: int
    f_ec: float
    q_basis: float
    terms: dict = field(repr=False)
    key_rate: float = 0.0

    @property
    def k_z(self) -> float:
        return self.terms["Z"].rate

    @property
    def k_x(self) -> float:
        return self.terms["X"].rate

    def as_dict(self) -> dict:
        out = {
            "L_km": self.distance_km,
            "nu_t": self.params.nu_t,
            "dtheta": self.params.delta_theta,
            "dphi": self.params.delta_phi,
            "v_hi": self.params.windows.v_hi,
            "d_hi": self.params.windows.d_hi,
            "n_cut": self.n_cut,
            "f_ec": self.f_ec,
            "q_basis": self.q_basis,
            "K": self.key_rate,
        }
        for m, t in self.terms.items():
            out.update({f"{k}_{m}": v for k, v in asdict(t).items()})
        return out


def signal_weights(params: TransmitterParams, basis: str, quad: Quadrature = DEFAULT_QUADRATURE):
    """``(<e^{-I} I>, <1>)`` over the signal-window region of ``basis``."""
    region = AcceptanceRegion.for_basis(params, basis, SIGNAL)
    single, total = theta_intensity_average(
        lambda th, i: np.column_stack([np.exp(-i) * i, np.ones_like(i)]),
        region.nu_t, region.theta_lo, region.theta_hi, region.i_lo, region.i_hi, quad,
    )
    return region.phi_fraction * single, region.phi_fraction * total


def rate_from_estimates(
    params: TransmitterParams,
    channel: ChannelParams,
    gains: dict,
    error_gains: dict,
    y1: dict,
    e1: dict,
    *,
    n_cut: int = DEFAULT_NCUT,
    f_ec: float = DEFAULT_FEC,
    quad: Quadrature = DEFAULT_QUADRATURE,
) -> KeyRatePoint:
    """Assemble ``K = K_Z + K_X`` from signal observables and single-photon estimates.

    ``y1`` and ``e1`` map each basis to the (bounded or exact) single-photon
    yield and error probability of the signal window.
    """
    terms = {}
    for m in ("Z", "X"):
        single, total = signal_weights(params, m, quad)
        q, e = gains[m], error_gains[m]
        other = OTHER_BASIS[m]
        phi = phase_error_rate(e1[other], y1[other])
        if q > 0.0:
            leak = f_ec * total * q * binary_entropy(min(max(e / q, 0.0), 1.0))
            raw = BOB_BASIS_PROB * (single * y1[m] * (1.0 - binary_entropy(phi)) - leak)
        else:
            raw = 0.0
        terms[m] = BasisTerms(q, e, single, total, y1[m], e1[m], phi, max(raw, 0.0))
    return KeyRatePoint(
        distance_km=channel.distance_km,
        params=params,
        n_cut=n_cut,
        f_ec=f_ec,
        q_basis=BOB_BASIS_PROB,
        terms=terms,
        key_rate=terms["Z"].rate + terms["X"].rate,
    )


def key_rate(
    params: TransmitterParams,
    channel: ChannelParams,
    *,
    n_cut: int = DEFAULT_NCUT,
    f_ec: float = DEFAULT_FEC,
    quad: Quadrature = DEFAULT_QUADRATURE,
    assume_symmetry: bool = False,
) -> KeyRatePoint:
    """Key rate with the single-photon quantities replaced by their decoy-state bounds.

    Args:
        assume_symmetry: compute only Z-basis quantities and reuse them for X.
            Without it both bases are computed independently.
    """
    problem = build_problem(params, channel, n_cut, quad, assume_symmetry=assume_symmetry)
    bounds = solve_bounds(problem, ("Z",) if assume_symmetry else ("Z", "X"))
    y1, e1 = dict(bounds.y1_low), dict(bounds.e1_up)
    if assume_symmetry:
        y1["X"], e1["X"] = y1["Z"], e1["Z"]
    obs = problem.observables
    return rate_from_estimates(
        params, channel,
        {m: obs.q(m, SIGNAL) for m in ("Z", "X")},
        {m: obs.e(m, SIGNAL) for m in ("Z", "X")},
        y1, e1, n_cut=n_cut, f_ec=f_ec, quad=quad,
    )


def perfect_estimation_rate(
    params: TransmitterParams,
    channel: ChannelParams,
    *,
    n_cut: int = DEFAULT_NCUT,
    f_ec: float = DEFAULT_FEC,
    quad: Quadrature = DEFAULT_QUADRATURE,
) -> KeyRatePoint:
    """Key rate with the exact single-photon yield and error of the channel model."""
    from .channel import observables

    obs = observables(params, channel, quad)
    y1, e1 = {}, {}
    for m in ("Z", "X"):
        y1[m], e1[m] = exact_n_photon(params, SIGNAL, 1, m, channel, quad)
    return rate_from_estimates(
        params, channel,
        {m: obs.q(m, SIGNAL) for m in ("Z", "X")},
        {m: obs.e(m, SIGNAL) for m in ("Z", "X")},
        y1, e1, n_cut=n_cut, f_ec=f_ec, quad=quad,
    )


@dataclass(frozen=True)
class ActiveRate:
    key_rate: float
    mu: float


def active_rate_at(mu: float, channel: ChannelParams, f_ec: float = DEFAULT_FEC) -> float:
    """Unclamped rate of an active transmitter sending pure, aligned states of mean ``mu``.

    Alice and Bob each pick a basis with probability 1/2, so half of the pulses sift.
    """
    pd, eta = channel.dark_count, channel.eta
    align = math.cos(channel.misalignment)
    y1, err1 = n_photon_outcomes(1, align, channel)
    q = 1.0 - (1.0 - pd) ** 2 * math.exp(-mu * eta)
    # coherent-state error with s = align, as for a pulse on the equator at phi = x
    e = 0.5 * q - 0.5 * (1.0 - pd) * (
        math.exp(-mu * eta * (1.0 - align) / 2.0) - math.exp(-mu * eta * (1.0 + align) / 2.0)
    )
    h_phase = binary_entropy(min(err1 / y1, 0.5)) if y1 > 0.0 else 1.0
    raw = mu * math.exp(-mu) * y1 * (1.0 - h_phase) - f_ec * q * binary_entropy(min(e / q, 1.0))
    return 0.5 * raw


def active_baseline_rate(channel: ChannelParams, mu_grid=None, f_ec: float = DEFAULT_FEC) -> ActiveRate:
    """Active decoy-state BB84 with exact single-photon statistics, maximised over ``mu``.

    A coarse grid brackets the optimum, which a bounded scalar search then refines.
    """
    mu_grid = np.linspace(0.02, 1.5, 75) if mu_grid is None else np.asarray(mu_grid, dtype=float)
    vals = np.array([active_rate_at(m, channel, f_ec) for m in mu_grid])
    i = int(np.argmax(vals))
    best_mu, best = float(mu_grid[i]), float(vals[i])
    lo = float(mu_grid[max(i - 1, 0)])
    hi = float(mu_grid[min(i + 1, len(mu_grid) - 1)])
    if hi > lo:
        res = minimize_scalar(lambda m: -active_rate_at(m, channel, f_ec), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-8})
        if -res.fun > best:
            best_mu, best = float(res.x), float(-res.fun)
    return ActiveRate(max(best, 0.0), best_mu)


@dataclass(frozen=True)
class SearchConfig:
    """Box and budget of the parameter search over ``(nu_t, delta_theta, delta_phi)``."""

    nu_t: tuple[float, float] = (0.05, 0.6)
    delta_theta: tuple[float, float] = (0.1, 1.4)
    delta_phi: tuple[float, float] = (0.05, 0.75)
    grid: int = 8
    max_evals: int = 200

    def __post_init__(self) -> None:
        for name in ("nu_t", "delta_theta", "delta_phi"):
            lo, hi = getattr(self, name)
            if not 0.0 < lo < hi:
                raise ValueError(f"search range {name} must satisfy 0 < lo < hi")
        if self.delta_theta[1] >= math.pi / 2 or self.delta_phi[1] >= math.pi / 4:
            raise ValueError("angular search ranges exceed the admissible widths")
        if self.grid < 1 or self.max_evals < 0:
            raise ValueError("grid must be positive and max_evals nonnegative")

    @property
    def bounds(self) -> list:
        return [self.nu_t, self.delta_theta, self.delta_phi]

    def axes(self) -> list:
        if self.grid == 1:
            return [np.array([(lo + hi) / 2.0]) for lo, hi in self.bounds]
        return [np.linspace(lo, hi, self.grid) for lo, hi in self.bounds]


@dataclass(frozen=True)
class OptimizationResult:
    point: KeyRatePoint
    grid_best: float
    evaluations: int


def optimize_parameters(
    channel: ChannelParams,
    search: SearchConfig = SearchConfig(),
    base: TransmitterParams = TransmitterParams(),
    *,
    n_cut: int = DEFAULT_NCUT,
    f_ec: float = DEFAULT_FEC,
    quad: Quadrature = DEFAULT_QUADRATURE,
) -> OptimizationResult:
    """Maximise the key rate over ``(nu_t, delta_theta, delta_phi)``.

    A full grid search is followed by a bounded Nelder-Mead refinement from the
    best grid point; the better of the two is returned, so the result never falls
    below any grid value. The search assumes the Z/X symmetry of the model; the
    returned point is re-evaluated with both bases computed independently.
    """
    cache = {}

    def rate(v) -> float:
        key = tuple(float(a) for a in v)
        if key not in cache:
            p = base.with_(nu_t=key[0], delta_theta=key[1], delta_phi=key[2])
            cache[key] = key_rate(p, channel, n_cut=n_cut, f_ec=f_ec, quad=quad, assume_symmetry=True).key_rate
        return cache[key]

    best_v, best_k = None, -math.inf
    for v in _grid_points(search):
        k = rate(v)
        if k > best_k:
            best_v, best_k = v, k
    grid_best = best_k

    if best_k > 0.0 and search.max_evals > 0:
        scale = best_k
        lo = np.array([b[0] for b in search.bounds])
        hi = np.array([b[1] for b in search.bounds])
        step = 0.5 * (hi - lo) / max(search.grid - 1, 1)
        start = np.asarray(best_v)
        simplex = [start]
        for i in range(3):
            # step inward from whichever face of the box the grid point touches
            direction = 1.0 if start[i] + step[i] <= hi[i] else -1.0
            simplex.append(start + direction * step[i] * np.eye(3)[i])
        res = minimize(
            lambda v: -rate(np.clip(v, lo, hi)) / scale,
            start,
            method="Nelder-Mead",
            bounds=search.bounds,
            options={"maxfev": search.max_evals, "initial_simplex": np.array(simplex), "xatol": 1e-4, "fatol": 1e-7},
        )
        v = tuple(np.clip(res.x, lo, hi))
        if rate(v) > best_k:
            best_v, best_k = v, rate(v)

    params = base.with_(nu_t=float(best_v[0]), delta_theta=float(best_v[1]), delta_phi=float(best_v[2]))
    point = key_rate(params, channel, n_cut=n_cut, f_ec=f_ec, quad=quad)
    return OptimizationResult(point, max(grid_best, 0.0), len(cache))


def _grid_points(search: SearchConfig):
    a, b, c = search.axes()
    for x in a:
        for y in b:
            for z in c:
                yield (float(x), float(y), float(z))
