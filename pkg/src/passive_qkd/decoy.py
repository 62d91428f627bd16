"""Truncated decoy-state linear programs for the single-photon yield and error.

Variables are ``y_{j,n}`` (or ``e_{j,n}``) for the three windows ``j`` and
``n <= n_cut``. Each window's observable pins the truncated photon-number sum
between ``Q_j - tail_j`` and ``Q_j``, and the bias tables bound how much the same
photon number may behave differently in two windows.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams, DecoyObservables, observables
from .distance import BiasBounds, bias_bounds
from .regions import DEFAULT_QUADRATURE, PhotonStats, Quadrature, photon_number_dist
from .simplex import InfeasibleError, LinearProgram, solve
from .transmitter import SIGNAL, WINDOW_LABELS, TransmitterParams

DEFAULT_NCUT = 3


@dataclass(frozen=True)
class DecoyProblem:
    """Inputs of both programs.

    Attributes:
        stats: ``PhotonStats`` per window.
        observables: gains and error gains per basis and window.
        bias: yield and error bias tables.
        n_cut: truncation photon number.
    """

    stats: dict
    observables: DecoyObservables
    bias: BiasBounds
    n_cut: int = DEFAULT_NCUT

    def __post_init__(self) -> None:
        for j in WINDOW_LABELS:
            p = np.asarray(self.stats[j].probs)
            if p.shape[0] < self.n_cut + 1:
                raise ValueError(f"photon statistics of window {j!r} stop below n_cut")
            if np.any(p < -1e-15) or np.any(p > 1.0 + 1e-15):
                raise ValueError(f"photon probabilities of window {j!r} outside [0, 1]")
        for tables in (self.bias.delta, self.bias.delta_tilde):
            for arr in tables.values():
                if np.any(arr < -1e-15) or np.any(arr > 1.0 + 1e-12):
                    raise ValueError("bias bounds outside [0, 1]")


@dataclass(frozen=True)
class DecoyBound:
    value: float
    status: str
    objective: float
    iterations: int
    solution: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class DecoyBounds:
    """Certified ``y1_low`` and ``e1_up`` per basis."""

    y1_low: dict
    e1_up: dict
    details: dict = field(default_factory=dict, repr=False)


def _index(n_cut: int, j: str, n: int) -> int:
    return WINDOW_LABELS.index(j) * (n_cut + 1) + n


def build_program(problem: DecoyProblem, basis: str, kind: str) -> LinearProgram:
    """Constraint set of the yield (``kind="yield"``) or error (``kind="error"``) program."""
    if kind not in ("yield", "error"):
        raise ValueError(f"unknown program kind {kind!r}")
    n_cut = problem.n_cut
    nv = 3 * (n_cut + 1)
    lp = LinearProgram(nv)
    obs = problem.observables.gains if kind == "yield" else problem.observables.error_gains
    table = (problem.bias.delta if kind == "yield" else problem.bias.delta_tilde)[basis]
    for j in WINDOW_LABELS:
        st = problem.stats[j]
        row = np.zeros(nv)
        for n in range(n_cut + 1):
            row[_index(n_cut, j, n)] = st.probs[n]
        tail = max(1.0 - float(np.sum(st.probs[: n_cut + 1])), 0.0)
        target = float(obs[basis][j])
        lp.add(row, "<=", target, f"observable:{j}")
        lp.add(row, ">=", target - tail, f"observable:{j}")
    for a, j in enumerate(WINDOW_LABELS):
        for k in WINDOW_LABELS[a + 1 :]:
            for n in range(n_cut + 1):
                d = float(table[WINDOW_LABELS.index(j), WINDOW_LABELS.index(k), n])
                row = np.zeros(nv)
                row[_index(n_cut, j, n)] = 1.0
                row[_index(n_cut, k, n)] = -1.0
                lp.add(row, "<=", d, f"bias:{j}{k}")
                lp.add(-row, "<=", d, f"bias:{j}{k}")
    lp.add_upper_bounds(np.ones(nv), "box")
    return lp


def _objective(n_cut: int) -> np.ndarray:
    c = np.zeros(3 * (n_cut + 1))
    c[_index(n_cut, SIGNAL, 1)] = 1.0
    return c


def lower_bound_y1(problem: DecoyProblem, basis: str = "Z") -> DecoyBound:
    """Minimum of ``y_{s,1}`` over the yield program.

    Raises:
        InfeasibleError: naming the constraint families that cannot be met.
    """
    if problem.n_cut < 1:
        raise ValueError("n_cut must be at least 1")
    res = solve(_objective(problem.n_cut), build_program(problem, basis, "yield"))
    value = float(np.clip(res.fun, 0.0, 1.0))
    return DecoyBound(value, res.status, res.fun, res.iterations, res.x)


def upper_bound_e1(problem: DecoyProblem, basis: str = "Z") -> DecoyBound:
    """Maximum of ``e_{s,1}`` over the error program.

    Raises:
        InfeasibleError: naming the constraint families that cannot be met.
    """
    if problem.n_cut < 1:
        raise ValueError("n_cut must be at least 1")
    res = solve(_objective(problem.n_cut), build_program(problem, basis, "error"), maximize=True)
    value = float(np.clip(res.fun, 0.0, 1.0))
    return DecoyBound(value, res.status, res.fun, res.iterations, res.x)


def photon_stats(params: TransmitterParams, n_cut: int, quad: Quadrature = DEFAULT_QUADRATURE) -> dict:
    return {j: photon_number_dist(params, j, n_cut, quad=quad) for j in WINDOW_LABELS}


def build_problem(
    params: TransmitterParams,
    channel: ChannelParams,
    n_cut: int = DEFAULT_NCUT,
    quad: Quadrature = DEFAULT_QUADRATURE,
    *,
    assume_symmetry: bool = False,
    bias: BiasBounds | None = None,
) -> DecoyProblem:
    """Assemble the program inputs of a transmitter configuration and a channel."""
    return DecoyProblem(
        stats=photon_stats(params, n_cut, quad),
        observables=observables(params, channel, quad, assume_symmetry=assume_symmetry),
        bias=bias if bias is not None else bias_bounds(params, n_cut, quad, assume_symmetry=assume_symmetry),
        n_cut=n_cut,
    )


def solve_bounds(problem: DecoyProblem, bases=("Z", "X")) -> DecoyBounds:
    y_low, e_up, details = {}, {}, {}
    for m in bases:
        y = lower_bound_y1(problem, m)
        e = upper_bound_e1(problem, m)
        y_low[m], e_up[m] = y.value, e.value
        details[m] = (y, e)
    return DecoyBounds(y_low, e_up, details)


__all__ = [
    "DEFAULT_NCUT",
    "DecoyBound",
    "DecoyBounds",
    "DecoyProblem",
    "InfeasibleError",
    "PhotonStats",
    "build_problem",
    "build_program",
    "lower_bound_y1",
    "photon_stats",
    "solve_bounds",
    "upper_bound_e1",
]
