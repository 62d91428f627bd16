"""Trace distance and the bias bounds of the decoy-state programs.

For two states the trace distance bounds how differently any measurement can
behave on them. Here it caps how much the yields (``Delta``) and error
probabilities (``Delta~``) of the same photon number may differ between two
intensity windows.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .fock import basis_averaged, build_fock_matrix
from .regions import BASIS_CENTRES, DEFAULT_QUADRATURE, Quadrature
from .transmitter import WINDOW_LABELS, TransmitterParams

SYMMETRY_TOL = 1e-12


class SymmetryError(AssertionError):
    """Bases that must agree by azimuthal symmetry produced different tables."""


def trace_distance(a, b) -> float:
    """``D(A, B) = (1/2) sum_i |lambda_i(A - B)|`` for Hermitian ``A`` and ``B``.

    Accepts arrays or :class:`~passive_qkd.fock.FockMatrix` instances.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    lam = np.linalg.eigvalsh(a - b)
    return 0.5 * float(np.abs(lam).sum())


@dataclass(frozen=True)
class BiasBounds:
    """Bias tables indexed ``[j, k, n]`` with ``j, k`` in ``WINDOW_LABELS`` order.

    ``delta[basis]`` bounds yield differences, ``delta_tilde[basis]`` error differences.
    """

    n_cut: int
    delta: dict = field(default_factory=dict)
    delta_tilde: dict = field(default_factory=dict)

    def yield_bound(self, basis: str, j: str, k: str, n: int) -> float:
        return float(self.delta[basis][WINDOW_LABELS.index(j), WINDOW_LABELS.index(k), n])

    def error_bound(self, basis: str, j: str, k: str, n: int) -> float:
        return float(self.delta_tilde[basis][WINDOW_LABELS.index(j), WINDOW_LABELS.index(k), n])


def _pairwise(states_by_window: dict, n_cut: int) -> np.ndarray:
    table = np.zeros((3, 3, n_cut + 1))
    for n in range(n_cut + 1):
        for a in range(3):
            for b in range(a + 1, 3):
                d = trace_distance(states_by_window[WINDOW_LABELS[a], n], states_by_window[WINDOW_LABELS[b], n])
                table[a, b, n] = table[b, a, n] = d
    return table


def yield_bias_table(
    params: TransmitterParams,
    n_cut: int,
    quad: Quadrature = DEFAULT_QUADRATURE,
    *,
    tol: float = SYMMETRY_TOL,
    assume_symmetry: bool = False,
) -> dict:
    """``Delta[basis][j, k, n]``: trace distance of the basis-averaged n-photon states.

    With ``assume_symmetry`` only the Z table is computed and reused for X.
    """
    tables = {}
    for basis in ("Z",) if assume_symmetry else BASIS_CENTRES:
        states = {(j, n): basis_averaged(params, j, n, basis, quad) for j in WINDOW_LABELS for n in range(n_cut + 1)}
        tables[basis] = _pairwise(states, n_cut)
    if assume_symmetry:
        tables["X"] = tables["Z"]
    gap = np.max(np.abs(tables["X"] - tables["Z"]))
    if gap > tol:
        raise SymmetryError(f"yield bias tables differ between bases by {gap:.3e}")
    return tables


def error_bias_table(
    params: TransmitterParams,
    n_cut: int,
    quad: Quadrature = DEFAULT_QUADRATURE,
    *,
    tol: float = SYMMETRY_TOL,
    assume_symmetry: bool = False,
) -> dict:
    """``Delta~[basis][j, k, n]``: trace distance of the single-``x`` n-photon states.

    The Z table uses ``x = 0`` and the X table ``x = pi/2``, built separately.
    """
    tables = {}
    for basis, centres in BASIS_CENTRES.items():
        if assume_symmetry and basis != "Z":
            continue
        x = centres[0]
        states = {(j, n): build_fock_matrix(params, x, j, n, quad) for j in WINDOW_LABELS for n in range(n_cut + 1)}
        tables[basis] = _pairwise(states, n_cut)
    if assume_symmetry:
        tables["X"] = tables["Z"]
    gap = np.max(np.abs(tables["X"] - tables["Z"]))
    if gap > tol:
        raise SymmetryError(f"error bias tables differ between bases by {gap:.3e}")
    return tables


@lru_cache(maxsize=8192)
def bias_bounds(
    params: TransmitterParams, n_cut: int, quad: Quadrature = DEFAULT_QUADRATURE, *, assume_symmetry: bool = False
) -> BiasBounds:
    """Both bias tables; cached because they do not depend on the channel."""
    return BiasBounds(
        n_cut=n_cut,
        delta=yield_bias_table(params, n_cut, quad, assume_symmetry=assume_symmetry),
        delta_tilde=error_bias_table(params, n_cut, quad, assume_symmetry=assume_symmetry),
    )
