"""Dense two-phase simplex for the small decoy-state linear programs.

Solves ``min c.x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq`` and
``0 <= x <= upper``. Every constraint row carries a family name so that an
infeasible program can be reported in terms of the constraints that cannot be
met. Pivoting follows Bland's rule, which rules out cycling on the degenerate
vertices these programs have in abundance.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PIVOT_TOL = 1e-12
FEAS_TOL = 1e-9
MAX_ITER = 5000


class InfeasibleError(ValueError):
    """No point satisfies all constraints; ``families`` names the unmet ones."""

    def __init__(self, families, residual: float) -> None:
        self.families = tuple(families)
        self.residual = residual
        super().__init__(f"infeasible linear program (residual {residual:.3e}); violated: {', '.join(self.families)}")


class UnboundedError(ValueError):
    pass


@dataclass
class LinearProgram:
    """Constraint rows accumulated with family labels."""

    n_vars: int
    rows: list = field(default_factory=list)

    def add(self, coeffs, sense: str, rhs: float, family: str) -> None:
        """Append ``coeffs . x (sense) rhs`` with ``sense`` one of ``<=``, ``>=``, ``==``."""
        if sense not in ("<=", ">=", "=="):
            raise ValueError(f"unknown sense {sense!r}")
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.n_vars,):
            raise ValueError("coefficient vector has the wrong length")
        self.rows.append((coeffs, sense, float(rhs), family))

    def add_upper_bounds(self, upper, family: str = "box") -> None:
        for i, u in enumerate(np.broadcast_to(np.asarray(upper, dtype=float), (self.n_vars,))):
            if np.isfinite(u):
                e = np.zeros(self.n_vars)
                e[i] = 1.0
                self.add(e, "<=", u, family)

    def violations(self, x, tol: float = FEAS_TOL) -> list:
        """Families whose rows ``x`` violates by more than ``tol`` (nonnegativity included)."""
        bad = []
        if np.any(np.asarray(x) < -tol):
            bad.append("nonnegativity")
        for a, sense, b, fam in self.rows:
            v = float(a @ x)
            if (sense == "<=" and v > b + tol) or (sense == ">=" and v < b - tol) or (
                sense == "==" and abs(v - b) > tol
            ):
                if fam not in bad:
                    bad.append(fam)
        return bad


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    fun: float
    iterations: int
    status: str = "optimal"


def _pivot(tab: np.ndarray, basis: list, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    others = np.arange(tab.shape[0]) != row
    tab[others] -= np.outer(tab[others, col], tab[row])
    basis[row] = col


def solve(c, lp: LinearProgram, *, maximize: bool = False) -> LPResult:
    """Optimise ``c . x`` over ``lp`` with ``x >= 0``.

    Raises:
        InfeasibleError: if phase one cannot drive the artificial variables to zero.
        UnboundedError: if the objective is unbounded.
    """
    c = np.asarray(c, dtype=float) * (-1.0 if maximize else 1.0)
    n = lp.n_vars
    m = len(lp.rows)
    A = np.zeros((m, n))
    b = np.zeros(m)
    senses = []
    for i, (a, sense, rhs, _) in enumerate(lp.rows):
        scale = max(np.max(np.abs(a)), 1e-300)
        a, rhs = a / scale, rhs / scale
        if rhs < 0.0:
            a, rhs = -a, -rhs
            sense = {"<=": ">=", ">=": "<=", "==": "=="}[sense]
        A[i], b[i] = a, rhs
        senses.append(sense)

    n_slack = sum(s != "==" for s in senses)
    needs_art = [s != "<=" for s in senses]
    n_art = sum(needs_art)
    width = n + n_slack + n_art + 1
    tab = np.zeros((m + 2, width))
    tab[:m, :n] = A
    tab[:m, -1] = b
    basis = [0] * m
    art_rows = []
    si, ai = n, n + n_slack
    for i, s in enumerate(senses):
        if s != "==":
            tab[i, si] = 1.0 if s == "<=" else -1.0
            if s == "<=":
                basis[i] = si
            si += 1
        if needs_art[i]:
            tab[i, ai] = 1.0
            basis[i] = ai
            art_rows.append((i, ai))
            ai += 1

    # row m: phase-two objective, row m+1: phase-one objective (sum of artificials)
    tab[m, :n] = c
    for i, _ in art_rows:
        tab[m + 1] -= tab[i]
    tab[m + 1, n + n_slack : n + n_slack + n_art] = 0.0

    allowed = np.ones(width - 1, dtype=bool)
    it = 0
    if n_art:
        # the phase-two row follows the phase-one pivots and stays canonical
        it += _run(tab, basis, m + 1, allowed)
        residual = -tab[m + 1, -1]
        if residual > FEAS_TOL:
            families = []
            for i, col in enumerate(basis):
                if col >= n + n_slack and tab[i, -1] > FEAS_TOL:
                    fam = lp.rows[i][3]
                    if fam not in families:
                        families.append(fam)
            raise InfeasibleError(families or ["unknown"], residual)
        for i in range(m):
            if basis[i] >= n + n_slack:
                nz = np.flatnonzero(np.abs(tab[i, : n + n_slack]) > PIVOT_TOL)
                if nz.size:
                    _pivot(tab, basis, i, int(nz[0]))
        allowed[n + n_slack :] = False

    it += _run(tab, basis, m, allowed)
    x = np.zeros(width - 1)
    for i, col in enumerate(basis):
        x[col] = tab[i, -1]
    x = x[:n]
    fun = float(np.asarray(c) @ x)
    return LPResult(x=x, fun=-fun if maximize else fun, iterations=it)


def _run(tab: np.ndarray, basis: list, cost_row: int, allowed: np.ndarray, budget: int = MAX_ITER) -> int:
    """Bland-rule iterations minimising the objective row ``cost_row``.

    Ratio tests use the constraint rows ``0..len(basis)-1``; every other row of
    the tableau is updated by the pivots as well.
    """
    m = len(basis)
    it = 0
    while True:
        reduced = tab[cost_row, :-1]
        cand = np.flatnonzero((reduced < -PIVOT_TOL) & allowed)
        if cand.size == 0:
            return it
        col = int(cand[0])
        column = tab[:m, col]
        pos = np.flatnonzero(column > PIVOT_TOL)
        if pos.size == 0:
            raise UnboundedError("objective is unbounded below")
        ratios = tab[pos, -1] / column[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-14 * max(1.0, abs(best))]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(tab, basis, row, col)
        it += 1
        if it > budget:
            raise RuntimeError("simplex iteration limit reached")
