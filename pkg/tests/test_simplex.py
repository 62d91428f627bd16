import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from passive_qkd.simplex import InfeasibleError, LinearProgram, UnboundedError, solve


def test_small_example():
    lp = LinearProgram(2)
    lp.add([1, 1], "<=", 4, "cap")
    lp.add([1, 3], "<=", 6, "cap")
    res = solve([3, 2], lp, maximize=True)
    assert res.fun == pytest.approx(12.0)
    np.testing.assert_allclose(res.x, [4, 0], atol=1e-12)


def test_equality_and_lower_rows():
    lp = LinearProgram(3)
    lp.add([1, 1, 1], "==", 1, "simplex")
    lp.add([1, 0, 0], ">=", 0.2, "floor")
    res = solve([1, 2, 3], lp)
    assert res.fun == pytest.approx(1.0)
    res = solve([1, 2, 3], lp, maximize=True)
    assert res.fun == pytest.approx(0.2 + 3 * 0.8)


def test_degenerate_and_redundant_rows():
    lp = LinearProgram(2)
    for _ in range(4):
        lp.add([1, 1], "<=", 1, "dup")
    lp.add([1, -1], "==", 0, "tie")
    lp.add([2, 2], "==", 2, "dup-eq")
    res = solve([-1, 0], lp)
    np.testing.assert_allclose(res.x, [0.5, 0.5], atol=1e-12)


def test_infeasible_program_names_family():
    lp = LinearProgram(2)
    lp.add([1, 1], "<=", 1, "budget")
    lp.add([1, 1], ">=", 2, "demand")
    with pytest.raises(InfeasibleError) as err:
        solve([1, 1], lp)
    assert "demand" in err.value.families
    assert "demand" in str(err.value)


def test_unbounded_program():
    lp = LinearProgram(2)
    lp.add([1, -1], "<=", 1, "row")
    with pytest.raises(UnboundedError):
        solve([-1, 0], lp)


def test_bad_rows_rejected():
    lp = LinearProgram(2)
    with pytest.raises(ValueError):
        lp.add([1, 1], "<", 1, "x")
    with pytest.raises(ValueError):
        lp.add([1, 1, 1], "<=", 1, "x")


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 7), st.integers(1, 8))
def test_agrees_with_highs(seed, n, m):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n)).round(2)
    b = rng.uniform(-1, 2, size=m).round(2)
    c = rng.normal(size=n).round(2)
    lp = LinearProgram(n)
    for row, rhs in zip(A, b):
        lp.add(row, "<=", rhs, "row")
    lp.add_upper_bounds(np.ones(n))
    ref = linprog(c, A_ub=A, b_ub=b, bounds=[(0, 1)] * n, method="highs")
    if ref.status == 2:
        with pytest.raises(InfeasibleError):
            solve(c, lp)
        return
    res = solve(c, lp)
    assert res.fun == pytest.approx(ref.fun, abs=1e-8)
    assert lp.violations(res.x, 1e-9) == []
