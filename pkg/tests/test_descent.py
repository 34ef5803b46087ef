import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from descent_lab.descent import (
    CONVERGED,
    DIVERGING,
    UNDECIDED,
    chi,
    detect_outcome,
    run,
    running_grad_min,
    verify_descent_inequalities,
)
from descent_lab.errors import MissingLowerBoundError
from descent_lab.objectives import ExpNegSquare, Objective, QuadraticBowl, Staircase
from descent_lab.schedules import constant_scalar, diagonal_power, power_scalar


def test_staircase_iterates_are_prefix_sums():
    tr = run(Staircase(power_scalar(1.0)), power_scalar(1.0), 0.0, 3)
    assert tr.x[3, 0] == 1 + 1 / 2 + 1 / 3
    assert len(tr) == 4


def test_quadratic_contraction_exact():
    tr = run(QuadraticBowl(2), constant_scalar(0.5), (4.0, -2.0), 3)
    np.testing.assert_array_equal(tr.x[3], [0.5, -0.25])


def test_diagonal_schedule_per_coordinate():
    tr = run(QuadraticBowl(2), diagonal_power(0.0001, [0.5, 0.25]), (1.0, 1.0), 1)
    np.testing.assert_allclose(tr.x[1], [0.5, 0.75])


def test_rerun_is_bitwise_identical():
    a = run(ExpNegSquare(), power_scalar(0.5), 1.0, 500)
    b = run(ExpNegSquare(), power_scalar(0.5), 1.0, 500)
    assert a.x.tobytes() == b.x.tobytes() and a.f.tobytes() == b.f.tobytes()


def test_nonfinite_truncates():
    class Blowup(Objective):
        name, dim, lower_bound = "blowup", 1, None

        def value(self, x):
            return float(np.asarray(x)[0]) ** 2

        def gradient(self, x):
            return np.array([-1e200 * max(1.0, abs(float(np.asarray(x)[0])))])

    tr = run(Blowup(), constant_scalar(1e200), 1.0, 10)
    assert tr.nonfinite_at is not None
    assert np.all(np.isfinite(tr.x))


def test_budget_validation():
    with pytest.raises(ValueError):
        run(QuadraticBowl(), power_scalar(0.5), 1.0, 0)


def test_chi_extinction_on_staircase():
    # S_4 = 2.083 is the first prefix sum beyond radius 2.
    tr = run(Staircase(power_scalar(1.0)), power_scalar(1.0), 0.0, 20)
    seq = [chi(tr, 0.0, 2.0, k) for k in range(len(tr))]
    assert seq[:4] == [1, 1, 1, 1] and seq[4] == 0 and not any(seq[4:])
    rmin = running_grad_min(tr, 0.0, 2.0)
    assert rmin[3] == 1.0 and rmin[4] == 0.0


def test_chi_index_error():
    tr = run(QuadraticBowl(), power_scalar(0.5), 1.0, 3)
    with pytest.raises(IndexError):
        chi(tr, 0.0, 1.0, 10)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0.05, 5), st.floats(0.05, 5))
def test_chi_monotone(x0, r1, r2):
    tr = run(ExpNegSquare(), power_scalar(0.5, 2.0), x0, 200)
    lo, hi = sorted((r1, r2))
    c_lo, c_hi = tr.chi_sequence(0.0, lo), tr.chi_sequence(0.0, hi)
    assert np.all(np.diff(c_lo) <= 0)
    assert np.all(c_lo <= c_hi)


def test_running_min_zero_at_minimum():
    tr = run(QuadraticBowl(), power_scalar(0.5), 0.0, 10)
    assert np.all(running_grad_min(tr, 0.0, 1.0) == 0.0)


def test_verify_quadratic_exact_constants():
    tr = run(QuadraticBowl(), power_scalar(0.5), 1.0, 2000)
    rep = verify_descent_inequalities(tr, QuadraticBowl(), 0.0, 2.0, constants=(1.0, 2.0))
    assert rep.verdict == "holds"
    assert rep.K == 1  # lambda_max(M_0) = 1 >= 2/C = 0.8
    assert np.all(np.diff(rep.lhs) >= 0)
    assert rep.lhs[-1] <= rep.rhs + rep.slack


def test_verify_estimates_constants():
    tr = run(ExpNegSquare(), power_scalar(0.5), 0.3, 500)
    rep = verify_descent_inequalities(tr, ExpNegSquare(), 0.0, 1.0, n_samples=2000)
    assert rep.constants_estimated
    assert rep.verdict == "holds"
    L, G = ExpNegSquare().analytic_constants(0.0, 1.0)
    assert rep.g_hat <= G * (1 + 1e-12)


def test_verify_flags_insufficient_constants():
    tr = run(QuadraticBowl(), constant_scalar(1.9), 1.0, 50)
    rep = verify_descent_inequalities(tr, QuadraticBowl(), 0.0, 2.0, constants=(0.0, 0.0))
    # With C = 0 every step is checked and the needed constant (1/2) exceeds C.
    assert rep.K == 0 and rep.violations
    assert rep.verdict == "constants_insufficient"


def test_verify_requires_lower_bound():
    class NoBound(QuadraticBowl):
        lower_bound = None

    tr = run(QuadraticBowl(), power_scalar(0.5), 1.0, 5)
    with pytest.raises(MissingLowerBoundError):
        verify_descent_inequalities(tr, NoBound(), 0.0, 1.0, constants=(1, 1))


def test_outcomes():
    conv = detect_outcome(run(QuadraticBowl(), power_scalar(0.5), 3.0, 1000))
    assert conv.kind == CONVERGED and abs(conv.x_star[0]) < 1e-6
    stair = Staircase(power_scalar(1.0))
    div = detect_outcome(run(stair, power_scalar(1.0), 0.0, 10_000), escape_radius=5.0)
    assert div.kind == DIVERGING
    short = detect_outcome(run(QuadraticBowl(), power_scalar(0.5), 3.0, 3))
    assert short.kind == UNDECIDED


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-12, 10), st.floats(1e-12, 10), st.floats(0.1, 100), st.floats(0.01, 0.5))
def test_outcome_predicates_exclusive(tol_x, tol_g, esc, frac):
    for tr in (run(QuadraticBowl(), power_scalar(0.5), 3.0, 200),
               run(ExpNegSquare(), power_scalar(0.25, 2.0), 1.0, 200)):
        out = detect_outcome(tr, tol_x, tol_g, esc, frac)
        converged_pred = out.tail_diameter < tol_x and out.final_grad_norm < tol_g and out.final_norm <= esc
        assert out.kind in (CONVERGED, DIVERGING, UNDECIDED)
        if out.kind == DIVERGING:
            assert not converged_pred
