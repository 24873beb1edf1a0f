import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize

from kvwave import (
    InvalidDataError,
    InvalidToleranceError,
    Interval,
    ModalState,
    ResolventProblem,
    build_domain,
    h_norm,
    resolvent,
    solve_resolvent,
    verify_contraction,
    verify_m_dissipativity,
)
from kvwave.resolvent import chi_fixed_point_map, coercivity_slack, reconstruct, residual_coefficients

PI = math.pi
UNIT8 = build_domain(Interval(1.0), 8)
ONE = build_domain(Interval(PI), 1)


def cubic_root():
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid**3 + 2 * mid - 1 < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def test_residual_coefficient_examples():
    one = build_domain(Interval(1.0), 1)
    two = build_domain(Interval(1.0), 2)
    assert not np.any(residual_coefficients(ResolventProblem(1.0, [0.0], [0.0], one)))
    np.testing.assert_allclose(residual_coefficients(ResolventProblem(1.0, [1.0], [0.0], one)), [-PI**2])
    np.testing.assert_allclose(
        residual_coefficients(ResolventProblem(0.5, [1.0, 0.0], [0.0, 1.0], two)), [-PI**2 / 2, 1.0]
    )


def test_fixed_point_map_examples():
    prob = ResolventProblem(1.0, [0.0], [1.0], ONE)
    assert chi_fixed_point_map(prob, 0.0) == pytest.approx(0.25, rel=1e-14)
    assert chi_fixed_point_map(prob, 0.25) == pytest.approx(1 / 2.25**2, rel=1e-14)
    assert chi_fixed_point_map(ResolventProblem(1.0, [0.0], [0.0], ONE), 3.0) == 0.0
    with pytest.raises(InvalidDataError):
        chi_fixed_point_map(prob, -1.0)


def test_cubic_instance_against_bisection_oracle():
    xi = cubic_root()
    sol = solve_resolvent(ResolventProblem(1.0, [0.0], [1.0], ONE))
    assert abs(sol.v[0] - xi) <= 1e-12
    assert abs(sol.u[0] - xi) <= 1e-12
    assert abs(sol.chi_star - xi**2) <= 1e-12
    assert sol.chi_star == pytest.approx(0.205570, abs=1e-6)
    assert sol.v[0] == pytest.approx(0.453398, abs=1e-6)


def test_zero_right_hand_side_branch():
    sol = solve_resolvent(ResolventProblem(1.0, [1.0], [1.0], ONE))
    assert sol.chi_star == 0.0 and sol.v[0] == 0.0 and sol.u[0] == 1.0 and sol.iterations == 0
    z = solve_resolvent(ResolventProblem(1.0, np.zeros(8), np.zeros(8), UNIT8))
    assert not np.any(z.u) and not np.any(z.v) and z.chi_star == 0.0


@pytest.mark.parametrize("tol", [0.0, -1e-3, math.nan, math.inf])
def test_bad_tolerance(tol):
    with pytest.raises(InvalidToleranceError):
        solve_resolvent(ResolventProblem(1.0, [0.0], [1.0], ONE), tol)


@pytest.mark.parametrize("alpha", [0.0, -1.0, math.inf])
def test_bad_alpha(alpha):
    with pytest.raises(InvalidDataError):
        ResolventProblem(alpha, [0.0], [1.0], ONE)


def test_multimode_root_matches_brentq():
    rng = np.random.default_rng(11)
    f = rng.standard_normal(8) / np.sqrt(UNIT8.eigenvalues)
    g = rng.standard_normal(8)
    prob = ResolventProblem(0.37, f, g, UNIT8)
    phi0 = chi_fixed_point_map(prob, 0.0)
    ref = optimize.brentq(lambda c: c - chi_fixed_point_map(prob, c), 0.0, phi0, xtol=1e-15, rtol=1e-15)
    assert solve_resolvent(prob).chi_star == pytest.approx(ref, rel=1e-13, abs=1e-15)


def test_extreme_alpha_still_solvable():
    rep = verify_m_dissipativity(UNIT8, trials=50, alpha_range=(1e3, 1e3))
    assert rep.passed and rep.max_residual <= 1e-9


def test_zero_data_trial_has_zero_residual():
    prob = ResolventProblem(2.0, np.zeros(8), np.zeros(8), UNIT8)
    rep = verify_m_dissipativity(UNIT8, problems=[prob])
    assert rep.trials == 1 and rep.max_residual == 0.0


def test_hundred_random_trials():
    rep = verify_m_dissipativity(UNIT8, trials=100, tol=1e-9)
    assert rep.passed
    assert rep.min_sharp_coercivity_slack >= -1e-12


def test_printed_coercivity_form_fails_for_small_alpha_high_mode():
    # small high-frequency displacement (linear regime) with moderate alpha violates 2aF + G/2
    f = np.zeros(8)
    f[7] = 1e-4
    prob = ResolventProblem(0.084, f, np.zeros(8), UNIT8)
    printed, sharp = coercivity_slack(prob, solve_resolvent(prob))
    assert printed < 0.0 <= sharp


def test_resolvent_inverts_identity_minus_operator():
    rng = np.random.default_rng(3)
    s = ModalState(rng.standard_normal(8) / np.sqrt(UNIT8.eigenvalues), rng.standard_normal(8), UNIT8)
    j = resolvent(s, 0.1)
    from kvwave import apply_operator

    back = j - apply_operator(j) * 0.1
    assert h_norm(back - s) <= 1e-10


def test_contraction_report():
    assert verify_contraction(UNIT8, trials=100, seed=2).passed(1e-10)


alphas = st.floats(1e-3, 1e3)
vec = st.lists(st.floats(-3, 3, allow_nan=False), min_size=8, max_size=8)


@given(alphas, vec, vec)
def test_root_is_bracketed_and_reconstructs(alpha, f, g):
    f = np.array(f) / np.sqrt(UNIT8.eigenvalues)
    prob = ResolventProblem(alpha, f, np.array(g), UNIT8)
    sol = solve_resolvent(prob, 1e-12)
    phi0 = chi_fixed_point_map(prob, 0.0)
    assert 0.0 <= sol.chi_star <= phi0
    assert abs(chi_fixed_point_map(prob, sol.chi_star) - sol.chi_star) <= 1e-12 * max(1.0, phi0)
    rec = reconstruct(prob, sol)
    assert h_norm(rec - ModalState(prob.f, prob.g, UNIT8)) <= 1e-9 * max(1.0, phi0)
    assert coercivity_slack(prob, sol)[1] >= -1e-12 * max(1.0, phi0**2)


@given(alphas, vec, vec, vec, vec)
def test_resolvent_is_contraction(alpha, f1, g1, f2, g2):
    w = np.sqrt(UNIT8.eigenvalues)
    s1 = ModalState(np.array(f1) / w, g1, UNIT8)
    s2 = ModalState(np.array(f2) / w, g2, UNIT8)
    assert h_norm(resolvent(s1, alpha) - resolvent(s2, alpha)) <= h_norm(s1 - s2) + 1e-10
