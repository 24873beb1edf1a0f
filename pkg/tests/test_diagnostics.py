import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import smooth_state
from kvwave import (
    BT_PROTOTYPE,
    KELVIN_VOIGT,
    EnergyTrace,
    InsufficientHorizonError,
    IntegratorSpec,
    InvalidDataError,
    Interval,
    ModalState,
    StiffnessWarning,
    WrongModelError,
    build_certificate,
    build_domain,
    check_decay_bound,
    check_integral_inequality,
    check_prototype_bounds,
    decay_constant,
    evolve,
    regular_energy,
    regular_identity_residual,
    weak_energy,
    weak_identity_residual,
)
from kvwave.diagnostics import loglog_slope, max_energy_increase, prototype_derivative_residual

PI2 = math.pi**2
UNIT1 = build_domain(Interval(1.0), 1)
UNIT8 = build_domain(Interval(1.0), 8)
ONE = build_domain(Interval(math.pi), 1)


@pytest.fixture(scope="module")
def kv_trace():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StiffnessWarning)
        return evolve(smooth_state(UNIT8), KELVIN_VOIGT, IntegratorSpec("direct_rk4", 1e-3, 2.0, sample_stride=20))


def zero_trace(model=KELVIN_VOIGT):
    return evolve(ModalState.zeros(UNIT8 if model == KELVIN_VOIGT else ONE), model, IntegratorSpec("direct_rk4", 0.5, 20.0))


def test_energy_examples():
    z = ModalState.zeros(UNIT1)
    assert weak_energy(z) == 0.0 and regular_energy(z) == 0.0
    assert weak_energy(ModalState([1.0], [0.0], UNIT1)) == pytest.approx(PI2 / 2)
    assert PI2 / 2 == pytest.approx(4.9348, abs=1e-4)
    assert weak_energy(ModalState([0.0], [1.0], UNIT1)) == 0.5
    assert regular_energy(ModalState([1.0], [0.0], UNIT1)) == pytest.approx(PI2**2 / 2)
    assert regular_energy(ModalState([0.0], [1.0], UNIT1)) == pytest.approx(PI2 / 2)


def test_decay_constant_examples():
    assert decay_constant(1.0, 1.0) == 8.0
    assert decay_constant(0.3, 0.0) == pytest.approx(8 / 3 * 0.09, rel=1e-15)
    assert decay_constant(1 / PI2, PI2 / 4) == pytest.approx(12.408, abs=5e-4)
    with pytest.raises(InvalidDataError):
        decay_constant(0.0, 1.0)
    with pytest.raises(InvalidDataError):
        decay_constant(1.0, -1.0)


@given(st.floats(1e-3, 1e3), st.floats(0, 1e3), st.floats(1.001, 2.0))
def test_decay_constant_monotone(lam, e0, factor):
    c = decay_constant(lam, e0)
    assert decay_constant(lam * factor, e0) > c
    assert decay_constant(lam, e0 * factor + 1e-6) > c


@given(st.floats(1e-2, 10), st.floats(1e-3, 1e2))
def test_scaling_probe(lam, e0):
    doubled = 4 * e0  # doubling amplitudes quadruples a quadratic energy
    expected = (2 / 3) * (4 * lam**2 + (5 * math.sqrt(lam) + 1) * doubled + 2 * doubled**2)
    assert decay_constant(lam, doubled) == pytest.approx(expected, rel=1e-14)


def test_identity_residual_edge_cases(kv_trace):
    assert weak_identity_residual(kv_trace, 5, 5) == 0.0
    assert regular_identity_residual(kv_trace, 5, 5) == 0.0
    z = zero_trace()
    assert weak_identity_residual(z, 0, len(z) - 1) == 0.0
    assert regular_identity_residual(z, 0, len(z) - 1) == 0.0
    with pytest.raises(IndexError):
        weak_identity_residual(kv_trace, 3, 1)


def test_identity_residuals_small(kv_trace):
    n = len(kv_trace) - 1
    assert abs(weak_identity_residual(kv_trace, 0, n)) / kv_trace.e0 <= 1e-8
    assert abs(regular_identity_residual(kv_trace, 0, n)) / kv_trace.e_regular[0] <= 1e-8


@given(st.integers(0, 100))
def test_quadrature_additivity(split):
    tr = _cached_trace()
    n = len(tr) - 1
    s = min(split, n)
    whole = weak_identity_residual(tr, 0, n)
    parts = weak_identity_residual(tr, 0, s) + weak_identity_residual(tr, s, n)
    assert abs(whole - parts) <= 4 * np.finfo(float).eps * tr.e0
    whole_r = regular_identity_residual(tr, 0, n)
    parts_r = regular_identity_residual(tr, 0, s) + regular_identity_residual(tr, s, n)
    assert abs(whole_r - parts_r) <= 4 * np.finfo(float).eps * tr.e_regular[0]


_CACHE = {}


def _cached_trace():
    if "t" not in _CACHE:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", StiffnessWarning)
            _CACHE["t"] = evolve(smooth_state(UNIT8), KELVIN_VOIGT, IntegratorSpec("direct_rk4", 1e-3, 1.0, sample_stride=10))
    return _CACHE["t"]


def test_energies_monotone(kv_trace):
    budget = 1e-6 * kv_trace.e0
    assert max_energy_increase(kv_trace.e_weak) <= 10 * budget
    assert max_energy_increase(kv_trace.e_regular) <= 10 * budget


def test_trapezoid_fallback_for_csv_style_traces(kv_trace):
    bare = EnergyTrace(kv_trace.times, kv_trace.e_weak, kv_trace.e_regular, kv_trace.chi, kv_trace.grad2_ut_mu2)
    n = len(bare) - 1
    # trapezoid on 20-step samples is O(h^2) accurate, far coarser than the integrator's own sums
    assert abs(weak_identity_residual(bare, 0, n)) / bare.e0 <= 1e-3


def test_tail_margins(kv_trace):
    margins = check_integral_inequality(kv_trace, 5.0)
    assert margins[-1] == pytest.approx(5.0 * kv_trace.e_weak[-1])
    z = zero_trace()
    assert not np.any(check_integral_inequality(z, 3.0))
    with pytest.raises(WrongModelError):
        check_integral_inequality(zero_trace(BT_PROTOTYPE), 1.0)


def test_decay_bound_needs_horizon(kv_trace):
    cert = build_certificate(kv_trace)
    with pytest.raises(InsufficientHorizonError) as info:
        check_decay_bound(kv_trace, cert)
    assert info.value.required_t_end == pytest.approx(cert.C)


def test_decay_bound_trivial_for_zero_trajectory():
    z = evolve(ModalState.zeros(ONE), KELVIN_VOIGT, IntegratorSpec("implicit_euler_resolvent", 0.5, 20.0))
    cert = build_certificate(z)
    assert cert.C == pytest.approx(8 / 3)
    rep = check_decay_bound(z, cert)
    assert rep.passed and rep.checked > 0


def test_prototype_bounds_zero_and_wrong_model(kv_trace):
    assert check_prototype_bounds(zero_trace(BT_PROTOTYPE)).passed
    with pytest.raises(WrongModelError):
        check_prototype_bounds(kv_trace)


def test_prototype_short_run():
    s = ModalState([1.0], [0.0], ONE)
    tr = evolve(s, BT_PROTOTYPE, IntegratorSpec("direct_rk4", 1e-3, 5.0))
    rep = check_prototype_bounds(tr)
    assert rep.passed and rep.min_ratio >= 1 - 1e-6 and rep.lower4_holds
    assert prototype_derivative_residual(tr) <= 1e-4


def test_loglog_slope_of_power_law():
    t = np.linspace(1, 100, 400)
    assert loglog_slope(t, 3 * t**-1.5, 10, 100) == pytest.approx(-1.5, rel=1e-12)
    assert math.isnan(loglog_slope(t, t, 500, 600))


def test_trace_column_lengths_checked():
    with pytest.raises(InvalidDataError):
        EnergyTrace(np.arange(3.0), np.ones(3), np.ones(2), np.ones(3), np.ones(3))
