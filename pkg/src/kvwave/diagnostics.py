"""Energies, energy-identity residuals and decay certificates.

Weak and regular energies of a modal state::

    E_w = 1/2 ||u_t||^2 + 1/2 ||grad u||^2      = 1/2 sum b^2 + 1/2 sum mu a^2
    E_r = 1/2 ||grad u_t||^2 + 1/2 ||Lap u||^2  = 1/2 sum mu b^2 + 1/2 sum mu^2 a^2

Along the Kelvin-Voigt flow both decrease with rates ``chi^2`` and
``chi * sum mu^2 b^2`` respectively; for the energy-damped prototype the
rates are ``E_w * ||u_t||^2`` and ``E_w * ||grad u_t||^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientHorizonError, InvalidDataError, WrongModelError
from .state import ModalState, ordered_sum

__all__ = [
    "KELVIN_VOIGT",
    "BT_PROTOTYPE",
    "EnergyTrace",
    "DecayCertificate",
    "DecayReport",
    "PrototypeReport",
    "weak_energy",
    "regular_energy",
    "weak_identity_residual",
    "regular_identity_residual",
    "decay_constant",
    "build_certificate",
    "check_integral_inequality",
    "check_decay_bound",
    "check_prototype_bounds",
    "prototype_derivative_residual",
    "max_energy_increase",
    "loglog_slope",
]

KELVIN_VOIGT = "kelvin_voigt"
BT_PROTOTYPE = "bt_prototype"


def weak_energy(state: ModalState) -> float:
    b, a, mu = state.b, state.a, state.mu
    return 0.5 * ordered_sum(b * b) + 0.5 * ordered_sum(mu * a * a)


def regular_energy(state: ModalState) -> float:
    b, a, mu = state.b, state.a, state.mu
    return 0.5 * ordered_sum(mu * b * b) + 0.5 * ordered_sum(mu * mu * a * a)


def _rowsum(x: np.ndarray) -> np.ndarray:
    return np.cumsum(x, axis=1)[:, -1] if x.shape[1] else np.zeros(x.shape[0])


def _cumtrapz(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    if len(t) > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


@dataclass(eq=False)
class EnergyTrace:
    """Sampled energy history of one trajectory.

    ``weak_dissipation``, ``regular_dissipation`` and ``e_sq_integral`` are
    running integrals from ``t = 0`` of the weak and regular dissipation
    rates and of ``E_w^2``.  Integrators fill them with their own step-level
    quadrature; traces read back from CSV fall back to trapezoid sums over
    the samples.
    """

    times: np.ndarray
    e_weak: np.ndarray
    e_regular: np.ndarray
    chi: np.ndarray
    grad2_ut_mu2: np.ndarray
    model: str = KELVIN_VOIGT
    weak_dissipation: np.ndarray | None = None
    regular_dissipation: np.ndarray | None = None
    e_sq_integral: np.ndarray | None = None
    kinetic: np.ndarray | None = None
    states_a: np.ndarray | None = field(default=None, repr=False)
    states_b: np.ndarray | None = field(default=None, repr=False)
    method: str = ""
    fingerprint: str = ""
    lambda1: float | None = None
    valid: bool = True
    warnings: list = field(default_factory=list)
    domain: object = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.times)
        for name in ("e_weak", "e_regular", "chi", "grad2_ut_mu2"):
            if len(getattr(self, name)) != n:
                raise InvalidDataError(f"trace column {name} has wrong length")
        if self.weak_dissipation is None:
            self.weak_dissipation = self._fallback_weak()
        if self.regular_dissipation is None:
            self.regular_dissipation = self._fallback_regular()
        if self.e_sq_integral is None:
            self.e_sq_integral = _cumtrapz(self.times, self.e_weak**2)

    @classmethod
    def from_states(cls, times, a, b, mu, model, **kw) -> "EnergyTrace":
        grad_b = _rowsum(mu * b * b)
        kin = _rowsum(b * b)
        ew = 0.5 * kin + 0.5 * _rowsum(mu * a * a)
        er = 0.5 * grad_b + 0.5 * _rowsum(mu * mu * a * a)
        g2 = _rowsum(mu * mu * b * b)
        return cls(
            times=np.asarray(times, float), e_weak=ew, e_regular=er, chi=grad_b,
            grad2_ut_mu2=g2, model=model, kinetic=kin, states_a=a, states_b=b, **kw,
        )

    def _fallback_weak(self):
        if self.model == KELVIN_VOIGT:
            return _cumtrapz(self.times, self.chi**2)
        if self.kinetic is not None:
            return _cumtrapz(self.times, self.e_weak * self.kinetic)
        return None

    def _fallback_regular(self):
        if self.model == KELVIN_VOIGT:
            return _cumtrapz(self.times, self.chi * self.grad2_ut_mu2)
        return _cumtrapz(self.times, self.e_weak * self.chi)

    @property
    def chi_sq_integral(self) -> np.ndarray:
        return self.weak_dissipation

    def __len__(self):
        return len(self.times)

    @property
    def e0(self) -> float:
        return float(self.e_weak[0])

    def final_state(self) -> ModalState:
        if self.states_a is None or self.domain is None:
            raise InvalidDataError("trace does not carry states")
        return ModalState(self.states_a[-1], self.states_b[-1], self.domain)

    def state_at(self, i: int) -> ModalState:
        return ModalState(self.states_a[i], self.states_b[i], self.domain)


def _check_indices(trace: EnergyTrace, S: int, T: int):
    n = len(trace)
    if not (0 <= S < n and 0 <= T < n):
        raise IndexError(f"sample indices ({S}, {T}) outside 0..{n - 1}")
    if S > T:
        raise IndexError(f"S index {S} after T index {T}")


def weak_identity_residual(trace: EnergyTrace, S_index: int, T_index: int) -> float:
    """``E_w(T) - E_w(S) + int_S^T (dissipation rate) dt``; zero for exact dynamics."""
    _check_indices(trace, S_index, T_index)
    if trace.weak_dissipation is None:
        raise InvalidDataError("trace lacks the data for the weak dissipation integral")
    q = trace.weak_dissipation
    return float(trace.e_weak[T_index] - trace.e_weak[S_index] + (q[T_index] - q[S_index]))


def regular_identity_residual(trace: EnergyTrace, S_index: int, T_index: int) -> float:
    _check_indices(trace, S_index, T_index)
    q = trace.regular_dissipation
    return float(trace.e_regular[T_index] - trace.e_regular[S_index] + (q[T_index] - q[S_index]))


def max_energy_increase(values: np.ndarray) -> float:
    """Largest increase between consecutive samples (<= 0 for a monotone trace)."""
    if len(values) < 2:
        return 0.0
    return float(np.max(np.diff(values)))


def decay_constant(lambda1: float, e0: float) -> float:
    """``C = 2/3 [4 l^2 + (5 sqrt(l) + 1) E0 + 2 E0^2]`` with ``l`` the Poincare constant."""
    if not lambda1 > 0:
        raise InvalidDataError(f"Poincare constant must be positive, got {lambda1}")
    if e0 < 0:
        raise InvalidDataError(f"initial energy must be nonnegative, got {e0}")
    return (2.0 / 3.0) * (4.0 * lambda1**2 + (5.0 * math.sqrt(lambda1) + 1.0) * e0 + 2.0 * e0**2)


@dataclass
class DecayCertificate:
    C: float
    lambda1: float
    e0: float
    bound_samples: np.ndarray
    tail_margins: np.ndarray


def check_integral_inequality(trace: EnergyTrace, C: float) -> np.ndarray:
    """Margins ``C E_w(S) - int_S^T_end E_w^2 dt`` for every sample ``S``.

    The integral beyond ``T_end`` is nonnegative and dropped, so a negative
    margin is a genuine violation up to quadrature error.
    """
    if trace.model != KELVIN_VOIGT:
        raise WrongModelError(f"integral inequality applies to {KELVIN_VOIGT}, not {trace.model}")
    q = trace.e_sq_integral
    return C * trace.e_weak - (q[-1] - q)


def build_certificate(trace: EnergyTrace, lambda1: float | None = None) -> DecayCertificate:
    lam = trace.lambda1 if lambda1 is None else lambda1
    if lam is None:
        raise InvalidDataError("Poincare constant unknown for this trace")
    e0 = trace.e0
    C = decay_constant(lam, e0)
    bound = e0 * 2.0 * C / (C + trace.times)
    return DecayCertificate(C, lam, e0, bound, check_integral_inequality(trace, C))


def loglog_slope(times: np.ndarray, values: np.ndarray, t_lo: float, t_hi: float) -> float:
    """Least-squares slope of ``log values`` against ``log t`` on ``[t_lo, t_hi]``."""
    sel = (times >= t_lo) & (times <= t_hi) & (times > 0) & (values > 0)
    if np.count_nonzero(sel) < 2:
        return math.nan
    return float(np.polyfit(np.log(times[sel]), np.log(values[sel]), 1)[0])


@dataclass
class DecayReport:
    C: float
    checked: int
    violations: int
    max_violation: float
    slope: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def check_decay_bound(trace: EnergyTrace, certificate: DecayCertificate) -> DecayReport:
    """Check ``E_w(t) <= E_w(0) 2C / (C + t)`` at every sample with ``t >= C``.

    The reported slope is fitted over the last decade ``[t_end/10, t_end]``.
    """
    C = certificate.C
    t_end = float(trace.times[-1])
    if t_end < C:
        raise InsufficientHorizonError(
            f"run ends at t={t_end:g} but the bound only applies for t >= C = {C:.6g}; "
            f"use t_end >= {C:.6g}",
            C,
        )
    sel = trace.times >= C
    excess = trace.e_weak[sel] - certificate.bound_samples[sel]
    slope = loglog_slope(trace.times, trace.e_weak, t_end / 10.0, t_end)
    return DecayReport(
        C=C,
        checked=int(np.count_nonzero(sel)),
        violations=int(np.count_nonzero(excess > 0.0)),
        max_violation=float(np.max(excess)) if excess.size else -math.inf,
        slope=slope,
    )


@dataclass
class PrototypeReport:
    min_ratio: float
    min_gap: float
    fitted_mu: float
    lower4_holds: bool
    slope: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.min_gap >= -self.tol


def check_prototype_bounds(trace: EnergyTrace, tol: float = 1e-8) -> PrototypeReport:
    """Lower energy bound ``E_w(t) >= (1/E_w(0) + 2t)^-1`` for the prototype.

    ``min_ratio`` is the smallest ``E_w(t) (1/E_w(0) + 2t)``.  The upper
    bound ``((t-1)^+/mu + 1/E_w(0))^-1`` is reported through the smallest
    ``mu`` that makes it hold on the samples; it is not asserted.
    """
    if trace.model != BT_PROTOTYPE:
        raise WrongModelError(f"prototype bounds apply to {BT_PROTOTYPE}, not {trace.model}")
    t, e = trace.times, trace.e_weak
    e0 = trace.e0
    if e0 == 0.0:
        return PrototypeReport(math.inf, 0.0, math.nan, True, math.nan, tol)
    lower = 1.0 / (1.0 / e0 + 2.0 * t)
    ratio = e * (1.0 / e0 + 2.0 * t)
    late = t > 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = 1.0 / e[late] - 1.0 / e0
        cand = np.where(denom > 0, (t[late] - 1.0) / denom, 0.0)
    fitted_mu = float(np.max(cand)) if cand.size else math.nan
    lower4 = bool(np.all(e >= 1.0 / (4.0 * t + 1.0 / e0) - tol))
    slope = loglog_slope(t, e, t[-1] / 10.0, t[-1])
    return PrototypeReport(float(np.min(ratio)), float(np.min(e - lower)), fitted_mu, lower4, slope, tol)


def prototype_derivative_residual(trace: EnergyTrace) -> float:
    """Relative sup-norm residual of ``dE_w/dt + E_w ||u_t||^2 = 0``.

    The derivative is a central difference of the sampled energy, so
    samples must be equally spaced; the residual is normalized by the
    largest dissipation rate along the trace.
    """
    if trace.kinetic is None:
        raise InvalidDataError("trace lacks ||u_t||^2 samples")
    t, e = trace.times, trace.e_weak
    if len(t) < 3:
        raise InvalidDataError("need at least three samples")
    h = np.diff(t)
    core = slice(1, len(t) - 1)
    if not np.allclose(h[:-1], h[1:], rtol=1e-9, atol=0.0):
        # drop a short final step
        t, e = t[:-1], e[:-1]
        core = slice(1, len(t) - 1)
    dedt = (e[2:] - e[:-2]) / (t[2:] - t[:-2])
    rate = e[core] * trace.kinetic[: len(t)][core]
    scale = np.max(np.abs(rate))
    if scale == 0.0:
        return float(np.max(np.abs(dedt)))
    return float(np.max(np.abs(dedt + rate)) / scale)
