"""Time integration of the modal Kelvin-Voigt system and the energy-damped
prototype.

Three integrators are available:

``direct_rk4``
    classical RK4 on the modal ODE ``a' = b``, ``b' = -mu a - chi mu b``.
``implicit_euler_resolvent``
    ``U_{n+1} = J_dt U_n`` with the nonlinear resolvent; ``n`` steps of
    size ``t/n`` are the discrete exponential formula ``(J_{t/n})^n``.
``yosida_rk4``
    RK4 on ``U' = A_alpha U = (J_alpha U - U) / alpha``.

RK4 runs also integrate the dissipation rates and ``E_w^2`` with the RK4
stage weights, which makes the energy-identity residual an O(dt^4) quantity.
The implicit Euler trace uses the right-endpoint rule, for which the
discrete identity holds up to the numerical dissipation
``-1/2 sum ||U_{n+1} - U_n||^2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .diagnostics import BT_PROTOTYPE, KELVIN_VOIGT, EnergyTrace, weak_energy
from .errors import BlowUpError, InvalidConfigurationError, StiffnessWarning
from .resolvent import DEFAULT_TOL, _solve_modal
from .state import ModalState, apply_operator

__all__ = [
    "METHODS",
    "MODELS",
    "IntegratorSpec",
    "rhs_kelvin_voigt",
    "rhs_bt_prototype",
    "step_rk4",
    "step_implicit_euler",
    "step_yosida_rk4",
    "evolve",
    "exponential_formula",
]

METHODS = ("direct_rk4", "implicit_euler_resolvent", "yosida_rk4")
MODELS = (KELVIN_VOIGT, BT_PROTOTYPE)


@dataclass(frozen=True)
class IntegratorSpec:
    method: str
    dt: float
    t_end: float
    sample_stride: int = 1
    alpha: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidConfigurationError(f"unknown integrator {self.method!r}; expected one of {METHODS}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidConfigurationError(f"dt must be positive, got {self.dt}")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise InvalidConfigurationError(f"t_end must be positive, got {self.t_end}")
        if self.dt > self.t_end:
            raise InvalidConfigurationError(f"dt={self.dt} exceeds t_end={self.t_end}")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise InvalidConfigurationError(f"sample_stride must be a positive integer, got {self.sample_stride}")
        if self.method == "yosida_rk4" and not (self.alpha is not None and self.alpha > 0):
            raise InvalidConfigurationError("yosida_rk4 needs a positive alpha")

    @property
    def steps(self) -> int:
        # tolerate t_end/dt landing a few ulps below an integer
        return max(1, int(math.ceil(self.t_end / self.dt - 1e-9)))


def rhs_kelvin_voigt(state: ModalState) -> ModalState:
    return apply_operator(state)


def rhs_bt_prototype(state: ModalState) -> ModalState:
    """``a' = b``, ``b' = -mu a - E_w b``."""
    e = weak_energy(state)
    return ModalState(state.b.copy(), -state.mu * state.a - e * state.b, state.domain)


# Array kernels.  Each returns (dy, rates) where rates holds the weak and
# regular dissipation rates and E_w^2 at y.

def _square_weights(rows_b, rows_a):
    """Weight matrix turning ``y*y`` into the rows of modal sums in one product."""
    n = len(rows_b[0]) if rows_b else len(rows_a[0])
    w = np.zeros((len(rows_b) + len(rows_a), 2 * n))
    for i, r in enumerate(rows_b):
        w[i, n:] = r
    for i, r in enumerate(rows_a, start=len(rows_b)):
        w[i, :n] = r
    return w


def _kv_kernel(mu, damping=1.0):
    n = len(mu)
    # rows: chi, kinetic, sum mu^2 b^2, potential
    weights = _square_weights([mu, np.ones(n), mu * mu], [mu])

    def f(y):
        b = y[n:]
        # one left-to-right pass for all four sums
        c, kin, g2, pot = np.add.accumulate(weights * (y * y), axis=1)[:, -1].tolist()
        cd = damping * c
        e = 0.5 * kin + 0.5 * pot
        dy = np.concatenate((b, mu * -(y[:n] + cd * b)))
        return dy, (cd * c, cd * g2, e * e)

    return f


def _bt_kernel(mu):
    n = len(mu)
    weights = _square_weights([mu, np.ones(n)], [mu])
    neg_mu = -mu

    def f(y):
        b = y[n:]
        c, kin, pot = np.add.accumulate(weights * (y * y), axis=1)[:, -1].tolist()
        e = 0.5 * kin + 0.5 * pot
        dy = np.concatenate((b, neg_mu * y[:n] - e * b))
        return dy, (e * kin, e * c, e * e)

    return f


def _yosida_kernel(mu, alpha, tol, damping=1.0):
    if damping != 1.0:
        raise InvalidConfigurationError("damping scaling is only available for direct_rk4")
    n = len(mu)
    rates = _kv_kernel(mu)

    def f(y):
        u, v, *_ = _solve_modal(mu, alpha, y[:n], y[n:], tol)
        dy = (np.concatenate((u, v)) - y) / alpha
        return dy, rates(y)[1]

    return f


def _rk4_step(f, y, dt):
    k1, s1 = f(y)
    k2, s2 = f(y + 0.5 * dt * k1)
    k3, s3 = f(y + 0.5 * dt * k2)
    k4, s4 = f(y + dt * k3)
    w = dt / 6.0
    y_new = y + w * (k1 + 2.0 * (k2 + k3) + k4)
    q = [w * (p1 + 2.0 * (p2 + p3) + p4) for p1, p2, p3, p4 in zip(s1, s2, s3, s4)]
    return y_new, q


def step_rk4(state: ModalState, rhs: Callable[[ModalState], ModalState], dt: float) -> ModalState:
    """One classical RK4 step of ``U' = rhs(U)``."""
    if not dt > 0:
        raise InvalidConfigurationError(f"dt must be positive, got {dt}")
    with np.errstate(over="ignore", invalid="ignore"):
        y = state.to_vector()
        dom = state.domain

        def f(z):
            if not np.all(np.isfinite(z)):
                raise BlowUpError("non-finite RK4 stage")
            return rhs(ModalState.from_vector(z, dom)).to_vector()

        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise BlowUpError("non-finite RK4 result")
    return ModalState.from_vector(out, dom)


def step_implicit_euler(state: ModalState, dt: float, tol: float = DEFAULT_TOL) -> ModalState:
    """``J_dt(state)``: solve ``(I - dt A) U_new = state``."""
    if not dt > 0:
        raise InvalidConfigurationError(f"dt must be positive, got {dt}")
    u, v, *_ = _solve_modal(state.mu, dt, state.a, state.b, tol)
    return ModalState(u, v, state.domain)


def step_yosida_rk4(state: ModalState, alpha: float, dt: float, tol: float = DEFAULT_TOL) -> ModalState:
    """One RK4 step of the Yosida-regularized flow ``U' = (J_alpha U - U) / alpha``."""
    if not (alpha > 0 and dt > 0):
        raise InvalidConfigurationError("alpha and dt must be positive")
    y, _ = _rk4_step(_yosida_kernel(state.mu, alpha, tol), state.to_vector(), dt)
    if not np.all(np.isfinite(y)):
        raise BlowUpError("non-finite Yosida step")
    return ModalState.from_vector(y, state.domain)


def _sample_indices(steps: int, stride: int) -> list[int]:
    idx = list(range(0, steps + 1, stride))
    if idx[-1] != steps:
        idx.append(steps)
    return idx


def evolve(
    initial: ModalState,
    model: str = KELVIN_VOIGT,
    spec: IntegratorSpec | None = None,
    tol: float = DEFAULT_TOL,
    damping_scale: float = 1.0,
    fingerprint: str = "",
) -> EnergyTrace:
    """Advance ``initial`` to ``spec.t_end`` and return the sampled trace.

    Sample times are ``k * dt`` for every ``sample_stride``-th step plus the
    final step.  ``damping_scale`` multiplies the nonlocal damping
    coefficient (``0`` gives the undamped wave equation; direct RK4 only).

    Raises ``BlowUpError`` carrying the partial trace, flagged invalid, if
    the state becomes non-finite.
    """
    if spec is None:
        raise InvalidConfigurationError("an IntegratorSpec is required")
    if model not in MODELS:
        raise InvalidConfigurationError(f"unknown model {model!r}")
    if model == BT_PROTOTYPE and spec.method != "direct_rk4":
        raise InvalidConfigurationError("the prototype model is integrated with direct_rk4 only")
    if damping_scale != 1.0 and spec.method != "direct_rk4":
        raise InvalidConfigurationError("damping_scale is a direct_rk4 test hook")

    dom = initial.domain
    mu = dom.eigenvalues
    n = len(mu)
    dt = spec.dt
    steps = spec.steps
    sample_at = _sample_indices(steps, spec.sample_stride)
    ns = len(sample_at)
    ys = np.empty((ns, 2 * n))
    qs = np.zeros((ns, 3))
    notes: list[str] = []
    mu_max = float(mu[-1]) if n else 0.0

    if spec.method == "direct_rk4":
        f = _kv_kernel(mu, damping_scale) if model == KELVIN_VOIGT else _bt_kernel(mu)
        stepper = lambda y: _rk4_step(f, y, dt)  # noqa: E731
    elif spec.method == "yosida_rk4":
        f = _yosida_kernel(mu, spec.alpha, tol)
        stepper = lambda y: _rk4_step(f, y, dt)  # noqa: E731
    else:
        rates = _kv_kernel(mu)

        def stepper(y):
            u, v, *_ = _solve_modal(mu, dt, y[:n], y[n:], tol)
            y_new = np.concatenate((u, v))
            return y_new, [dt * r for r in rates(y_new)[1]]

    y = initial.to_vector()
    q = [0.0, 0.0, 0.0]
    ys[0] = y
    j = 1
    warned = False

    def partial(upto):
        return _make_trace(sample_at[:upto], ys[:upto], qs[:upto], dt, mu, model, spec, fingerprint, dom, notes)

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, steps + 1):
            y, dq = stepper(y)
            q[0] += dq[0]
            q[1] += dq[1]
            q[2] += dq[2]
            if k == sample_at[j]:
                # a non-finite entry (or overflow) makes the squared norm non-finite
                if not (math.isfinite(float(y.dot(y))) and all(map(math.isfinite, q))):
                    tr = partial(j)
                    tr.valid = False
                    msg = f"non-finite state at t={k * dt:g}"
                    tr.warnings.append(msg)
                    raise BlowUpError(msg, tr)
                ys[j] = y
                qs[j] = q
                j += 1
                if (
                    not warned
                    and spec.method == "direct_rk4"
                    and model == KELVIN_VOIGT
                    and dt * damping_scale * float(np.dot(mu, y[n:] ** 2)) * mu_max > 1.0
                ):
                    warned = True
                    msg = f"stiffness guard: dt*chi*mu_max > 1 at t={k * dt:g}; explicit RK4 may be unstable"
                    notes.append(msg)
                    warnings.warn(msg, StiffnessWarning, stacklevel=2)
    return partial(ns)


def _make_trace(idx, ys, qs, dt, mu, model, spec, fingerprint, dom, notes):
    n = len(mu)
    times = np.array(idx, dtype=float) * dt
    return EnergyTrace.from_states(
        times,
        ys[:, :n].copy(),
        ys[:, n:].copy(),
        mu,
        model,
        weak_dissipation=qs[:, 0].copy(),
        regular_dissipation=qs[:, 1].copy(),
        e_sq_integral=qs[:, 2].copy(),
        method=spec.method,
        fingerprint=fingerprint,
        lambda1=dom.poincare_constant,
        domain=dom,
        warnings=list(notes),
    )


def exponential_formula(initial: ModalState, t: float, n: int, tol: float = DEFAULT_TOL) -> ModalState:
    """``(J_{t/n})^n initial``, the discrete exponential formula."""
    if t < 0:
        raise InvalidConfigurationError(f"t must be nonnegative, got {t}")
    if int(n) != n or n < 1:
        raise InvalidConfigurationError(f"n must be a positive integer, got {n}")
    if t == 0:
        return initial
    dt = t / n
    mu = initial.mu
    a, b = initial.a, initial.b
    for _ in range(int(n)):
        a, b, *_ = _solve_modal(mu, dt, a, b, tol)
    return ModalState(a, b, initial.domain)
