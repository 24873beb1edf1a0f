"""Nonlinear resolvent ``(I - alpha A)^{-1}`` in the sine eigenbasis.

Writing ``u = f + alpha v`` reduces ``(I - alpha A)(u, v) = (f, g)`` to the
modal system

    (1 + alpha^2 mu_i + alpha chi mu_i) v_i = r_i,    r_i = g_i - alpha mu_i f_i,

coupled only through the scalar ``chi = sum mu_i v_i^2``.  For frozen ``chi``
the system is diagonal, so the whole problem collapses to the scalar fixed
point ``chi = Phi(chi)`` with

    Phi(chi) = sum mu_i r_i^2 / (1 + alpha^2 mu_i + alpha chi mu_i)^2.

``Phi`` is continuous, convex and nonincreasing on ``[0, inf)``, so
``chi - Phi(chi)`` has exactly one root and it lies in ``[0, Phi(0)]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainMismatchError, InvalidDataError, InvalidToleranceError
from .state import ModalState, h_norm, ordered_sum

__all__ = [
    "ResolventProblem",
    "ResolventSolution",
    "residual_coefficients",
    "chi_fixed_point_map",
    "solve_resolvent",
    "resolvent",
    "reconstruct",
    "coercivity_slack",
    "verify_m_dissipativity",
    "verify_contraction",
    "MDissipativityReport",
    "ContractionReport",
    "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-12
_BRACKET_RTOL = 1e-14
_MAX_NEWTON = 8


@dataclass(frozen=True, eq=False)
class ResolventProblem:
    alpha: float
    f: np.ndarray
    g: np.ndarray
    domain: object

    def __post_init__(self):
        n = self.domain.size
        f = np.array(self.f, dtype=float)
        g = np.array(self.g, dtype=float)
        if f.shape != (n,) or g.shape != (n,):
            raise InvalidDataError(f"data vectors must have length {n}")
        if not (math.isfinite(self.alpha) and np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            raise InvalidDataError("resolvent data must be finite")
        if not self.alpha > 0:
            raise InvalidDataError(f"alpha must be positive, got {self.alpha}")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)

    @classmethod
    def from_state(cls, alpha: float, state: ModalState) -> "ResolventProblem":
        return cls(alpha, state.a, state.b, state.domain)


@dataclass(frozen=True, eq=False)
class ResolventSolution:
    u: np.ndarray
    v: np.ndarray
    chi_star: float
    iterations: int
    residual: float
    domain: object = field(repr=False)

    def state(self) -> ModalState:
        return ModalState(self.u, self.v, self.domain)


def residual_coefficients(problem: ResolventProblem) -> np.ndarray:
    """Right-hand side ``r_i = g_i - alpha mu_i f_i`` of the modal system."""
    mu = problem.domain.eigenvalues
    return problem.g - problem.alpha * mu * problem.f


def chi_fixed_point_map(problem: ResolventProblem, chi: float) -> float:
    if chi < 0:
        raise InvalidDataError(f"chi must be nonnegative, got {chi}")
    mu = problem.domain.eigenvalues
    r = residual_coefficients(problem)
    a = problem.alpha
    return ordered_sum(mu * r * r / (1.0 + a * a * mu + a * chi * mu) ** 2)


def _solve_modal(mu, alpha, f, g, tol):
    """Array-level solve used by the time steppers; returns (u, v, chi, iterations, residual)."""
    r = g - alpha * mu * f
    if not np.any(r):
        return f.copy(), np.zeros_like(f), 0.0, 0, 0.0
    num = mu * r * r
    d = 1.0 + alpha * alpha * mu
    e = alpha * mu

    def phi(c):
        return float(np.cumsum(num / (d + e * c) ** 2)[-1])

    phi0 = phi(0.0)
    lo, hi = 0.0, phi0
    width = _BRACKET_RTOL * max(1.0, phi0)
    its = 0
    chi_s = lo
    h = -phi0
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        its += 1
        h = mid - phi(mid)
        if h < 0.0:
            lo = mid
        elif h > 0.0:
            hi = mid
        if h == 0.0 or abs(h) <= 0.01 * tol:
            lo = hi = mid
            break
    chi_s = lo
    h = chi_s - phi(chi_s)
    # h is concave and increasing, so Newton from the left of the root stays left
    for _ in range(_MAX_NEWTON):
        if abs(h) <= 0.01 * tol:
            break
        dphi = -2.0 * float(np.cumsum(num * e / (d + e * chi_s) ** 3)[-1])
        step = h / (1.0 - dphi)
        nxt = min(max(chi_s - step, lo), hi)
        if nxt == chi_s:
            break
        its += 1
        chi_s = nxt
        h = chi_s - phi(chi_s)
    v = r / (d + e * chi_s)
    u = f + alpha * v
    return u, v, chi_s, its, abs(h)


def solve_resolvent(problem: ResolventProblem, tol: float = DEFAULT_TOL) -> ResolventSolution:
    """Solve ``(I - alpha A)(u, v) = (f, g)``.

    The scalar ``chi`` is located by bisection on ``[0, Phi(0)]`` and polished
    with Newton steps; ``residual`` is the final ``|chi - Phi(chi)|``.  Inputs
    with ``r = 0`` return the zero-velocity solution ``u = f`` directly.
    """
    if not (isinstance(tol, (int, float)) and tol > 0 and math.isfinite(tol)):
        raise InvalidToleranceError(f"tol must be positive and finite, got {tol!r}")
    mu = problem.domain.eigenvalues
    u, v, c, its, res = _solve_modal(mu, problem.alpha, problem.f, problem.g, tol)
    return ResolventSolution(u, v, c, its, res, problem.domain)


def resolvent(state: ModalState, alpha: float, tol: float = DEFAULT_TOL) -> ModalState:
    """``J_alpha(state)``; one implicit Euler step of size ``alpha``."""
    return solve_resolvent(ResolventProblem.from_state(alpha, state), tol).state()


def reconstruct(problem: ResolventProblem, solution: ResolventSolution) -> ModalState:
    """Apply ``I - alpha A`` to the solution; should reproduce ``(f, g)``."""
    if problem.domain != solution.domain:
        raise DomainMismatchError("solution and problem live on different domains")
    mu = problem.domain.eigenvalues
    a = problem.alpha
    u, v = solution.u, solution.v
    c = ordered_sum(mu * v * v)
    return ModalState(u - a * v, v + a * mu * u + a * c * mu * v, problem.domain)


def coercivity_slack(problem: ResolventProblem, solution: ResolventSolution) -> tuple[float, float]:
    """Slacks of the a priori estimate for the resolvent velocity.

    Returns ``(printed, sharp)``:

    * ``printed = 2 a F + G/2 - L``
    * ``sharp = F/2 + G/2 - L``

    where ``L = a^2 X / 2 + ||v||^2 / 2 + a X^2``, ``X = ||grad v||^2``,
    ``F = ||grad f||^2`` and ``G = ||g||^2``.  The sharp form follows from
    the energy identity of the modal system for every ``a > 0``; the
    printed right-hand side dominates it only when ``a >= 1/4``.
    """
    mu = problem.domain.eigenvalues
    a = problem.alpha
    v = solution.v
    X = ordered_sum(mu * v * v)
    lhs = 0.5 * a * a * X + 0.5 * ordered_sum(v * v) + a * X * X
    F = ordered_sum(mu * problem.f * problem.f)
    G = ordered_sum(problem.g * problem.g)
    return 2.0 * a * F + 0.5 * G - lhs, 0.5 * F + 0.5 * G - lhs


def random_problem(domain, rng: np.random.Generator, alpha_range=(1e-3, 1e3)) -> ResolventProblem:
    """Log-uniform ``alpha``; ``f`` scaled so both data parts are O(1) in H."""
    lo, hi = np.log10(alpha_range[0]), np.log10(alpha_range[1])
    alpha = float(10.0 ** rng.uniform(lo, hi))
    n = domain.size
    f = rng.standard_normal(n) / np.sqrt(domain.eigenvalues)
    g = rng.standard_normal(n)
    return ResolventProblem(alpha, f, g, domain)


@dataclass
class MDissipativityReport:
    trials: int
    max_residual: float
    max_chi_residual: float
    min_coercivity_slack: float
    min_sharp_coercivity_slack: float
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def verify_m_dissipativity(
    domain,
    trials: int = 100,
    tol: float = 1e-9,
    seed: int = 0,
    alpha_range: tuple[float, float] = (1e-3, 1e3),
    solver_tol: float = DEFAULT_TOL,
    problems=None,
) -> MDissipativityReport:
    """Solve random resolvent problems and check ``(I - alpha A) J_alpha = I``.

    Each solve must reproduce ``(f, g)`` within ``tol`` in the H norm.
    Failures are collected in the report rather than raised.
    """
    if problems is None:
        if trials < 1:
            raise InvalidDataError("trials must be >= 1")
        rng = np.random.default_rng(seed)
        problems = (random_problem(domain, rng, alpha_range) for _ in range(trials))
    max_res = 0.0
    max_chi = 0.0
    min_slack = math.inf
    min_sharp = math.inf
    failures = []
    count = 0
    for i, prob in enumerate(problems):
        count += 1
        try:
            sol = solve_resolvent(prob, solver_tol)
        except Exception as exc:  # reported, not raised
            failures.append((i, prob.alpha, repr(exc)))
            continue
        rec = reconstruct(prob, sol)
        res = h_norm(rec - ModalState(prob.f, prob.g, domain))
        printed, sharp = coercivity_slack(prob, sol)
        max_res = max(max_res, res)
        max_chi = max(max_chi, sol.residual)
        min_slack = min(min_slack, printed)
        min_sharp = min(min_sharp, sharp)
        if not res <= tol:
            failures.append((i, prob.alpha, f"H residual {res:.3e} > {tol:.1e}"))
    return MDissipativityReport(count, max_res, max_chi, min_slack, min_sharp, failures)


@dataclass
class ContractionReport:
    trials: int
    max_excess: float

    def passed(self, tol: float = 1e-10) -> bool:
        return self.max_excess <= tol


def verify_contraction(
    domain,
    trials: int = 100,
    seed: int = 0,
    alpha_range: tuple[float, float] = (1e-3, 1e3),
    solver_tol: float = DEFAULT_TOL,
) -> ContractionReport:
    """Worst ``||J U1 - J U2||_H - ||U1 - U2||_H`` over random pairs."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(trials):
        p1 = random_problem(domain, rng, alpha_range)
        p2 = random_problem(domain, rng, alpha_range)
        p2 = ResolventProblem(p1.alpha, p2.f, p2.g, domain)
        s1 = solve_resolvent(p1, solver_tol).state()
        s2 = solve_resolvent(p2, solver_tol).state()
        d_in = h_norm(ModalState(p1.f, p1.g, domain) - ModalState(p2.f, p2.g, domain))
        worst = max(worst, h_norm(s1 - s2) - d_in)
    return ContractionReport(trials, worst)
