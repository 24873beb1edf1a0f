"""Phase-space algebra for U = (u, u_t) in modal coordinates.

A state holds the eigen-coefficients ``a`` of the displacement and ``b`` of
the velocity.  The energy space norm is

    ||(u, v)||_H^2 = ||grad u||^2 + ||v||^2 = sum mu_i a_i^2 + sum b_i^2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import DomainMismatchError, InvalidDataError

if TYPE_CHECKING:
    from .spectral import SpectralDomain

__all__ = [
    "ModalState",
    "ordered_sum",
    "chi",
    "h_inner",
    "h_norm",
    "apply_operator",
    "dissipativity_gap",
]


def ordered_sum(values: np.ndarray) -> float:
    # strictly left-to-right accumulation; np.sum switches to pairwise blocks
    return float(np.cumsum(values)[-1]) if len(values) else 0.0


@dataclass(frozen=True, eq=False)
class ModalState:
    a: np.ndarray
    b: np.ndarray
    domain: "SpectralDomain"

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        n = self.domain.size
        if a.shape != (n,) or b.shape != (n,):
            raise InvalidDataError(f"coefficient vectors must have length {n}, got {a.shape} and {b.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise InvalidDataError("state has non-finite entries")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def zeros(cls, domain: "SpectralDomain") -> "ModalState":
        return cls(np.zeros(domain.size), np.zeros(domain.size), domain)

    @classmethod
    def from_vector(cls, y: np.ndarray, domain: "SpectralDomain") -> "ModalState":
        n = domain.size
        return cls(y[:n], y[n:], domain)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.a, self.b])

    @property
    def mu(self) -> np.ndarray:
        return self.domain.eigenvalues

    def _check(self, other: "ModalState"):
        if self.domain != other.domain:
            raise DomainMismatchError("states belong to different spectral domains")

    def __add__(self, other: "ModalState") -> "ModalState":
        self._check(other)
        return ModalState(self.a + other.a, self.b + other.b, self.domain)

    def __sub__(self, other: "ModalState") -> "ModalState":
        self._check(other)
        return ModalState(self.a - other.a, self.b - other.b, self.domain)

    def __mul__(self, c: float) -> "ModalState":
        return ModalState(c * self.a, c * self.b, self.domain)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, ModalState):
            return NotImplemented
        return (
            self.domain == other.domain
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
        )

    __hash__ = None


def chi(state: ModalState) -> float:
    """Nonlocal damping coefficient ``||grad u_t||^2 = sum mu_i b_i^2``."""
    return ordered_sum(state.mu * state.b * state.b)


def h_inner(s1: ModalState, s2: ModalState) -> float:
    s1._check(s2)
    mu = s1.mu
    return ordered_sum(mu * s1.a * s2.a) + ordered_sum(s1.b * s2.b)


def h_norm(state: ModalState) -> float:
    return float(np.sqrt(max(h_inner(state, state), 0.0)))


def apply_operator(state: ModalState) -> ModalState:
    """Modal image of ``A(u, v) = (v, Lap u + ||grad v||^2 Lap v)``."""
    mu = state.mu
    c = chi(state)
    return ModalState(state.b.copy(), -mu * state.a - c * mu * state.b, state.domain)


def dissipativity_gap(s1: ModalState, s2: ModalState) -> tuple[float, float]:
    """Return ``(gap, certificate)``.

    ``gap = <A s1 - A s2, s1 - s2>_H`` and ``certificate = -(chi1 - chi2)^2 / 2``;
    dissipativity of A means ``gap <= certificate <= 0``.
    """
    s1._check(s2)
    mu = s1.mu
    c1, c2 = chi(s1), chi(s2)
    da, db = s1.a - s2.a, s1.b - s2.b
    # components of A s1 - A s2, evaluated without building intermediate states
    op_a = db
    op_b = (-mu * s1.a - c1 * mu * s1.b) - (-mu * s2.a - c2 * mu * s2.b)
    gap = ordered_sum(mu * op_a * da) + ordered_sum(op_b * db)
    return gap, -0.5 * (c1 - c2) ** 2
