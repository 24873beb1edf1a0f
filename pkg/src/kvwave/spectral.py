"""Dirichlet Laplacian eigenpairs on intervals and rectangles, and projection
of initial data onto the truncated sine basis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import InvalidConfigurationError, ProjectionAccuracyError
from .state import ModalState

__all__ = [
    "Interval",
    "Rectangle",
    "SpectralDomain",
    "InitialData",
    "build_domain",
    "project_initial_data",
]

# Gauss-Legendre points per panel for profile projection
_GL_ORDER_1D = 12
_GL_ORDER_2D = 8


@dataclass(frozen=True)
class Interval:
    length: float


@dataclass(frozen=True)
class Rectangle:
    lx: float
    ly: float


Geometry = Union[Interval, Rectangle]


@dataclass(frozen=True, eq=False)
class SpectralDomain:
    """Truncated eigenbasis of -Laplace with homogeneous Dirichlet conditions.

    Eigenvalues are stored as ``eigenvalues`` (sorted, nondecreasing) with the
    matching axis wavenumbers in ``labels``; ``poincare_constant`` is
    ``1 / eigenvalues[0]``, the constant in ``||w||^2 <= c ||grad w||^2``.
    """

    geometry: Geometry
    mode_count: int
    eigenvalues: np.ndarray = field(repr=False)
    labels: tuple = field(repr=False)
    poincare_constant: float

    @property
    def size(self) -> int:
        return len(self.eigenvalues)

    @property
    def key(self) -> tuple:
        return (self.geometry, self.mode_count)

    def __eq__(self, other):
        if not isinstance(other, SpectralDomain):
            return NotImplemented
        return self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def basis(self, *coords: np.ndarray) -> np.ndarray:
        """Evaluate the L2-orthonormal eigenfunctions at points.

        Returns an array of shape ``(n_points, size)``.
        """
        if isinstance(self.geometry, Interval):
            (x,) = coords
            L = self.geometry.length
            k = np.array([lab[0] for lab in self.labels], dtype=float)
            return math.sqrt(2.0 / L) * np.sin(np.outer(np.asarray(x, float), k) * math.pi / L)
        x, y = coords
        lx, ly = self.geometry.lx, self.geometry.ly
        j = np.array([lab[0] for lab in self.labels], dtype=float)
        k = np.array([lab[1] for lab in self.labels], dtype=float)
        sx = np.sin(np.outer(np.asarray(x, float), j) * math.pi / lx)
        sy = np.sin(np.outer(np.asarray(y, float), k) * math.pi / ly)
        return 2.0 / math.sqrt(lx * ly) * sx * sy

    def index_of(self, label) -> int:
        """1-based flattened index of an axis label such as ``(2,)`` or ``(1, 3)``."""
        label = tuple(label)
        try:
            return self.labels.index(label) + 1
        except ValueError:
            raise KeyError(f"mode {label} is not in this truncation") from None

    def zero_state(self) -> ModalState:
        return ModalState.zeros(self)


def build_domain(geometry: Geometry, mode_count: int) -> SpectralDomain:
    """Build the analytic Dirichlet spectrum.

    For a rectangle ``mode_count`` is per axis, giving ``mode_count**2``
    modes; equal eigenvalues are ordered lexicographically in ``(j, k)``.
    """
    if isinstance(mode_count, bool) or not isinstance(mode_count, (int, np.integer)):
        raise InvalidConfigurationError(f"mode_count must be an integer, got {mode_count!r}")
    if mode_count < 1:
        raise InvalidConfigurationError(f"mode_count must be >= 1, got {mode_count}")
    if isinstance(geometry, Interval):
        if not (geometry.length > 0 and math.isfinite(geometry.length)):
            raise InvalidConfigurationError(f"interval length must be positive, got {geometry.length}")
        labels = tuple((k,) for k in range(1, mode_count + 1))
        mu = np.array([(k * math.pi / geometry.length) ** 2 for (k,) in labels])
    elif isinstance(geometry, Rectangle):
        if not (geometry.lx > 0 and geometry.ly > 0 and math.isfinite(geometry.lx) and math.isfinite(geometry.ly)):
            raise InvalidConfigurationError(
                f"rectangle lengths must be positive, got ({geometry.lx}, {geometry.ly})"
            )
        pairs = [(j, k) for j in range(1, mode_count + 1) for k in range(1, mode_count + 1)]
        vals = {p: (p[0] * math.pi / geometry.lx) ** 2 + (p[1] * math.pi / geometry.ly) ** 2 for p in pairs}
        # stable sort keeps (j, k)-lexicographic order among ties
        labels = tuple(sorted(pairs, key=lambda p: vals[p]))
        mu = np.array([vals[p] for p in labels])
    else:
        raise InvalidConfigurationError(f"unsupported geometry {geometry!r}")
    mu.setflags(write=False)
    return SpectralDomain(
        geometry=geometry,
        mode_count=int(mode_count),
        eigenvalues=mu,
        labels=labels,
        poincare_constant=1.0 / mu[0],
    )


@dataclass(frozen=True)
class InitialData:
    """Initial displacement or velocity.

    ``kind`` is ``"mode_sum"`` (``single_mode`` is a one-term mode sum) or
    ``"profile"``, in which case ``profile`` is a vectorized callable of
    ``x`` (interval) or ``x, y`` (rectangle).
    """

    kind: str
    modes: tuple = ()
    profile: Callable | None = None

    @classmethod
    def zero(cls) -> "InitialData":
        return cls("mode_sum", ())

    @classmethod
    def single_mode(cls, index: int, amplitude: float) -> "InitialData":
        return cls("mode_sum", ((int(index), float(amplitude)),))

    @classmethod
    def mode_sum(cls, terms: Sequence[tuple[int, float]]) -> "InitialData":
        return cls("mode_sum", tuple((int(k), float(a)) for k, a in terms))

    @classmethod
    def from_profile(cls, func: Callable) -> "InitialData":
        return cls("profile", (), func)


def _gauss_panels(length: float, panels: int, order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    h = length / panels
    left = np.arange(panels) * h
    x = (left[:, None] + 0.5 * h * (nodes[None, :] + 1.0)).ravel()
    w = np.tile(0.5 * h * weights, panels)
    return x, w


def _profile_coefficients(domain: SpectralDomain, func: Callable, panels: int) -> np.ndarray:
    geom = domain.geometry
    if isinstance(geom, Interval):
        x, w = _gauss_panels(geom.length, panels, _GL_ORDER_1D)
        fx = np.broadcast_to(np.asarray(func(x), dtype=float), x.shape)
        return domain.basis(x).T @ (w * fx)
    x, wx = _gauss_panels(geom.lx, panels, _GL_ORDER_2D)
    y, wy = _gauss_panels(geom.ly, panels, _GL_ORDER_2D)
    fxy = np.broadcast_to(np.asarray(func(x[:, None], y[None, :]), dtype=float), (len(x), len(y)))
    m = domain.mode_count
    axis = np.arange(1, m + 1)
    sx = np.sin(np.outer(x, axis) * math.pi / geom.lx)
    sy = np.sin(np.outer(y, axis) * math.pi / geom.ly)
    full = (sx * wx[:, None]).T @ fxy @ (sy * wy[:, None])
    full *= 2.0 / math.sqrt(geom.lx * geom.ly)
    return np.array([full[j - 1, k - 1] for j, k in domain.labels])


def _project(domain: SpectralDomain, data: InitialData, rtol: float, max_panels: int | None) -> np.ndarray:
    n = domain.size
    if data.kind == "mode_sum":
        c = np.zeros(n)
        for k, amp in data.modes:
            if not 1 <= k <= n:
                raise InvalidConfigurationError(f"mode index {k} outside 1..{n}")
            if not math.isfinite(amp):
                raise InvalidConfigurationError(f"non-finite amplitude for mode {k}")
            c[k - 1] += amp
        return c
    if data.kind != "profile" or data.profile is None:
        raise InvalidConfigurationError(f"unknown initial data kind {data.kind!r}")

    is_interval = isinstance(domain.geometry, Interval)
    if max_panels is None:
        max_panels = 2**14 if is_interval else 2**9
    panels = max(8, 2 * domain.mode_count) if is_interval else max(4, 2 * domain.mode_count)
    prev = _profile_coefficients(domain, data.profile, panels)
    change = math.inf
    while panels * 2 <= max_panels:
        panels *= 2
        cur = _profile_coefficients(domain, data.profile, panels)
        if not np.all(np.isfinite(cur)):
            raise ProjectionAccuracyError("profile produced non-finite values")
        scale = np.max(np.abs(cur))
        diff = np.max(np.abs(cur - prev))
        change = 0.0 if diff == 0.0 else diff / scale
        if change < rtol:
            return cur
        prev = cur
    raise ProjectionAccuracyError(
        f"projection not converged: relative change {change:.3e} >= {rtol:.1e} at {panels} panels"
    )


def project_initial_data(
    domain: SpectralDomain,
    u0: InitialData,
    u1: InitialData,
    rtol: float = 1e-10,
    max_panels: int | None = None,
) -> ModalState:
    """Return the modal state ``a_i = (u0, w_i)``, ``b_i = (u1, w_i)``.

    Profiles are integrated with composite Gauss-Legendre quadrature; the
    panel count doubles until the largest relative coefficient change drops
    below ``rtol``.
    """
    a = _project(domain, u0, rtol, max_panels)
    b = _project(domain, u1, rtol, max_panels)
    return ModalState(a, b, domain)
