"""Nested orthonormal bases on [0, 1] and L2 geometry in coefficient space.

Two families are supported:

* ``trig``: ``phi_1 = 1``, ``phi_{2j} = sqrt(2) cos(2 pi j x)``,
  ``phi_{2j+1} = sqrt(2) sin(2 pi j x)``, orthonormal for Lebesgue measure.
* ``dirac_trig``: an atom ``phi_0 = 1{x = 0}`` followed by the trigonometric
  functions restricted to ``x != 0``, orthonormal for ``delta_0 + Lebesgue``.
  Coordinate 0 of a coefficient vector is always the atom.

Since every basis is orthonormal, the L2 distance between two expansions is
the Euclidean distance between their (zero padded) coefficient vectors.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .densities import Density, get_density


class BasisKind(str, enum.Enum):
    TRIG = "trig"
    DIRAC_TRIG = "dirac_trig"


@dataclass(frozen=True)
class Basis:
    kind: BasisKind
    max_dim: int

    def __post_init__(self):
        object.__setattr__(self, "kind", BasisKind(self.kind))
        if int(self.max_dim) < 1:
            raise ValueError("max_dim must be >= 1")
        object.__setattr__(self, "max_dim", int(self.max_dim))

    def features(self, y, M: int | None = None) -> np.ndarray:
        """Matrix ``(len(y), M)`` of basis functions evaluated at each point."""
        M = self.max_dim if M is None else int(M)
        if not 1 <= M <= self.max_dim:
            raise ValueError(f"M={M} outside [1, {self.max_dim}]")
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if y.size and (np.any(~np.isfinite(y)) or y.min() < 0.0 or y.max() > 1.0):
            raise ValueError("observations must lie in [0, 1]")
        if self.kind is BasisKind.TRIG:
            return trig_features(y, M)
        out = np.zeros((y.size, M))
        atom = y == 0.0
        out[atom, 0] = 1.0
        if M > 1:
            out[~atom, 1:] = trig_features(y[~atom], M - 1)
        return out

    def constant_coeffs(self, M: int) -> np.ndarray:
        """Coefficients of the constant function 1 (equivalently ``int phi_a dmu``)."""
        c = np.zeros(M)
        if self.kind is BasisKind.TRIG:
            c[0] = 1.0
        else:
            c[: min(M, 2)] = 1.0
        return c

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "max_dim": self.max_dim}

    @classmethod
    def from_dict(cls, d: dict) -> "Basis":
        return cls(BasisKind(d["kind"]), int(d["max_dim"]))


def trig_features(y: np.ndarray, M: int) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    out = np.empty((y.size, M))
    out[:, 0] = 1.0
    n_freq = M // 2
    if n_freq:
        ang = (2.0 * np.pi) * np.multiply.outer(y, np.arange(1, n_freq + 1))
        out[:, 1::2] = np.sqrt(2.0) * np.cos(ang)[:, : len(range(1, M, 2))]
        n_sin = len(range(2, M, 2))
        if n_sin:
            out[:, 2::2] = np.sqrt(2.0) * np.sin(ang[:, :n_sin])
    return out


def make_basis(kind: Union[str, BasisKind], max_dim: int) -> Basis:
    return Basis(BasisKind(kind), max_dim)


def evaluate_basis(basis: Basis, M: int, y: float) -> np.ndarray:
    """Vector ``(phi_1(y), ..., phi_M(y))`` (atom first for ``dirac_trig``)."""
    if not 0.0 <= float(y) <= 1.0:
        raise ValueError(f"y={y} outside [0, 1]")
    return basis.features(np.array([float(y)]), M)[0]


@dataclass(frozen=True)
class CoefficientDensity:
    """A function of L2(mu) stored as its coefficients on a basis."""

    basis: Basis
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float).ravel())

    @property
    def dim(self) -> int:
        return self.coeffs.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def truncate(self, M: int) -> "CoefficientDensity":
        if M > self.dim:
            raise ValueError("cannot truncate to a larger dimension")
        return CoefficientDensity(self.basis, self.coeffs[:M].copy())

    def pad(self, M: int) -> np.ndarray:
        out = np.zeros(max(M, self.dim))
        out[: self.dim] = self.coeffs
        return out

    def __call__(self, y):
        return self.basis.features(y, self.dim) @ self.coeffs


DensityLike = Union[str, Density, Callable[[np.ndarray], np.ndarray]]


def gauss_legendre_nodes(n_points: int, breakpoints=(), panel_order: int = 16,
                         grading_levels: int = 40):
    """Composite Gauss-Legendre rule on [0, 1] with roughly ``n_points`` nodes.

    Panels are equal width.  Each interior breakpoint becomes a panel edge and
    the panels touching it are split geometrically toward it, which keeps
    Hölder-type singularities at the breakpoint from limiting the accuracy.
    """
    n_panels = max(1, int(n_points) // panel_order)
    edges = np.linspace(0.0, 1.0, n_panels + 1)
    h = 1.0 / n_panels
    extra = []
    for b in breakpoints:
        if 0.0 < b < 1.0:
            offsets = h * 0.5 ** np.arange(grading_levels)
            extra.extend([b, *(b - offsets[b - offsets > 0]), *(b + offsets[b + offsets < 1])])
    edges = np.unique(np.concatenate([edges, extra]))
    x, w = np.polynomial.legendre.leggauss(panel_order)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (hi - lo) * x + 0.5 * (hi + lo)).ravel()
    weights = (0.5 * (hi - lo) * w).ravel()
    return nodes, weights


def _as_callable(density: DensityLike):
    if isinstance(density, str):
        density = get_density(density)
    return density, tuple(getattr(density, "breakpoints", ()))


def project_true_density(
    basis: Basis, M: int, density: DensityLike, quadrature_points: int = 4096
) -> CoefficientDensity:
    """Coefficients ``<f, phi_a>`` of an analytic density, by composite quadrature.

    For ``dirac_trig`` the atom coefficient is ``density(0.0)``, read as the mass
    of the point 0; the remaining coefficients integrate the Lebesgue part.
    """
    if quadrature_points < 1024:
        raise ValueError("quadrature_points must be >= 1024")
    f, breaks = _as_callable(density)
    nodes, weights = gauss_legendre_nodes(quadrature_points, breaks)
    vals = np.asarray(f(nodes), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("density is not finite at some quadrature node")
    if basis.kind is BasisKind.TRIG:
        coeffs = trig_features(nodes, M).T @ (weights * vals)
    else:
        coeffs = np.zeros(M)
        coeffs[0] = float(np.asarray(f(np.array([0.0])), dtype=float).ravel()[0])
        if M > 1:
            coeffs[1:] = trig_features(nodes, M - 1).T @ (weights * vals)
    return CoefficientDensity(basis, coeffs)


def l2_distance(a: CoefficientDensity, b: CoefficientDensity) -> float:
    if a.basis.kind != b.basis.kind:
        raise ValueError("cannot compare densities on different basis kinds")
    M = max(a.dim, b.dim)
    return float(np.linalg.norm(a.pad(M) - b.pad(M)))


def eta3_bound(m: int, M: int) -> float:
    """Closed-form bound ``32 m^2 M`` on the sup of squared triple-product differences.

    Each trig basis function is bounded by sqrt(2), so a triple product is
    bounded by 2 sqrt(2) and a squared difference of two such products by 32.
    """
    if m < 1 or M < 1 or m > M:
        raise ValueError("need 1 <= m <= M")
    return 32.0 * m * m * M
