"""Analytic emission densities on [0, 1] used by the benchmark HMM.

Each density knows how to evaluate itself, how to draw samples, and where its
non-smooth points are (so that quadrature panels can be aligned on them).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special


class Density:
    """Interface shared by every emission density on [0, 1]."""

    name: str = "density"
    breakpoints: tuple[float, ...] = ()

    def pdf(self, y):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, y):
        return self.pdf(y)


@dataclass(frozen=True)
class Uniform(Density):
    name: str = "uniform"

    def pdf(self, y):
        y = np.asarray(y, dtype=float)
        return np.ones_like(y)

    def sample(self, rng, size):
        return rng.random(size)


def _beta_pdf(y, a: float, b: float):
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = (y >= 0.0) & (y <= 1.0)
    yi = y[inside]
    with np.errstate(divide="ignore"):
        logp = (a - 1.0) * np.log(yi) + (b - 1.0) * np.log1p(-yi) - special.betaln(a, b)
    out[inside] = np.exp(logp)
    return out


@dataclass(frozen=True)
class Beta(Density):
    a: float = 3.0
    b: float = 7.0
    name: str = "beta"

    def pdf(self, y):
        return _beta_pdf(y, self.a, self.b)

    def sample(self, rng, size):
        return rng.beta(self.a, self.b, size)


@dataclass(frozen=True)
class SymBeta(Density):
    """Equal-weight mixture of ``scale * X`` and ``1 - (1 - scale) * X'``.

    ``X, X'`` are i.i.d. Beta(a, b).  With the default ``scale = 2/3`` the two
    pieces meet at y = 2/3, where the density has a Hölder-(b - 1) kink.
    """

    a: float = 3.0
    b: float = 1.6
    scale: float = 2.0 / 3.0
    name: str = "symbeta"
    breakpoints: tuple[float, ...] = field(default=(2.0 / 3.0,))

    def pdf(self, y):
        y = np.asarray(y, dtype=float)
        s = self.scale
        left = np.where(y <= s, _beta_pdf(y / s, self.a, self.b) / s, 0.0)
        right = np.where(y >= s, _beta_pdf((1.0 - y) / (1.0 - s), self.a, self.b) / (1.0 - s), 0.0)
        return 0.5 * (left + right)

    def sample(self, rng, size):
        x = rng.beta(self.a, self.b, size)
        flip = rng.random(size) < 0.5
        return np.where(flip, 1.0 - (1.0 - self.scale) * x, self.scale * x)


@dataclass(frozen=True)
class TrigPolynomial(Density):
    """Density given by trigonometric-basis coefficients (first one must be 1).

    Sampling is by rejection from the uniform law; the envelope is the
    triangle-inequality bound ``sum |c_a| * sup|phi_a|``.
    """

    coeffs: tuple[float, ...] = (1.0,)
    name: str = "trigpoly"

    def pdf(self, y):
        from .bases import trig_features

        y = np.atleast_1d(np.asarray(y, dtype=float))
        return trig_features(y, len(self.coeffs)) @ np.asarray(self.coeffs)

    def sample(self, rng, size):
        c = np.asarray(self.coeffs)
        bound = abs(c[0]) + np.sqrt(2.0) * np.abs(c[1:]).sum()
        out = np.empty(0)
        while out.size < size:
            need = size - out.size
            y = rng.random(2 * need + 16)
            u = rng.random(y.size) * bound
            out = np.concatenate([out, y[u < self.pdf(y)]])
        return out[:size]


_NAMED = {
    "uniform": Uniform,
    "beta": Beta,
    "beta(3,7)": Beta,
    "symbeta": SymBeta,
    "symbeta(3,1.6)": SymBeta,
}


def get_density(name: str) -> Density:
    """Look up one of the benchmark densities by name."""
    key = name.strip().lower().replace(" ", "")
    try:
        return _NAMED[key]()
    except KeyError:
        raise ValueError(f"unknown density {name!r}; known: {sorted(_NAMED)}") from None
