from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bases import Basis, CoefficientDensity


@dataclass
class HmmParams:
    """Initial law ``pi``, transition matrix ``Q`` and emission coefficients ``O``.

    Column ``k`` of ``O`` (shape ``M x K``) holds the coefficients of the
    emission density of state ``k``.
    """

    pi: np.ndarray
    Q: np.ndarray
    O: np.ndarray
    basis: Optional[Basis] = field(default=None, compare=False)

    def __post_init__(self):
        self.pi = np.asarray(self.pi, dtype=float).ravel()
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.O = np.asarray(self.O, dtype=float)
        if self.O.ndim == 1:
            self.O = self.O[:, None]
        K = self.pi.size
        if self.Q.shape != (K, K) or self.O.shape[1] != K:
            raise ValueError(
                f"inconsistent shapes: pi {self.pi.shape}, Q {self.Q.shape}, O {self.O.shape}"
            )

    @property
    def K(self) -> int:
        return self.pi.size

    @property
    def M(self) -> int:
        return self.O.shape[0]

    def emission(self, k: int) -> CoefficientDensity:
        return CoefficientDensity(self.basis, self.O[:, k].copy())

    def permuted(self, perm) -> "HmmParams":
        """Relabel states: new state ``k`` is old state ``perm[k]``."""
        p = np.asarray(perm)
        return HmmParams(self.pi[p], self.Q[np.ix_(p, p)], self.O[:, p], self.basis)

    def is_valid(self, atol: float = 1e-10) -> bool:
        return bool(
            np.all(self.pi >= -atol)
            and abs(self.pi.sum() - 1.0) <= atol
            and np.all(self.Q >= -atol)
            and np.allclose(self.Q.sum(axis=1), 1.0, atol=atol)
        )
