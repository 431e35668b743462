"""State-by-state model selection over a family of projection estimators.

For each hidden state ``k`` the bias of model ``M`` is replaced by the proxy::

    A_k(M) = max_{M'} ||f^(M')_k - f^(min(M, M'))_k||_2 - sigma(M')

and ``M_k = argmin_M A_k(M) + 2 sigma(M)``.  The ``pos`` variant restricts the
max to ``M' >= M`` and takes positive parts; ``max`` compares every model with
the largest one only.  Columns must first be aligned across models so that
column ``k`` refers to the same hidden state everywhere.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .bases import Basis, CoefficientDensity


class Variant(str, enum.Enum):
    STANDARD = "standard"
    POS = "pos"
    MAX = "max"


class PenaltyKind(str, enum.Enum):
    SPECTRAL = "spectral"
    LS = "ls"


class NotAlignedError(ValueError):
    pass


@dataclass
class ModelEstimate:
    O: np.ndarray
    pi: np.ndarray
    Q: np.ndarray
    method: str = "spectral"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.O = np.asarray(self.O, dtype=float)
        self.pi = np.asarray(self.pi, dtype=float)
        self.Q = np.asarray(self.Q, dtype=float)

    def permuted(self, perm) -> "ModelEstimate":
        p = np.asarray(perm)
        return ModelEstimate(self.O[:, p], self.pi[p], self.Q[np.ix_(p, p)],
                             self.method, dict(self.diagnostics))


@dataclass
class EstimatorFamily:
    basis: Basis
    K: int
    n: int
    method: str
    models: dict
    aligned: bool = False
    reference_model: int | None = None
    failures: dict = field(default_factory=dict)

    def __post_init__(self):
        self.models = {int(M): est for M, est in sorted(self.models.items())}
        for M, est in self.models.items():
            if est.O.shape != (M, self.K):
                raise ValueError(f"model {M}: O has shape {est.O.shape}, expected {(M, self.K)}")
        self._cache = None

    @property
    def model_grid(self) -> list[int]:
        return list(self.models)

    def coefficient_stack(self) -> np.ndarray:
        """Array ``(len(grid), M_max, K)`` of zero-padded emission coefficients."""
        grid = self.model_grid
        out = np.zeros((len(grid), grid[-1], self.K))
        for i, M in enumerate(grid):
            out[i, :M] = self.models[M].O
        return out

    def distances(self) -> np.ndarray:
        """Cached ``(K, G, G)`` array of L2 distances between models, per state."""
        if self._cache is None:
            self._cache = pairwise_distances(self.coefficient_stack(), self.model_grid)
        return self._cache

    def estimate(self, M: int, k: int) -> CoefficientDensity:
        return CoefficientDensity(self.basis, self.models[M].O[:, k].copy())

    def subset(self, grid) -> "EstimatorFamily":
        keep = {int(M): self.models[int(M)] for M in grid}
        return replace(self, models=keep)


def pairwise_distances(stack: np.ndarray, dims: Sequence[int] | None = None) -> np.ndarray:
    """``D[k, i, j] = ||stack[i, :, k] - stack[j, :, k]||`` for nested models.

    Model ``i`` only has ``dims[i]`` nonzero coefficients, so the distance
    splits into the overlap ``[:dims[i]]`` plus the squared tail norm of
    model ``j`` beyond it (precomputed as suffix sums).
    """
    G, Mmax, K = stack.shape
    if dims is None:
        dims = [Mmax] * G
    out = np.zeros((K, G, G))
    for k in range(K):
        X = stack[:, :, k]
        tail = np.zeros((G, Mmax + 1))
        tail[:, :Mmax] = np.cumsum((X * X)[:, ::-1], axis=1)[:, ::-1]
        D2 = np.empty((G, G))
        for i, d in enumerate(dims):
            head = X[:, :d] - X[i, :d]
            D2[i] = np.einsum("ja,ja->j", head, head) + tail[:, d]
        D2 = 0.5 * (D2 + D2.T)
        np.fill_diagonal(D2, 0.0)
        out[k] = np.sqrt(np.maximum(D2, 0.0))
    return out


def align_family(family: EstimatorFamily, M0: int | None = None) -> EstimatorFamily:
    """Relabel every model's states to match the reference model ``M0``.

    The permutation minimises the largest per-state L2 distance to the
    reference columns (exhaustive over ``K!`` permutations).
    """
    grid = family.model_grid
    if M0 is None:
        M0 = default_reference(grid, family.K)
    if M0 not in family.models:
        raise ValueError(f"reference model {M0} not in the model grid")
    ref = family.models[M0].O
    perms = np.array(list(itertools.permutations(range(family.K))))
    new = {}
    for M, est in family.models.items():
        if M == M0:
            new[M] = est
            continue
        perm = best_permutation(est.O, ref, perms)
        new[M] = est if np.array_equal(perm, np.arange(family.K)) else est.permuted(perm)
    return replace(family, models=new, aligned=True, reference_model=M0)


def default_reference(grid: Sequence[int], K: int) -> int:
    """Smallest model with at least ``4K`` dimensions (largest model otherwise)."""
    for M in grid:
        if M >= 4 * K:
            return M
    return grid[-1]


def best_permutation(O: np.ndarray, ref: np.ndarray, perms=None) -> np.ndarray:
    """``tau`` minimising ``max_k ||O[:, tau(k)] - ref[:, k]||`` (first one on ties)."""
    K = ref.shape[1]
    if perms is None:
        perms = np.array(list(itertools.permutations(range(K))))
    d = max(O.shape[0], ref.shape[0])
    A = np.zeros((d, K))
    A[: O.shape[0]] = O
    R = np.zeros((d, K))
    R[: ref.shape[0]] = ref
    cost = np.linalg.norm(A[:, :, None] - R[:, None, :], axis=0)  # cost[j, k]
    worst = cost[perms, np.arange(K)].max(axis=1)
    return perms[int(np.argmin(worst))]


def penalty_shape(kind, M, n):
    """``sqrt(M log(n)^4 / n)`` for spectral, ``sqrt(M log(n) / n)`` for least squares."""
    kind = PenaltyKind(kind)
    M = np.asarray(M, dtype=float)
    power = 4 if kind is PenaltyKind.SPECTRAL else 1
    out = np.sqrt(M * math.log(n) ** power / n)
    return float(out) if out.ndim == 0 else out


def sigma_array(sigma, grid: Sequence[int], K: int) -> np.ndarray:
    """Normalise a penalty argument to an array ``(K, G)``."""
    if callable(sigma):
        arr = np.array([sigma(M) for M in grid], dtype=float)
    elif isinstance(sigma, Mapping):
        arr = np.array([sigma[M] for M in grid], dtype=float)
    else:
        arr = np.asarray(sigma, dtype=float)
    if arr.ndim == 1:
        arr = np.broadcast_to(arr, (K, len(grid)))
    if arr.shape != (K, len(grid)):
        raise ValueError(f"penalty has shape {arr.shape}, expected {(K, len(grid))}")
    return np.array(arr)


def a_curve(D: np.ndarray, sig: np.ndarray, variant=Variant.STANDARD) -> np.ndarray:
    """Bias proxy for one state from its distance matrix and penalty vector."""
    variant = Variant(variant)
    G = sig.size
    if variant is Variant.MAX:
        return D[-1].copy()
    E = D - sig[None, :]  # E[i, j] = D[i, j] - sigma(j)
    upper = np.triu(np.ones((G, G), dtype=bool), k=1)
    if variant is Variant.STANDARD:
        # j <= i contributes ||f^(j) - f^(j)|| - sigma(j) = -sigma(j)
        lower = -np.minimum.accumulate(sig)
        above = np.where(upper, E, -np.inf).max(axis=1)
        return np.maximum(lower, above)
    # pos: j >= i, positive part; j = i gives (-sigma)_+ = 0
    above = np.where(upper, E, -np.inf).max(axis=1)
    return np.maximum(above, 0.0)


def criterion_curve(D: np.ndarray, sig: np.ndarray, variant=Variant.STANDARD):
    variant = Variant(variant)
    A = a_curve(D, sig, variant)
    if variant is Variant.MAX:
        return A, A + sig
    return A, A + 2.0 * sig


def _check_aligned(family: EstimatorFamily):
    if not family.aligned and family.K > 1 and len(family.models) > 1:
        raise NotAlignedError("family must be aligned before selection (see align_family)")


def compute_A(family: EstimatorFamily, k: int, sigma, variant=Variant.STANDARD) -> dict:
    _check_aligned(family)
    grid = family.model_grid
    sig = sigma_array(sigma, grid, family.K)[k]
    A = a_curve(family.distances()[k], sig, variant)
    return dict(zip(grid, A.tolist()))


@dataclass
class StateSelection:
    M_hat: int
    A_curve: dict
    criterion_curve: dict


@dataclass
class SelectionResult:
    variant: Variant
    per_state: list
    sigma: dict

    @property
    def M_hat(self) -> list[int]:
        return [s.M_hat for s in self.per_state]


def select_models(family: EstimatorFamily, sigma, variant=Variant.STANDARD,
                  sigma_info: dict | None = None) -> SelectionResult:
    """Per-state minimiser of the selection criterion, ties toward the smallest model."""
    _check_aligned(family)
    variant = Variant(variant)
    grid = family.model_grid
    sig = sigma_array(sigma, grid, family.K)
    D = family.distances()
    states = []
    for k in range(family.K):
        A, crit = criterion_curve(D[k], sig[k], variant)
        i = int(np.argmin(crit))
        states.append(StateSelection(grid[i], dict(zip(grid, A.tolist())),
                                     dict(zip(grid, crit.tolist()))))
    info = {"n": family.n}
    if sigma_info:
        info.update(sigma_info)
    return SelectionResult(variant, states, info)


def selected_estimates(family: EstimatorFamily, result: SelectionResult) -> list[CoefficientDensity]:
    return [family.estimate(s.M_hat, k) for k, s in enumerate(result.per_state)]
