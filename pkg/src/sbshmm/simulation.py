"""Ground-truth HMMs, sampling, error metrics and rate regression."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .bases import Basis, BasisKind, project_true_density
from .densities import get_density
from .params import HmmParams
from .selection import EstimatorFamily, SelectionResult, best_permutation

BENCHMARK_Q = np.array([
    [0.70, 0.10, 0.20],
    [0.08, 0.80, 0.12],
    [0.15, 0.15, 0.70],
])
BENCHMARK_DENSITIES = ("uniform", "symbeta", "beta")


class NoUniqueStationary(ValueError):
    pass


def true_density(name: str, y):
    return get_density(name).pdf(y)


def _is_primitive(Q: np.ndarray) -> bool:
    K = Q.shape[0]
    A = (Q > 0).astype(float)
    power = np.linalg.matrix_power(A, (K - 1) ** 2 + 1)
    return bool(np.all(power > 0))


def stationary_distribution(Q) -> np.ndarray:
    """Unique ``pi`` with ``pi Q = pi``; the chain must be irreducible and aperiodic."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    K = Q.shape[0]
    if Q.shape != (K, K) or np.any(Q < 0) or not np.allclose(Q.sum(axis=1), 1.0):
        raise ValueError("Q must be a square row-stochastic matrix")
    if not _is_primitive(Q):
        raise NoUniqueStationary("Q is reducible or periodic")
    A = np.vstack([Q.T - np.eye(K), np.ones((1, K))])
    b = np.zeros(K + 1)
    b[-1] = 1.0
    pi = np.linalg.lstsq(A, b, rcond=None)[0]
    return np.maximum(pi, 0.0) / np.maximum(pi, 0.0).sum()


@dataclass
class GroundTruth:
    """A stationary HMM with analytic emission densities."""

    Q: np.ndarray
    emissions: tuple
    pi: np.ndarray = None
    quadrature_points: int = 4096
    _proj: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.emissions = tuple(get_density(e) if isinstance(e, str) else e for e in self.emissions)
        if len(self.emissions) != self.Q.shape[0]:
            raise ValueError("one emission density per state is required")
        if self.pi is None:
            self.pi = stationary_distribution(self.Q)

    @property
    def K(self) -> int:
        return self.Q.shape[0]

    @property
    def names(self) -> list[str]:
        return [getattr(e, "name", f"state{k}") for k, e in enumerate(self.emissions)]

    def projection(self, basis: Basis, M: int) -> np.ndarray:
        """``M x K`` coefficients of the true densities (cached at >= 512 rows)."""
        have = self._proj.get(basis.kind)
        if have is None or have.shape[0] < M:
            size = max(M, 512)
            big = Basis(basis.kind, size)
            have = np.column_stack([
                project_true_density(big, size, e, self.quadrature_points).coeffs
                for e in self.emissions
            ])
            self._proj[basis.kind] = have
        return have[:M]

    def squared_norms(self, basis: Basis) -> np.ndarray:
        """``||f_k||_2^2`` by quadrature (needed for bias terms beyond any projection)."""
        from .bases import gauss_legendre_nodes

        out = []
        for e in self.emissions:
            nodes, w = gauss_legendre_nodes(1 << 15, getattr(e, "breakpoints", ()))
            sq = float(w @ e.pdf(nodes) ** 2)
            if basis.kind is BasisKind.DIRAC_TRIG:
                sq += float(e.pdf(np.array([0.0]))[0]) ** 2
            out.append(sq)
        return np.array(out)

    def params(self, basis: Basis, M: int) -> HmmParams:
        return HmmParams(self.pi, self.Q, self.projection(basis, M), basis)


def benchmark_truth() -> GroundTruth:
    """Three-state benchmark: uniform, symmetrised Beta(3, 1.6), Beta(3, 7)."""
    return GroundTruth(BENCHMARK_Q.copy(), BENCHMARK_DENSITIES)


def sample_hidden_chain(pi, Q, length: int, rng: np.random.Generator) -> np.ndarray:
    K = Q.shape[0]
    cum = np.cumsum(Q, axis=1)
    cum[:, -1] = 1.0
    u = rng.random(length)
    x = np.empty(length, dtype=np.int64)
    x[0] = min(int(np.searchsorted(np.cumsum(pi), u[0], side="right")), K - 1)
    rows = [c.tolist() for c in cum]
    # scalar loop: a Markov chain is inherently sequential
    from bisect import bisect_right

    state = int(x[0])
    for t in range(1, length):
        state = min(bisect_right(rows[state], u[t]), K - 1)
        x[t] = state
    return x


def sample_hmm(truth: GroundTruth, n: int, seed: int = 0, return_states: bool = False):
    """``n + 2`` observations from the stationary HMM (hidden path optional)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    stationary_distribution(truth.Q)
    rng = np.random.default_rng(seed)
    x = sample_hidden_chain(truth.pi, truth.Q, n + 2, rng)
    y = np.empty(n + 2)
    for k, e in enumerate(truth.emissions):
        idx = np.nonzero(x == k)[0]
        y[idx] = e.sample(rng, idx.size)
    np.clip(y, 0.0, 1.0, out=y)
    return (y, x) if return_states else y


def d_perm(theta1: HmmParams, theta2: HmmParams) -> float:
    """Permutation-invariant distance on ``(pi, Q, f)``, exhaustive over ``K!``."""
    if theta1.K != theta2.K:
        raise ValueError("parameters have different numbers of states")
    K = theta1.K
    M = max(theta1.M, theta2.M)
    O1 = np.zeros((M, K))
    O1[: theta1.M] = theta1.O
    O2 = np.zeros((M, K))
    O2[: theta2.M] = theta2.O
    best = math.inf
    for tau in itertools.permutations(range(K)):
        t = list(tau)
        v = (np.sum((theta1.pi - theta2.pi[t]) ** 2)
             + np.sum((theta1.Q - theta2.Q[np.ix_(t, t)]) ** 2)
             + np.sum((O1 - O2[:, t]) ** 2))
        best = min(best, v)
    return float(math.sqrt(best))


def match_to_truth(family: EstimatorFamily, truth: GroundTruth, M: int | None = None) -> np.ndarray:
    """Permutation mapping truth state ``k`` to family column ``perm[k]``."""
    M = family.reference_model if M is None else M
    if M is None:
        M = family.model_grid[len(family.model_grid) // 2]
    ref = truth.projection(family.basis, M)
    return best_permutation(family.models[M].O, ref)


@dataclass
class StateErrors:
    errors: dict
    l2_error: float | None
    oracle_error: float
    oracle_M: int


def error_curves(family: EstimatorFamily, truth: GroundTruth, perm=None) -> np.ndarray:
    """``(K, G)`` true L2 errors of every family member, states in truth order."""
    if perm is None:
        perm = match_to_truth(family, truth)
    grid = family.model_grid
    Mtop = grid[-1]
    proj = truth.projection(family.basis, Mtop)
    total = truth.squared_norms(family.basis)
    out = np.empty((truth.K, len(grid)))
    for i, M in enumerate(grid):
        O = family.models[M].O[:, perm]
        diff = np.sum((O - proj[:M]) ** 2, axis=0)
        # energy of the truth beyond the first M coefficients
        tail = np.maximum(total - np.sum(proj[:M] ** 2, axis=0), 0.0)
        out[:, i] = np.sqrt(diff + tail)
    return out


def bias_curves(family: EstimatorFamily, truth: GroundTruth) -> np.ndarray:
    """``(K, G)`` approximation errors ``||f_k - f_k^(M)||`` over the family's grid."""
    grid = family.model_grid
    proj = truth.projection(family.basis, grid[-1])
    total = truth.squared_norms(family.basis)
    energy = np.cumsum(proj ** 2, axis=0)
    return np.sqrt(np.maximum(total[:, None] - energy[np.array(grid) - 1].T, 0.0))


def error_report(family: EstimatorFamily, truth: GroundTruth,
                 selection: SelectionResult | None = None, perm=None) -> list[StateErrors]:
    """Per truth state: errors over the grid, selected error and oracle."""
    if perm is None:
        perm = match_to_truth(family, truth)
    grid = family.model_grid
    curves = error_curves(family, truth, perm)
    out = []
    for k in range(truth.K):
        j = int(np.argmin(curves[k]))
        sel = None
        if selection is not None:
            M_hat = selection.per_state[int(perm[k])].M_hat
            sel = float(curves[k, grid.index(M_hat)])
        out.append(StateErrors(dict(zip(grid, curves[k].tolist())), sel,
                               float(curves[k, j]), grid[j]))
    return out


@dataclass
class RateFit:
    slope: float
    stderr: float
    intercept: float
    points: list


@dataclass
class RateReport:
    per_state: dict


class InsufficientPoints(ValueError):
    pass


def rate_regression(points, n_min: float = 0.0) -> RateFit:
    """OLS slope of ``log(error)`` on ``log(n)`` over points with ``n >= n_min``."""
    pts = [(float(n), float(e)) for n, e in points if float(n) >= n_min]
    if len(pts) < 3:
        raise InsufficientPoints(f"need >= 3 points with n >= {n_min}, got {len(pts)}")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    if np.ptp(x) == 0:
        raise InsufficientPoints("all points share the same n")
    fit = stats.linregress(x, y)
    return RateFit(float(fit.slope), float(fit.stderr), float(fit.intercept),
                   list(zip(x.tolist(), y.tolist())))


def default_n_min(ns) -> float:
    """60th percentile of the available sample sizes."""
    return float(np.percentile(np.asarray(ns, dtype=float), 60, method="lower"))


def rate_report(points_by_state: dict, n_min: float | None = None) -> RateReport:
    if n_min is None:
        ns = [n for pts in points_by_state.values() for n, _ in pts]
        n_min = default_n_min(ns)
    return RateReport({k: rate_regression(p, n_min) for k, p in points_by_state.items()})
