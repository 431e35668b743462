"""Spectral estimation of HMM parameters with randomized joint diagonalization.

Two sizes are used: ``m`` rows/slices for the outer observations and ``M`` for
the middle one, so each model ``M`` costs ``O(m^3 M)`` after a single pass
over the data.  Among ``r`` random rotations of the right singular space, the
one whose eigenvalues are best separated is kept.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bases import Basis, CoefficientDensity
from .moments import MomentTensors, accumulate_moments
from .params import HmmParams

log = logging.getLogger(__name__)

COND_TOL = 1e-12
IMAG_TOL = 1e-8


class SpectralError(RuntimeError):
    pass


class IllConditionedMoments(SpectralError):
    pass


class DiagonalizationFailure(SpectralError):
    pass


@dataclass
class SpectralEstimate:
    params: HmmParams
    separation_score: float
    attempt_index: int
    singular_values: np.ndarray
    scores: np.ndarray = field(repr=False, default=None)


def simplex_project(v) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum(x) = 1}`` (sort-and-threshold)."""
    v = np.asarray(v, dtype=float).ravel()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def transition_project(A) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return np.vstack([simplex_project(row) for row in A])


def haar_orthogonal(K: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed ``K x K`` orthogonal matrix (QR with sign correction)."""
    G = rng.standard_normal((K, K))
    Qm, R = np.linalg.qr(G)
    return Qm * np.sign(np.diag(R))


def _attempt_rng(seed: int, attempt: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, attempt])


def _fix_columns(R: np.ndarray) -> np.ndarray:
    R = R / np.linalg.norm(R, axis=0)
    pivot = np.argmax(np.abs(R), axis=0)
    return R * np.sign(R[pivot, np.arange(R.shape[1])])


def _separation(Lam: np.ndarray) -> float:
    K = Lam.shape[0]
    if K == 1:
        return math.inf
    gaps = np.abs(Lam[:, :, None] - Lam[:, None, :])
    off = ~np.eye(K, dtype=bool)
    return float(gaps[:, off].min())


def _attempt(B: np.ndarray, V: np.ndarray, seed: int, i: int):
    K = V.shape[1]
    theta = haar_orthogonal(K, _attempt_rng(seed, i))
    W = V @ theta
    C = np.einsum("bk,bij->kij", W, B)
    vals, R = np.linalg.eig(C[0])
    scale = max(np.max(np.abs(vals)), np.finfo(float).tiny)
    if np.max(np.abs(vals.imag)) > IMAG_TOL * scale or np.max(np.abs(R.imag)) > IMAG_TOL:
        return -math.inf, None
    R = _fix_columns(R.real)
    try:
        Rinv = np.linalg.inv(R)
    except np.linalg.LinAlgError:
        return -math.inf, None
    if not np.all(np.isfinite(Rinv)):
        return -math.inf, None
    Lam = np.einsum("ij,kjl,li->ki", Rinv, C, R)
    return _separation(Lam), (theta, Lam)


def spectral_estimate(tensors: MomentTensors, K: int, r: int, seed: int = 0,
                      basis: Basis | None = None, clip_alpha: float | None = None,
                      workers: int = 1) -> SpectralEstimate:
    """Estimate ``(pi, Q, O)`` from moment tensors of size ``(m, M)``.

    ``clip_alpha`` optionally clips every emission coefficient to
    ``[-n**alpha, n**alpha]``.
    """
    m, M = tensors.m, tensors.M
    if not 1 <= K <= m <= M:
        raise ValueError(f"need 1 <= K <= m <= M, got K={K}, m={m}, M={M}")
    if r < 1:
        raise ValueError("r must be >= 1")
    if not tensors.is_finite():
        raise ValueError("moment tensors contain non-finite entries")

    Uf, s, Vt = np.linalg.svd(tensors.N, full_matrices=False)
    U, V = Uf[:, :K], Vt[:K].T

    PU = U.T @ tensors.P @ U
    sv = np.linalg.svd(PU, compute_uv=False)
    if sv[-1] <= COND_TOL * max(sv[0], np.finfo(float).tiny):
        raise IllConditionedMoments(
            f"projected lag-2 matrix is singular (singular values {sv})"
        )
    TU = np.einsum("ai,abc,cj->bij", U, tensors.T, U, optimize=True)
    B = np.linalg.solve(PU[None], TU)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(lambda i: _attempt(B, V, seed, i), range(r)))
    else:
        results = [_attempt(B, V, seed, i) for i in range(r)]
    scores = np.array([res[0] for res in results])
    i0 = int(np.argmax(scores))
    if not scores[i0] > 0:
        raise DiagonalizationFailure(f"no usable joint diagonalization among {r} attempts")
    theta, Lam = results[i0][1]
    O = V @ theta @ Lam
    if clip_alpha is not None and tensors.n > 0:
        bound = float(tensors.n) ** clip_alpha
        O = np.clip(O, -bound, bound)

    Om = O[:m]
    pi_raw = _solve(U.T @ Om, U.T @ tensors.L)
    pi = simplex_project(pi_raw)
    lhs = U.T @ Om * pi[None, :]
    mid = U.T @ tensors.N @ V
    Q_raw = _solve(lhs, mid) @ _inv(O.T @ V)
    Q = transition_project(Q_raw)
    return SpectralEstimate(HmmParams(pi, Q, O, basis), float(scores[i0]), i0, s, scores)


def _solve(A, b):
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(A, b, rcond=None)[0]


def _inv(A):
    try:
        return np.linalg.inv(A)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(A)


def singular_spectrum(tensors: MomentTensors) -> np.ndarray:
    """Descending singular values of ``N``; its elbow reveals the number of states."""
    return np.linalg.svd(tensors.N, compute_uv=False)


def elbow_order(spectrum, max_states: int | None = None) -> int:
    """Number of states at the largest ratio between consecutive singular values."""
    s = np.asarray(spectrum, dtype=float)
    kmax = min(len(s) - 1, max_states or len(s) - 1)
    if kmax < 1:
        return 1
    tiny = np.finfo(float).tiny
    ratios = s[:kmax] / np.maximum(s[1 : kmax + 1], tiny)
    return int(np.argmax(ratios)) + 1


def project_density_to_simplex(f: CoefficientDensity, grid_size: int = 1024) -> CoefficientDensity:
    """Project the values of ``f`` on a uniform grid onto nonnegative densities.

    The grid values are projected (in the discrete L2 sense of the dominating
    measure) onto ``{v >= 0, integral = 1}`` and expanded back on the same
    number of basis functions with the midpoint rule.
    """
    if grid_size < 128:
        raise ValueError("grid_size must be >= 128")
    basis, M = f.basis, f.dim
    x = (np.arange(grid_size) + 0.5) / grid_size
    values = f(x)
    weights = np.full(grid_size, 1.0 / grid_size)
    dirac = basis.kind.value == "dirac_trig"
    if dirac:
        values = np.concatenate([[f.coeffs[0]], values])
        weights = np.concatenate([[1.0], weights])
    proj = _weighted_threshold(values, weights)
    if dirac:
        coeffs = np.zeros(M)
        coeffs[0] = proj[0]
        if M > 1:
            from .bases import trig_features

            coeffs[1:] = trig_features(x, M - 1).T @ (weights[1:] * proj[1:])
    else:
        coeffs = basis.features(x, M).T @ (weights * proj)
    return CoefficientDensity(basis, coeffs)


def _weighted_threshold(v: np.ndarray, w: np.ndarray) -> np.ndarray:
    """argmin sum w (x - v)^2 subject to x >= 0, sum w x = 1.

    The solution is ``max(v - lam, 0)``; ``lam`` is found exactly by sorting.
    """
    order = np.argsort(v)[::-1]
    vs, ws = v[order], w[order]
    cw = np.cumsum(ws)
    cwv = np.cumsum(ws * vs)
    lam = (cwv - 1.0) / cw
    ok = vs - lam > 0
    j = np.nonzero(ok)[0][-1]
    return np.maximum(v - lam[j], 0.0)


def default_retries(n: int, M: int) -> int:
    """Number of random rotations ``ceil(2 log n + 2 log M)``."""
    return int(math.ceil(2.0 * math.log(n) + 2.0 * math.log(M)))


def model_seed(seed: int, M: int) -> int:
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(M)]).generate_state(1)[0])


def spectral_family(observations, basis: Basis, K: int, model_grid, m: int = 20,
                    seed: int = 0, retries=None, clip_alpha: float | None = None,
                    workers: int = 1, tensors: MomentTensors | None = None):
    """Spectral estimates for every model of ``model_grid`` from one data pass.

    ``retries`` is an int or a callable ``(n, M) -> r``; by default
    ``ceil(2 log n + 2 log M)``.  Models whose estimation fails are left out of
    the family and listed in ``family.failures``.
    """
    from .selection import EstimatorFamily, ModelEstimate

    grid = sorted(int(M) for M in model_grid)
    Mmax = grid[-1]
    if tensors is None:
        tensors = accumulate_moments(observations, basis, min(m, Mmax), Mmax)
    n = tensors.n
    retries = default_retries if retries is None else retries
    r_of = retries if callable(retries) else (lambda n_, M_: int(retries))

    def fit(M):
        mm = min(m, M, tensors.m)
        sub = tensors.truncate(mm, M)
        try:
            est = spectral_estimate(sub, K, r_of(n, M), model_seed(seed, M), basis, clip_alpha)
        except SpectralError as exc:
            return M, None, str(exc)
        p = est.params
        diag = {"separation_score": est.separation_score, "attempt_index": est.attempt_index,
                "m": mm, "r": r_of(n, M)}
        return M, ModelEstimate(p.O, p.pi, p.Q, "spectral", diag), None

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            fitted = list(ex.map(fit, grid))
    else:
        fitted = [fit(M) for M in grid]
    models, failures = {}, {}
    for M, est, err in fitted:
        if est is None:
            log.warning("spectral estimation failed for M=%d: %s", M, err)
            failures[M] = err
        else:
            models[M] = est
    if not models:
        raise SpectralError("spectral estimation failed for every model")
    return EstimatorFamily(basis=basis, K=K, n=n, method="spectral", models=models,
                           failures=failures)
