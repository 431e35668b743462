"""Least-squares estimation of HMM parameters from the triple-observation tensor.

The contrast of a candidate ``(pi, Q, O)`` is::

    ||C(pi, Q, O) - T||_F^2 - ||T||_F^2 = ||C||_F^2 - 2 <C, T>

with ``C(., b, .) = O diag(pi) Q diag(O[b, :]) Q O^T``.  Both terms are
evaluated in the ``K x K x K`` latent space: ``||C||^2`` through the Gram
matrix ``O^T O`` and ``<C, T>`` through ``T`` contracted with ``O`` on each mode.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .bases import Basis
from .moments import MomentTensors, accumulate_moments
from .params import HmmParams
from .spectral import SpectralError, simplex_project, spectral_estimate, transition_project

log = logging.getLogger(__name__)


class OptimizationStalled(RuntimeError):
    def __init__(self, message: str, best: HmmParams, value: float):
        super().__init__(message)
        self.best = best
        self.value = value


@dataclass
class LsProblem:
    T_full: np.ndarray
    K: int
    basis: Basis
    coeff_norm_bound: float = 10.0

    def __post_init__(self):
        self.T_full = np.asarray(self.T_full, dtype=float)
        if not np.all(np.isfinite(self.T_full)):
            raise ValueError("tensor contains non-finite entries")
        if self.coeff_norm_bound < 1:
            raise ValueError("coeff_norm_bound must be >= 1")

    @property
    def M(self) -> int:
        return self.T_full.shape[0]


def build_ls_tensor(observations, basis: Basis, M: int) -> np.ndarray:
    return accumulate_moments(observations, basis, M, M).T


def candidate_tensor(pi, Q, O) -> np.ndarray:
    pi, Q, O = (np.asarray(x, dtype=float) for x in (pi, Q, O))
    return np.einsum("ai,ij,bj,jl,cl->abc", O, pi[:, None] * Q, O, Q, O, optimize=True)


def _latent_weights(pi, Q):
    """``W(i, j, l) = pi_i Q_ij Q_jl``."""
    return pi[:, None, None] * Q[:, :, None] * Q[None, :, :]


def _mode(X, A, axis):
    """Contract ``X`` along ``axis`` with the rows of ``A`` (``X x_axis A^T``)."""
    return np.moveaxis(np.tensordot(X, A, axes=([axis], [0])), -1, axis)


def _project_T(T, O):
    return _mode(_mode(_mode(T, O, 0), O, 1), O, 2)


def _gram_transform(W, G):
    return _mode(_mode(_mode(W, G, 0), G, 1), G, 2)


def ls_criterion(pi, Q, O, T_emp) -> float:
    """``||C(pi, Q, O) - T||_F^2 - ||T||_F^2``."""
    pi, Q, O = (np.asarray(x, dtype=float) for x in (pi, Q, O))
    W = _latent_weights(pi, Q)
    S = _gram_transform(W, O.T @ O)
    return float(np.sum(W * S) - 2.0 * np.sum(W * _project_T(T_emp, O)))


def _grad_W(W, O, T):
    """Gradient of the criterion with respect to the latent weights ``W``."""
    return 2.0 * (_gram_transform(W, O.T @ O) - _project_T(T, O))


def _grad_pi_Q(gW, pi, Q):
    g_pi = np.einsum("ijl,ij,jl->i", gW, Q, Q)
    g_Q = np.einsum("ijl,i,jl->ij", gW, pi, Q) + np.einsum("ijl,i,ij->jl", gW, pi, Q)
    return g_pi, g_Q


def _grad_O(W, O, T):
    G = O.T @ O
    Hs = np.zeros_like(G)
    g_T = np.zeros_like(O)
    for axis in range(3):
        others = [a for a in range(3) if a != axis]
        # ||C||^2 term: H(i, p) = sum over the other modes of W(..i..) (W x G x G)(..p..)
        U = _mode(_mode(W, G, others[0]), G, others[1])
        Wm = np.moveaxis(W, axis, 0).reshape(W.shape[0], -1)
        Um = np.moveaxis(U, axis, 0).reshape(W.shape[0], -1)
        Hs += Wm @ Um.T
        # <C, T> term
        A = _mode(_mode(T, O, others[0]), O, others[1])
        Am = np.moveaxis(A, axis, 0).reshape(T.shape[axis], -1)
        g_T += Am @ Wm.T
    return O @ (Hs + Hs.T) - 2.0 * g_T


def _value_and_grads(pi, Q, O, T):
    W = _latent_weights(pi, Q)
    value = ls_criterion(pi, Q, O, T)
    g_pi, g_Q = _grad_pi_Q(_grad_W(W, O, T), pi, Q)
    return value, g_pi, g_Q, _grad_O(W, O, T)


def project_emissions(O: np.ndarray, c: np.ndarray, bound: float) -> np.ndarray:
    """Project each column onto ``{x : <x, c> = 1, ||x|| <= bound}``.

    ``c`` holds the coefficients of the constant function, so ``<x, c> = 1``
    means the expansion integrates to one.  The set is a ball inside a
    hyperplane; project on the hyperplane, then radially toward its centre.
    """
    cc = float(c @ c)
    X = O + np.outer(c, (1.0 - c @ O) / cc)
    centre = c / cc
    radius = np.sqrt(max(bound ** 2 - 1.0 / cc, 0.0))
    off = X - centre[:, None]
    norms = np.linalg.norm(off, axis=0)
    shrink = np.where(norms > radius, radius / np.maximum(norms, 1e-300), 1.0)
    return centre[:, None] + off * shrink


def tensors_from_full(T_full: np.ndarray, basis: Basis, n: int = 1) -> MomentTensors:
    """Recover ``L, N, P`` from the full triple tensor by contracting with the constant."""
    M = T_full.shape[0]
    c = basis.constant_coeffs(M)
    N = T_full @ c
    P = np.einsum("abc,b->ac", T_full, c)
    L = N @ c
    return MomentTensors(M, M, n, L, N, P, T_full.copy())


def _project_all(pi, Q, O, c, bound):
    return simplex_project(pi), transition_project(Q), project_emissions(O, c, bound)


def _descend(problem: LsProblem, pi, Q, O, max_iters: int, tol: float):
    """Projected block-coordinate gradient descent with backtracking.

    Returns ``(pi, Q, O, value, converged, history)``; the value never increases.
    """
    c = problem.basis.constant_coeffs(problem.M)
    bound = problem.coeff_norm_bound
    T = problem.T_full
    pi, Q, O = _project_all(pi, Q, O, c, bound)
    value = ls_criterion(pi, Q, O, T)
    steps = {"pi": 1.0, "Q": 1.0, "O": 1.0}
    history = [value]
    for _ in range(max_iters):
        start = value
        for block in ("pi", "Q", "O"):
            W = _latent_weights(pi, Q)
            if block == "O":
                x, g = O, _grad_O(W, O, T)
            else:
                g_pi, g_Q = _grad_pi_Q(_grad_W(W, O, T), pi, Q)
                x, g = (pi, g_pi) if block == "pi" else (Q, g_Q)
            t = steps[block] * 2.0
            for _ in range(60):
                if block == "pi":
                    cand = simplex_project(x - t * g)
                    trial = (cand, Q, O)
                elif block == "Q":
                    cand = transition_project(x - t * g)
                    trial = (pi, cand, O)
                else:
                    cand = project_emissions(x - t * g, c, bound)
                    trial = (pi, Q, cand)
                new_value = ls_criterion(*trial, T)
                d = cand - x
                if new_value <= value + np.sum(g * d) + np.sum(d * d) / (2.0 * t):
                    break
                t *= 0.5
            else:
                continue
            if new_value <= value:
                pi, Q, O = trial
                value = new_value
            steps[block] = t
        history.append(value)
        if start - value <= tol * max(1.0, abs(start)):
            return pi, Q, O, value, True, history
    return pi, Q, O, value, False, history


def ls_estimate(problem: LsProblem, init: HmmParams | None = None, max_iters: int = 5000,
                tol: float = 1e-9, restarts: int = 3, seed: int = 0,
                spectral_retries: int = 20) -> HmmParams:
    """Local minimiser of the least-squares contrast under the model constraints.

    Without ``init`` a spectral estimate computed from the same tensor is used
    as warm start.  If descent does not converge within ``max_iters``, up to
    ``restarts`` perturbed warm starts are tried; when none converges,
    :class:`OptimizationStalled` carries the best iterate found.
    """
    if init is None:
        tensors = tensors_from_full(problem.T_full, problem.basis)
        init = spectral_estimate(tensors, problem.K, spectral_retries, seed, problem.basis).params
    if init.K != problem.K or init.M != problem.M:
        raise ValueError("initial parameters do not match the problem dimensions")
    rng = np.random.default_rng(seed)
    start = (init.pi.copy(), init.Q.copy(), init.O.copy())
    init_value = ls_criterion(*_project_all(*start, problem.basis.constant_coeffs(problem.M),
                                            problem.coeff_norm_bound), problem.T_full)
    best = None
    for attempt in range(restarts + 1):
        if attempt == 0:
            pi0, Q0, O0 = start
        else:
            scale = 0.05 * attempt
            pi0 = start[0] + scale * rng.standard_normal(problem.K) / problem.K
            Q0 = start[1] + scale * rng.standard_normal(start[1].shape) / problem.K
            O0 = start[2] + scale * rng.standard_normal(start[2].shape) / np.sqrt(problem.M)
        pi, Q, O, value, converged, _ = _descend(problem, pi0, Q0, O0, max_iters, tol)
        if best is None or value < best[3]:
            best = (pi, Q, O, value)
        if converged and best[3] <= init_value:
            return HmmParams(best[0], best[1], best[2], problem.basis)
        log.info("least-squares attempt %d did not converge (value %.6g)", attempt, value)
    raise OptimizationStalled(
        f"no convergence after {restarts + 1} attempts of {max_iters} iterations",
        HmmParams(best[0], best[1], best[2], problem.basis), best[3],
    )


def ls_family(observations, basis: Basis, K: int, model_grid, seed: int = 0,
              coeff_norm_bound: float = 10.0, max_iters: int = 5000, tol: float = 1e-9):
    """Least-squares estimates over a model grid (one ``M^3`` tensor per model)."""
    from .selection import EstimatorFamily, ModelEstimate

    grid = sorted(int(M) for M in model_grid)
    full = accumulate_moments(observations, basis, grid[-1], grid[-1])
    models, failures = {}, {}
    for M in grid:
        problem = LsProblem(full.T[:M, :M, :M], K, basis, coeff_norm_bound)
        try:
            est = ls_estimate(problem, max_iters=max_iters, tol=tol, seed=seed)
            diag = {"converged": True}
        except OptimizationStalled as exc:
            est, diag = exc.best, {"converged": False}
        except SpectralError as exc:
            failures[M] = str(exc)
            continue
        diag["criterion"] = ls_criterion(est.pi, est.Q, est.O, problem.T_full)
        models[M] = ModelEstimate(est.O, est.pi, est.Q, "ls", diag)
    return EstimatorFamily(basis=basis, K=K, n=full.n, method="ls", models=models,
                           failures=failures)
