"""Numerical check of the nondegeneracy of the squared-L2 quadratic form.

Perturbations are parametrised by ``p`` (K-1), ``q`` (K x (K-1)) and ``A``
(K x (K-1)); each is extended by a last coordinate/column making its sums
vanish, so the perturbed ``pi`` and rows of ``Q`` keep summing to one and the
perturbed emissions ``f + A_bar f`` keep integrating to one.  The Hessian at 0
of ``h(p, q, A) = ||C(pi + p_bar, Q + q_bar, O (I + A_bar)^T) - C(pi, Q, O)||_F^2``
is formed by central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .leastsq import candidate_tensor
from .params import HmmParams


@dataclass
class HdetReport:
    dim: int
    hessian: np.ndarray
    determinant: float
    min_eigenvalue: float

    def to_dict(self) -> dict:
        return {"det": self.determinant, "min_eig": self.min_eigenvalue, "dim": self.dim}


def _extend(x: np.ndarray) -> np.ndarray:
    """Append a last column equal to minus the row sums."""
    x = np.atleast_2d(x)
    return np.hstack([x, -x.sum(axis=1, keepdims=True)])


def unpack(theta: np.ndarray, K: int):
    p = theta[: K - 1]
    q = theta[K - 1 : K - 1 + K * (K - 1)].reshape(K, K - 1)
    A = theta[K - 1 + K * (K - 1) :].reshape(K, K - 1)
    return _extend(p[None])[0], _extend(q), _extend(A)


def perturbed_tensor(params: HmmParams, theta: np.ndarray) -> np.ndarray:
    K = params.K
    pb, qb, Ab = unpack(theta, K)
    O = params.O @ (np.eye(K) + Ab).T
    return candidate_tensor(params.pi + pb, params.Q + qb, O)


def h_function(params: HmmParams):
    base = candidate_tensor(params.pi, params.Q, params.O)

    def h(theta):
        d = perturbed_tensor(params, theta) - base
        return float(np.sum(d * d))

    return h


def hdet_diagnostic(params: HmmParams, step: float = 1e-4) -> HdetReport:
    if not 1e-6 <= step <= 1e-2:
        raise ValueError("step must lie in [1e-6, 1e-2]")
    K = params.K
    dim = (K - 1) * (2 * K + 1)
    h = h_function(params)
    H = np.zeros((dim, dim))
    E = np.eye(dim) * step
    h0 = h(np.zeros(dim))
    for i in range(dim):
        H[i, i] = (h(E[i]) - 2.0 * h0 + h(-E[i])) / step ** 2
        for j in range(i + 1, dim):
            v = (h(E[i] + E[j]) - h(E[i] - E[j]) - h(-E[i] + E[j]) + h(-E[i] - E[j])) / (4 * step ** 2)
            H[i, j] = H[j, i] = v
    H = 0.5 * (H + H.T)
    if dim == 0:
        return HdetReport(0, H, 1.0, float("inf"))
    eig = np.linalg.eigvalsh(H)
    return HdetReport(dim, H, float(np.linalg.det(H)), float(eig[0]))


def jacobian_hessian(params: HmmParams, step: float = 1e-6) -> np.ndarray:
    """``2 J^T J`` with ``J`` the finite-difference Jacobian of the tensor map.

    Independent route to the Hessian at 0 (the map's second-order term drops
    out there because the residual vanishes).
    """
    K = params.K
    dim = (K - 1) * (2 * K + 1)
    cols = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = step
        cols.append(((perturbed_tensor(params, e) - perturbed_tensor(params, -e)) / (2 * step)).ravel())
    J = np.column_stack(cols) if cols else np.zeros((0, 0))
    return 2.0 * J.T @ J
