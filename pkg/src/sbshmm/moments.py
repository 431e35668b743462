"""Empirical and population moment tensors of three consecutive observations.

For observations ``Y_1..Y_{n+2}`` and the first ``m`` / ``M`` basis functions::

    L(a)      = 1/n sum_s phi_a(Y_s)
    N(a,b)    = 1/n sum_s phi_a(Y_s) phi_b(Y_{s+1})
    P(a,c)    = 1/n sum_s phi_a(Y_s) phi_c(Y_{s+2})
    T(a,b,c)  = 1/n sum_s phi_a(Y_s) phi_b(Y_{s+1}) phi_c(Y_{s+2})

with ``a, c < m`` and ``b < M``.  Tensors for a smaller ``(m', M')`` are plain
truncations, so a whole model sweep is served by one pass at the largest size.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bases import Basis
from .params import HmmParams

DEFAULT_CHUNK = 32768


class InsufficientDataError(ValueError):
    pass


@dataclass
class MomentTensors:
    m: int
    M: int
    n: int
    L: np.ndarray
    N: np.ndarray
    P: np.ndarray
    T: np.ndarray

    @classmethod
    def empty(cls, m: int, M: int) -> "MomentTensors":
        return cls(m, M, 0, np.zeros(m), np.zeros((m, M)), np.zeros((m, m)), np.zeros((m, M, m)))

    def truncate(self, m: int, M: int) -> "MomentTensors":
        if m > self.m or M > self.M or m > M:
            raise ValueError(f"cannot truncate ({self.m}, {self.M}) to ({m}, {M})")
        return MomentTensors(
            m, M, self.n,
            self.L[:m].copy(), self.N[:m, :M].copy(), self.P[:m, :m].copy(),
            self.T[:m, :M, :m].copy(),
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(x)) for x in (self.L, self.N, self.P, self.T))


def _triple_sums(y: np.ndarray, basis: Basis, m: int, M: int, chunk: int = DEFAULT_CHUNK):
    """Unnormalised sums over every triple ``(y[s], y[s+1], y[s+2])``.

    Chunks overlap by two observations, so no triple is lost at a chunk edge.
    """
    n = y.size - 2
    L = np.zeros(m)
    N = np.zeros((m, M))
    P = np.zeros((m, m))
    T = np.zeros((m * m, M))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        F = basis.features(y[start : stop + 2], M)
        A, B, C = F[:-2, :m], F[1:-1], F[2:, :m]
        L += A.sum(axis=0)
        N += A.T @ B
        P += A.T @ C
        Z = (A[:, :, None] * C[:, None, :]).reshape(-1, m * m)
        T += Z.T @ B
    return L, N, P, T.reshape(m, m, M).transpose(0, 2, 1)


def accumulate_moments(observations, basis: Basis, m: int, M: int,
                       chunk: int = DEFAULT_CHUNK) -> MomentTensors:
    """Empirical ``L, N, P, T`` from a sequence of ``n + 2`` observations."""
    y = np.asarray(observations, dtype=float).ravel()
    if y.size < 3:
        raise InsufficientDataError("need at least 3 observations (one triple)")
    if not 1 <= m <= M <= basis.max_dim:
        raise ValueError(f"need 1 <= m <= M <= {basis.max_dim}, got m={m}, M={M}")
    n = y.size - 2
    L, N, P, T = _triple_sums(y, basis, m, M, chunk)
    return MomentTensors(m, M, n, L / n, N / n, P / n, T / n)


def merge_moments(t1: MomentTensors, t2: MomentTensors) -> MomentTensors:
    """Pool two tensor sets as if their triples had been accumulated together."""
    if (t1.m, t1.M) != (t2.m, t2.M):
        raise ValueError(f"shape mismatch: ({t1.m}, {t1.M}) vs ({t2.m}, {t2.M})")
    n = t1.n + t2.n
    if n == 0:
        return MomentTensors.empty(t1.m, t1.M)
    w1, w2 = t1.n / n, t2.n / n
    return MomentTensors(
        t1.m, t1.M, n,
        w1 * t1.L + w2 * t2.L,
        w1 * t1.N + w2 * t2.N,
        w1 * t1.P + w2 * t2.P,
        w1 * t1.T + w2 * t2.T,
    )


def accumulate_runs(observations, runs, basis: Basis, m: int, M: int) -> MomentTensors:
    """Moments over several contiguous runs ``[start, stop)``, no triple spanning a hole."""
    y = np.asarray(observations, dtype=float).ravel()
    total = MomentTensors.empty(m, M)
    for start, stop in runs:
        if stop - start >= 3:
            total = merge_moments(total, accumulate_moments(y[start:stop], basis, m, M))
    if total.n == 0:
        raise InsufficientDataError("no run contains a full triple")
    return total


def population_moments(params: HmmParams, m: int, M: int, atol: float = 1e-10) -> MomentTensors:
    """Exact expectations of ``L, N, P, T`` under a stationary HMM."""
    pi, Q, O = params.pi, params.Q, params.O
    if np.max(np.abs(pi @ Q - pi)) > atol:
        raise ValueError("pi is not stationary for Q")
    if O.shape[0] < M:
        O = np.vstack([O, np.zeros((M - O.shape[0], O.shape[1]))])
    Om, OM = O[:m], O[:M]
    DQ = pi[:, None] * Q
    L = Om @ pi
    N = Om @ DQ @ OM.T
    P = Om @ DQ @ Q @ Om.T
    T = np.einsum("ai,ij,bj,jl,cl->abc", Om, DQ, OM, Q, Om, optimize=True)
    return MomentTensors(m, M, 0, L, N, P, T)


def read_observations(path, column: str | int | None = None) -> np.ndarray:
    """Load observations from a one-per-line text file or a CSV column.

    Without ``column`` a nonnumeric first line is taken as a header and the
    first column is read.
    """
    path = Path(path)
    if column is None:
        with path.open() as fh:
            first = next((ln for ln in fh if ln.strip() and not ln.startswith("#")), "")
        try:
            float(first.split(",")[0])
            header = False
        except ValueError:
            header = bool(first)
        if header:
            column = 0
        else:
            values = np.loadtxt(path, dtype=float, ndmin=1, comments="#")
    if column is not None:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if isinstance(column, int) or str(column).isdigit():
                idx = int(column)
            else:
                idx = header.index(str(column))
            values = np.array([float(row[idx]) for row in reader if row])
    if values.size and (not np.all(np.isfinite(values)) or values.min() < 0 or values.max() > 1):
        raise ValueError(f"{path}: observations must be finite and lie in [0, 1]")
    return values
