"""Blocked K-fold cross-validation selecting one common model for all states.

The sequence is cut into ``folds`` contiguous blocks.  For each block, the
spectral estimator is fitted on the remaining observations with ``gap``
observations removed on both sides of the block, then scored on the block
with the least-squares contrast.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .bases import Basis
from .moments import InsufficientDataError, MomentTensors, _triple_sums
from .spectral import SpectralError, default_retries, model_seed, spectral_estimate

log = logging.getLogger(__name__)


@dataclass
class CvPlan:
    n: int
    folds: int
    gap: int
    segments: list
    training_sets: list

    def training_size(self, j: int) -> int:
        return sum(b - a for a, b in self.training_sets[j])


def cv_split(n: int, folds: int = 10, gap: int = 30) -> CvPlan:
    """Contiguous near-equal blocks of ``range(n)`` and their pruned complements.

    Training runs are half-open index ranges ``[start, stop)``.
    """
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if gap < 0:
        raise ValueError("gap must be nonnegative")
    if n < folds * (2 * gap + 3):
        raise InsufficientDataError(
            f"n={n} too small for {folds} folds with gap {gap} (need {folds * (2 * gap + 3)})"
        )
    base, extra = divmod(n, folds)
    sizes = [base + (1 if j < extra else 0) for j in range(folds)]
    edges = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    segments = [(int(edges[j]), int(edges[j + 1])) for j in range(folds)]
    training = []
    for start, stop in segments:
        runs = []
        if start - gap > 0:
            runs.append((0, start - gap))
        if stop + gap < n:
            runs.append((stop + gap, n))
        training.append(runs)
    return CvPlan(n, folds, gap, segments, training)


class _RunSums:
    """Triple sums over atoms between cut points, reused for every training set.

    A run ``[a, b)`` holds the triples starting in ``[a, b - 2)``; its sums are
    the atom sums minus the (at most two) triples that start near ``b`` and
    leave the run.
    """

    def __init__(self, y, basis, m, M, cuts):
        self.y, self.basis, self.m, self.M = y, basis, m, M
        n_obs = y.size
        cuts = sorted({0, n_obs, *[c for c in cuts if 0 < c < n_obs]})
        self.cuts = cuts
        self.atoms = {}
        for a, b in zip(cuts[:-1], cuts[1:]):
            stop = min(b + 2, n_obs)
            self.atoms[(a, b)] = _triple_sums(y[a:stop], basis, m, M) if stop - a >= 3 else None

    def _sum_range(self, a, b):
        total = None
        for (lo, hi), s in self.atoms.items():
            if lo >= a and hi <= b and s is not None:
                total = s if total is None else tuple(x + y for x, y in zip(total, s))
        return total

    def run(self, a, b):
        total = self._sum_range(a, b)
        if total is None:
            return None, 0
        n_obs = self.y.size
        # atom sums include triples starting at b-2 and b-1 that use y[b], y[b+1]
        for s in (b - 2, b - 1):
            if a <= s and s + 2 < n_obs:
                one = _triple_sums(self.y[s : s + 3], self.basis, self.m, self.M)
                total = tuple(x - y for x, y in zip(total, one))
        return total, max(b - a - 2, 0)


def training_moments(y, plan: CvPlan, basis: Basis, m: int, M: int) -> list[MomentTensors]:
    """Moment tensors of every fold's training set, from one pass over the data."""
    cuts = [c for runs in plan.training_sets for run in runs for c in run]
    sums = _RunSums(y, basis, m, M, cuts)
    out = []
    for runs in plan.training_sets:
        acc, count = None, 0
        for a, b in runs:
            s, c = sums.run(a, b)
            if s is None or c == 0:
                continue
            acc = s if acc is None else tuple(x + z for x, z in zip(acc, s))
            count += c
        if acc is None:
            raise InsufficientDataError("a training set holds no complete triple")
        L, N, P, T = (x / count for x in acc)
        out.append(MomentTensors(m, M, count, L, N, P, T))
    return out


def heldout_contrast(pi, Q, O, features: np.ndarray) -> float:
    """Least-squares contrast ``||C||^2 - 2/n sum_s g(Y_s, Y_s+1, Y_s+2)`` on held-out data.

    ``features`` are the basis functions evaluated on the held-out block.
    This equals ``||C - T_block||_F^2`` minus ``||T_block||_F^2`` computed over
    the whole basis, which does not depend on the candidate.
    """
    F = features[:, : O.shape[0]] @ O
    return _contrast_from_values(pi, Q, O, F)


def _contrast_from_values(pi, Q, O, F):
    W = pi[:, None, None] * Q[:, :, None] * Q[None, :, :]
    G = O.T @ O
    cc = np.einsum("ijl,pqr,ip,jq,lr->", W, W, G, G, G, optimize=True)
    A, B, C = F[:-2], F[1:-1], F[2:]
    g = np.einsum("si,ijl,sj,sl->s", A, W, B, C, optimize=True)
    return float(cc - 2.0 * g.mean())


@dataclass
class CvResult:
    M_hat: int
    E_curve: dict
    risks: np.ndarray
    plan: CvPlan
    estimates: dict


def cv_select(observations, basis: Basis, model_grid, K: int, folds: int = 10, gap: int = 30,
              m: int = 20, seed: int = 0, retries=None, keep_estimates: bool = False) -> CvResult:
    """Select a single model by blocked cross-validation of the least-squares risk.

    A fold/model cell whose spectral fit fails scores ``+inf``.
    """
    y = np.asarray(observations, dtype=float).ravel()
    grid = sorted(int(M) for M in model_grid)
    Mmax = grid[-1]
    mm = min(m, Mmax)
    plan = cv_split(y.size, folds, gap)
    retries = default_retries if retries is None else retries
    r_of = retries if callable(retries) else (lambda n_, M_: int(retries))
    train = training_moments(y, plan, basis, mm, Mmax)
    risks = np.full((plan.folds, len(grid)), math.inf)
    estimates = {}
    for j, ((a, b), tensors) in enumerate(zip(plan.segments, train)):
        feats = basis.features(y[a:b], Mmax)
        fitted = []
        for i, M in enumerate(grid):
            sub = tensors.truncate(min(mm, M), M)
            try:
                est = spectral_estimate(sub, K, r_of(tensors.n, M), model_seed(seed, M), basis)
            except SpectralError as exc:
                log.info("fold %d, M=%d: %s", j, M, exc)
                continue
            fitted.append((i, est.params))
            if keep_estimates:
                estimates[(j, M)] = est.params
        if not fitted:
            continue
        # one GEMM evaluates every model's emission densities on the block
        stack = np.zeros((Mmax, K * len(fitted)))
        for t, (_, p) in enumerate(fitted):
            stack[: p.M, t * K : (t + 1) * K] = p.O
        values = feats @ stack
        for t, (i, p) in enumerate(fitted):
            risks[j, i] = _contrast_from_values(p.pi, p.Q, p.O, values[:, t * K : (t + 1) * K])
    E = risks.mean(axis=0)
    if not np.any(np.isfinite(E)):
        raise SpectralError("cross-validation risk is infinite for every model")
    i_hat = int(np.argmin(E))
    return CvResult(grid[i_hat], dict(zip(grid, E.tolist())), risks, plan, estimates)
