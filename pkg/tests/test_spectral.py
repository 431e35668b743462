import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_hmm
from sbshmm.bases import CoefficientDensity, make_basis, project_true_density
from sbshmm.moments import MomentTensors, accumulate_moments, population_moments
from sbshmm.params import HmmParams
from sbshmm.simulation import GroundTruth, d_perm, benchmark_truth, sample_hmm
from sbshmm.spectral import (DiagonalizationFailure, IllConditionedMoments, default_retries,
                             elbow_order, haar_orthogonal, project_density_to_simplex,
                             simplex_project, singular_spectrum, spectral_estimate,
                             spectral_family, transition_project)

vectors = arrays(np.float64, st.integers(1, 6), elements=st.floats(-5, 5))


def brute_simplex(v, steps=400):
    """Closest point of a dense simplex grid (K <= 3)."""
    K = len(v)
    if K == 1:
        return np.array([1.0])
    grid = np.linspace(0, 1, steps + 1)
    if K == 2:
        cand = np.column_stack([grid, 1 - grid])
    else:
        a, b = np.meshgrid(grid, grid)
        keep = a + b <= 1 + 1e-12
        cand = np.column_stack([a[keep], b[keep], 1 - a[keep] - b[keep]])
    d = ((cand - v) ** 2).sum(1)
    return cand[np.argmin(d)]


@pytest.mark.parametrize("v,want", [((0.5, 0.8), (0.35, 0.65)), ((2, -1), (1, 0)),
                                    ((0.2, 0.3, 0.5), (0.2, 0.3, 0.5))])
def test_simplex_examples(v, want):
    np.testing.assert_allclose(simplex_project(v), want, atol=1e-14)


@given(vectors)
def test_simplex_kkt(v):
    x = simplex_project(v)
    assert np.all(x >= 0) and math.isclose(x.sum(), 1.0, abs_tol=1e-12)
    # KKT: v - x = theta on the support, and v - x <= theta off the support
    gap = v - x
    support = x > 0
    theta = gap[support].mean()
    np.testing.assert_allclose(gap[support], theta, atol=1e-9)
    assert np.all(gap[~support] <= theta + 1e-9)


@given(arrays(np.float64, st.integers(1, 3), elements=st.floats(-2, 2)))
@settings(max_examples=40, deadline=None)
def test_simplex_vs_brute_force(v):
    x = simplex_project(v)
    ref = brute_simplex(v)
    # the projection is at least as close as every grid point
    assert np.sum((x - v) ** 2) <= np.sum((ref - v) ** 2) + 1e-12


@given(vectors)
def test_simplex_idempotent(v):
    x = simplex_project(v)
    np.testing.assert_allclose(simplex_project(x), x, atol=1e-14)


def test_transition_projection():
    np.testing.assert_array_equal(transition_project(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(transition_project([[2, -1], [0.5, 0.8]]), [[1, 0], [0.35, 0.65]])


@given(arrays(np.float64, (4, 4), elements=st.floats(-3, 3)))
def test_transition_rows_sum_to_one(A):
    np.testing.assert_allclose(transition_project(A).sum(1), 1.0, atol=1e-12)


def test_haar_is_orthogonal(rng):
    H = haar_orthogonal(4, rng)
    np.testing.assert_allclose(H @ H.T, np.eye(4), atol=1e-13)


@pytest.mark.parametrize("K", [2, 3, 4])
def test_exact_recovery_random(rng, K):
    for _ in range(5):
        p = random_hmm(rng, K)
        est = spectral_estimate(population_moments(p, 8, 8), K, 20, seed=1, basis=p.basis)
        assert d_perm(est.params, p) <= 1e-6


def test_exact_recovery_benchmark_like():
    Q = benchmark_truth().Q
    O = np.array([[1, 1, 1], [0, 0.4, -0.3], [0, 0.2, 0.5], [0, -0.3, 0.1],
                  [0, 0.1, 0.2], [0, 0.0, -0.2], [0, 0.15, 0.0], [0, 0.0, 0.1]], dtype=float)
    O[:, 0] = [1, 0.3, -0.3, 0, 0, 0.2, 0, 0]
    truth = GroundTruth(Q, ("uniform",) * 3)
    p = HmmParams(truth.pi, Q, O, make_basis("trig", 8))
    est = spectral_estimate(population_moments(p, 8, 8), 3, 10, seed=0, basis=p.basis)
    assert d_perm(est.params, p) <= 1e-8


def test_recovery_dirac_basis(rng):
    p = random_hmm(rng, 2, M=6, basis_kind="dirac_trig")
    est = spectral_estimate(population_moments(p, 6, 6), 2, 20, seed=0, basis=p.basis)
    assert d_perm(est.params, p) <= 1e-6


def test_one_state():
    O = np.array([[1.0], [0.3], [-0.2]])
    p = HmmParams([1.0], [[1.0]], O, make_basis("trig", 3))
    t = population_moments(p, 3, 3)
    est = spectral_estimate(t, 1, 3)
    np.testing.assert_allclose(est.params.O, O, atol=1e-12)
    assert est.params.pi.tolist() == [1.0] and est.params.Q.tolist() == [[1.0]]
    # the column is the top right singular direction of N, rescaled
    v = np.linalg.svd(t.N)[2][0]
    assert abs(abs(v @ O[:, 0]) - np.linalg.norm(O)) < 1e-12


def test_deterministic_and_parallel_agree(rng):
    p = random_hmm(rng, 3)
    y = sample_hmm(GroundTruth(p.Q, ("uniform", "beta", "symbeta")), 20000, seed=2)
    t = accumulate_moments(y, make_basis("trig", 20), 8, 20)
    a = spectral_estimate(t, 3, 12, seed=5)
    b = spectral_estimate(t, 3, 12, seed=5, workers=3)
    np.testing.assert_array_equal(a.params.O, b.params.O)
    assert a.attempt_index == b.attempt_index
    assert np.all(a.separation_score >= a.scores)


def test_outputs_in_simplex(rng):
    y = rng.random(3000)
    est = spectral_estimate(accumulate_moments(y, make_basis("trig", 10), 5, 10), 2, 5)
    assert est.params.is_valid()


def test_ill_conditioned():
    t = MomentTensors(3, 3, 10, np.zeros(3), np.eye(3), np.zeros((3, 3)), np.zeros((3, 3, 3)))
    with pytest.raises(IllConditionedMoments):
        spectral_estimate(t, 2, 3)


def test_rotation_only_tensor_cannot_be_diagonalised():
    # B(b) are rotations: complex eigenvalues for every combination
    N = np.eye(2)
    P = np.eye(2)
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    T = np.stack([rot, rot], axis=1)
    t = MomentTensors(2, 2, 10, np.array([1.0, 0.0]), N, P, T)
    with pytest.raises(DiagonalizationFailure):
        spectral_estimate(t, 2, 5)


def test_bad_arguments():
    t = MomentTensors.empty(2, 3)
    with pytest.raises(ValueError):
        spectral_estimate(t, 3, 5)
    with pytest.raises(ValueError):
        spectral_estimate(t, 2, 0)


def test_singular_spectrum_rank(toy2):
    s = singular_spectrum(population_moments(toy2, 3, 3))
    assert np.all(s[:2] > 1e-3) and np.all(s[2:] <= 1e-10)
    assert elbow_order(s) == 2
    assert np.all(singular_spectrum(MomentTensors.empty(3, 3)) == 0)


def test_benchmark_spectrum_gap():
    y = sample_hmm(benchmark_truth(), 100_000, seed=4)
    s = singular_spectrum(accumulate_moments(y, make_basis("trig", 50), 50, 50))
    assert s[2] / s[3] > 5
    assert elbow_order(s, max_states=10) == 3


def test_benchmark_errors_at_moderate_n():
    truth = benchmark_truth()
    y = sample_hmm(truth, 200_000, seed=8)
    b = make_basis("trig", 50)
    n = y.size - 2
    est = spectral_estimate(accumulate_moments(y, b, 20, 50), 3, default_retries(n, 50), seed=8)
    proj = truth.projection(b, 50)
    perm = min(itertools.permutations(range(3)),
               key=lambda t: np.sum((est.params.O[:, list(t)] - proj) ** 2))
    errs = np.linalg.norm(est.params.O[:, list(perm)] - proj, axis=0)
    assert np.all(errs < 0.2), errs


def test_simplex_density_fixed_point():
    b = make_basis("trig", 15)
    f = project_true_density(b, 15, lambda y: 1 + 0.5 * np.cos(2 * np.pi * np.asarray(y)))
    g = project_density_to_simplex(f)
    np.testing.assert_allclose(g.coeffs, f.coeffs, atol=1e-3)


def test_simplex_density_removes_dip():
    b = make_basis("trig", 9)
    c = np.zeros(9)
    c[0], c[1] = 1.0, 0.9  # 1 + 1.27 cos: negative near y = 1/2
    g = project_density_to_simplex(CoefficientDensity(b, c), 4096)
    x = (np.arange(4096) + 0.5) / 4096
    assert abs(g.coeffs[0] - 1.0) < 1e-6
    # projected grid values integrate to one; the re-expansion keeps that mass
    assert g(x).mean() == pytest.approx(1.0, abs=1e-6)


def test_simplex_density_grid_refinement():
    b = make_basis("trig", 7)
    f = CoefficientDensity(b, [1.0, 0.2, -0.1, 0.3, 0, 0.1, 0])
    a, c = project_density_to_simplex(f, 1024), project_density_to_simplex(f, 2048)
    assert np.max(np.abs(a.coeffs - c.coeffs)) <= 1e-3


def test_simplex_density_dirac():
    b = make_basis("dirac_trig", 5)
    f = CoefficientDensity(b, [0.3, 0.7, 0.2, 0.0, 0.1])
    g = project_density_to_simplex(f)
    np.testing.assert_allclose(g.coeffs, f.coeffs, atol=1e-3)
    with pytest.raises(ValueError):
        project_density_to_simplex(f, 64)


def test_family_grid_and_failures(rng):
    y = sample_hmm(benchmark_truth(), 20000, seed=1)
    fam = spectral_family(y, make_basis("trig", 30), 3, range(3, 31), seed=1)
    assert sorted(fam.model_grid + list(fam.failures)) == list(range(3, 31))
    assert all(fam.models[M].O.shape == (M, 3) for M in fam.model_grid)
    again = spectral_family(y, make_basis("trig", 30), 3, range(3, 31), seed=1, workers=2)
    for M in fam.model_grid:
        np.testing.assert_array_equal(fam.models[M].O, again.models[M].O)


def test_clipping_bounds_coefficients(rng):
    y = rng.random(500)
    t = accumulate_moments(y, make_basis("trig", 10), 5, 10)
    est = spectral_estimate(t, 2, 5, clip_alpha=0.0)
    assert np.max(np.abs(est.params.O)) <= 1.0
