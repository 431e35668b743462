import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbshmm.bases import Basis
from sbshmm.diagnostics import (h_function, hdet_diagnostic, jacobian_hessian, perturbed_tensor,
                                unpack)
from sbshmm.leastsq import candidate_tensor
from sbshmm.params import HmmParams
from sbshmm.simulation import benchmark_truth, stationary_distribution

from conftest import random_hmm


def test_unpack_keeps_constraints(rng):
    K = 3
    theta = rng.normal(size=(K - 1) * (2 * K + 1))
    p, q, A = unpack(theta, K)
    assert p.sum() == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(q.sum(axis=1), 0.0, atol=1e-14)
    np.testing.assert_allclose(A.sum(axis=1), 0.0, atol=1e-14)


def test_perturbation_preserves_normalisation(rng):
    params = random_hmm(rng, 3, M=6)
    theta = 0.01 * rng.normal(size=14)
    p, q, A = unpack(theta, 3)
    O = params.O @ (np.eye(3) + A).T
    np.testing.assert_allclose(O[0], params.O[0] @ (np.eye(3) + A).T)
    # the constant coefficient stays 1 because every row of I + A sums to 1
    np.testing.assert_allclose(O[0], 1.0, atol=1e-14)
    np.testing.assert_allclose(perturbed_tensor(params, np.zeros(14)),
                               candidate_tensor(params.pi, params.Q, params.O))


def test_h_vanishes_to_second_order_at_zero(toy2):
    h = h_function(toy2)
    dim = 5
    assert h(np.zeros(dim)) == 0.0
    rng = np.random.default_rng(0)
    d = rng.normal(size=dim)
    # no first-order term: h(t d) / t^2 is constant as t -> 0
    r = [h(t * d) / t ** 2 for t in (1e-2, 1e-3, 1e-4)]
    assert r[1] == pytest.approx(r[2], rel=1e-3)
    g = [(h(1e-5 * e) - h(-1e-5 * e)) / 2e-5 for e in np.eye(dim)]
    np.testing.assert_allclose(g, 0.0, atol=1e-8)


def test_generic_parameters_are_nondegenerate(rng):
    for K in (2, 3):
        rep = hdet_diagnostic(random_hmm(rng, K, M=6))
        assert rep.dim == (K - 1) * (2 * K + 1)
        assert rep.min_eigenvalue > 0 and rep.determinant > 0


def test_truth_is_nondegenerate():
    rep = hdet_diagnostic(benchmark_truth().params(Basis("trig", 30), 30))
    assert rep.dim == 14 and rep.min_eigenvalue > 0


def test_identical_emissions_are_degenerate():
    Q = np.array([[0.6, 0.4], [0.3, 0.7]])
    O = np.array([[1.0, 1.0], [0.4, 0.4], [-0.2, -0.2]])
    params = HmmParams(stationary_distribution(Q), Q, O, Basis("trig", 3))
    rep = hdet_diagnostic(params)
    scale = np.abs(rep.hessian).max()
    assert abs(rep.determinant) < 1e-6 * scale ** rep.dim
    assert rep.min_eigenvalue < 1e-6 * scale


def test_step_halving_is_stable(rng):
    params = random_hmm(rng, 2, M=5)
    a = hdet_diagnostic(params, 1e-4).determinant
    b = hdet_diagnostic(params, 5e-5).determinant
    assert abs(a - b) < 0.01 * abs(a)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_jacobian_route_agrees(seed):
    params = random_hmm(np.random.default_rng(seed), 2, M=5)
    H1 = hdet_diagnostic(params).hessian
    H2 = jacobian_hessian(params)
    np.testing.assert_allclose(H1, H2, atol=1e-4 * max(1.0, np.abs(H2).max()))


def test_step_bounds():
    params = benchmark_truth().params(Basis("trig", 5), 5)
    with pytest.raises(ValueError):
        hdet_diagnostic(params, 1e-8)
    with pytest.raises(ValueError):
        hdet_diagnostic(params, 0.1)


def test_report_dict(toy2):
    d = hdet_diagnostic(toy2).to_dict()
    assert set(d) == {"det", "min_eig", "dim"} and d["dim"] == 5
