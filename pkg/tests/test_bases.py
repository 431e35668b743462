import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from sbshmm.bases import (Basis, BasisKind, CoefficientDensity, eta3_bound, evaluate_basis,
                          gauss_legendre_nodes, make_basis, project_true_density)
from sbshmm.densities import Beta, TrigPolynomial, get_density
from sbshmm.bases import l2_distance

R2 = math.sqrt(2.0)


def phi_scalar(a, x):
    """Trig basis function a (1-based) written out directly."""
    if a == 1:
        return 1.0
    j = a // 2
    return R2 * (math.cos(2 * math.pi * j * x) if a % 2 == 0 else math.sin(2 * math.pi * j * x))


def test_make_basis_rejects_zero_dim():
    with pytest.raises(ValueError):
        make_basis("trig", 0)


def test_trig_three_functions():
    b = make_basis("trig", 3)
    np.testing.assert_allclose(evaluate_basis(b, 3, 0.25), [1.0, 0.0, R2], atol=1e-15)
    np.testing.assert_allclose(evaluate_basis(b, 3, 0.0), [1.0, R2, 0.0], atol=1e-15)


def test_constant_only_basis():
    b = make_basis("trig", 1)
    np.testing.assert_array_equal(b.features(np.linspace(0, 1, 7)), np.ones((7, 1)))


def test_dirac_two_functions_are_indicators():
    b = make_basis(BasisKind.DIRAC_TRIG, 2)
    np.testing.assert_array_equal(evaluate_basis(b, 2, 0.0), [1.0, 0.0])
    np.testing.assert_array_equal(evaluate_basis(b, 2, 0.3), [0.0, 1.0])


def test_dirac_non_atom_functions_vanish_at_zero():
    b = make_basis("dirac_trig", 9)
    v = evaluate_basis(b, 9, 0.0)
    assert v[0] == 1.0 and np.all(v[1:] == 0.0)


@pytest.mark.parametrize("y", [-0.01, 1.01, float("nan")])
def test_evaluate_outside_domain(y):
    with pytest.raises(ValueError):
        evaluate_basis(make_basis("trig", 3), 3, y)


@given(st.floats(0, 1), st.integers(1, 40))
def test_features_match_scalar_formula(x, M):
    got = make_basis("trig", 40).features(np.array([x]), M)[0]
    want = [phi_scalar(a, x) for a in range(1, M + 1)]
    np.testing.assert_allclose(got, want, atol=1e-12)


@pytest.mark.parametrize("M", [1, 2, 7, 33, 64])
def test_gram_matrix_is_identity(M):
    x, w = gauss_legendre_nodes(4096)
    F = make_basis("trig", 64).features(x, M)
    np.testing.assert_allclose(F.T @ (w[:, None] * F), np.eye(M), atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=20))
def test_parseval(coeffs):
    f = CoefficientDensity(make_basis("trig", 20), np.array(coeffs))
    x, w = gauss_legendre_nodes(4096)
    assert math.isclose(math.sqrt(w @ f(x) ** 2), f.norm(), rel_tol=1e-6, abs_tol=1e-9)


def test_uniform_projection():
    c = project_true_density(make_basis("trig", 5), 5, "uniform").coeffs
    np.testing.assert_allclose(c, [1, 0, 0, 0, 0], atol=1e-13)


def test_basis_function_projects_to_unit_vector():
    f = lambda y: R2 * np.cos(2 * np.pi * np.asarray(y))
    c = project_true_density(make_basis("trig", 9), 9, f).coeffs
    np.testing.assert_allclose(c, np.eye(9)[1], atol=1e-12)


def test_beta_projection_against_adaptive_quadrature():
    b = make_basis("trig", 3)
    c = project_true_density(b, 3, "beta").coeffs
    beta = Beta()
    for a in range(1, 4):
        ref, _ = integrate.quad(lambda y: beta.pdf(np.array([y]))[0] * phi_scalar(a, y), 0, 1,
                                epsabs=1e-13, epsrel=1e-13, limit=200)
        assert abs(c[a - 1] - ref) < 1e-8


def test_symbeta_projection_against_adaptive_quadrature():
    sb = get_density("symbeta")
    c = project_true_density(make_basis("trig", 11), 11, sb).coeffs
    for a in (1, 4, 11):
        ref = sum(integrate.quad(lambda y: sb.pdf(np.array([y]))[0] * phi_scalar(a, y), lo, hi,
                                 epsabs=1e-13, epsrel=1e-13, limit=400)[0]
                  for lo, hi in ((0, 2 / 3), (2 / 3, 1)))
        assert abs(c[a - 1] - ref) < 1e-8


def test_truncation_equals_lower_projection():
    b = make_basis("trig", 40)
    big = project_true_density(b, 40, "symbeta")
    small = project_true_density(b, 13, "symbeta")
    np.testing.assert_allclose(big.truncate(13).coeffs, small.coeffs, atol=1e-14)


def test_projection_requires_enough_nodes():
    with pytest.raises(ValueError):
        project_true_density(make_basis("trig", 3), 3, "beta", quadrature_points=512)


def test_projection_rejects_non_finite():
    with pytest.raises(FloatingPointError):
        project_true_density(make_basis("trig", 3), 3, lambda y: np.full(np.shape(y), np.nan))


def test_dirac_projection_atom_from_density_at_zero():
    f = lambda y: np.where(np.asarray(y) == 0.0, 0.25, 0.75)
    c = project_true_density(make_basis("dirac_trig", 4), 4, f).coeffs
    np.testing.assert_allclose(c, [0.25, 0.75, 0, 0], atol=1e-12)


def test_l2_distance_with_padding():
    b = make_basis("trig", 3)
    a = CoefficientDensity(b, [1.0, 0.0])
    c = CoefficientDensity(b, [1.0, 1.0, 1.0])
    assert l2_distance(a, a) == 0.0
    assert math.isclose(l2_distance(a, c), math.sqrt(2))


def test_l2_distance_rejects_mixed_kinds():
    with pytest.raises(ValueError):
        l2_distance(CoefficientDensity(make_basis("trig", 2), [1.0]),
                    CoefficientDensity(make_basis("dirac_trig", 2), [1.0]))


def test_l2_distance_against_quadrature(rng):
    b = make_basis("trig", 12)
    f = CoefficientDensity(b, rng.normal(size=12))
    g = CoefficientDensity(b, rng.normal(size=7))
    x, w = gauss_legendre_nodes(8192)
    assert abs(math.sqrt(w @ (f(x) - g(x)) ** 2) - l2_distance(f, g)) < 1e-6


def test_trig_polynomial_density_projects_to_its_coefficients():
    d = TrigPolynomial((1.0, 0.3, -0.2, 0.1))
    c = project_true_density(make_basis("trig", 6), 6, d).coeffs
    np.testing.assert_allclose(c, [1.0, 0.3, -0.2, 0.1, 0, 0], atol=1e-12)


@pytest.mark.parametrize("m,M,val", [(2, 3, 384.0), (1, 1, 32.0)])
def test_eta3_closed_form(m, M, val):
    assert eta3_bound(m, M) == val


def test_eta3_rejects_bad_dims():
    with pytest.raises(ValueError):
        eta3_bound(3, 2)


def _eta3_grid(m, M, coarse=8, fine=50):
    """sup over a grid of sum_abc (u_abc(y) - u_abc(y'))^2 via separable kernels."""
    b = make_basis("trig", 8)
    ys = np.linspace(0, 1, fine)
    yp = np.linspace(0, 1, coarse)
    Fm, FM = b.features(ys, m), b.features(ys, M)
    Gm, GM = b.features(yp, m), b.features(yp, M)
    Sm, SM = (Fm ** 2).sum(1), (FM ** 2).sum(1)
    Tm, TM = (Gm ** 2).sum(1), (GM ** 2).sum(1)
    Km, KM = Fm @ Gm.T, FM @ GM.T  # (fine, coarse)
    best = 0.0
    for i in range(fine):
        # axes: y2, y3, y'1, y'2, y'3
        uu = Sm[i] * SM[:, None] * Sm[None, :]
        vv = np.einsum("p,q,r->pqr", Tm, TM, Tm)
        uv = np.einsum("p,jq,kr->jkpqr", Km[i], KM, Km)
        val = uu[:, :, None, None, None] + vv[None, None] - 2 * uv
        best = max(best, float(val.max()))
    return best


@pytest.mark.parametrize("m,M", [(1, 1), (1, 4), (2, 3), (3, 5), (4, 8), (8, 8)])
def test_eta3_bound_dominates_grid_sup(m, M):
    assert eta3_bound(m, M) >= _eta3_grid(m, M)


def test_basis_json_round_trip():
    b = make_basis("dirac_trig", 17)
    assert Basis.from_dict(b.to_dict()) == b
