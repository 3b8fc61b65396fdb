import numpy as np
import pytest
from numpy.testing import assert_allclose

from wulffstab import Integrand, gauge
from wulffstab.integrand import HARMONIC_POLYNOMIALS, HomogeneousPolynomial
from wulffstab import spectral
from wulffstab.spheremesh import tangent_frames

rng = np.random.default_rng(100)


def random_units(n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def geodesic_hessian(integrand, nu, h=1e-4):
    """Central finite differences of F along geodesics: intrinsic Hessian."""
    e1, e2 = (v[0] for v in tangent_frames(nu[None, :]))

    def F(p):
        return integrand.value(p[None, :])[0]

    out = np.zeros((2, 2))
    for i, d in enumerate((e1, e2)):
        out[i, i] = (F(np.cos(h) * nu + np.sin(h) * d) - 2 * F(nu)
                     + F(np.cos(h) * nu - np.sin(h) * d)) / h ** 2
    dd = (e1 + e2) / np.sqrt(2)
    mixed = (F(np.cos(h) * nu + np.sin(h) * dd) - 2 * F(nu)
             + F(np.cos(h) * nu - np.sin(h) * dd)) / h ** 2
    out[0, 1] = out[1, 0] = mixed - (out[0, 0] + out[1, 1]) / 2
    return out, (e1, e2)


def test_constant_evaluate():
    I = Integrand.constant()
    F, DF, D2F = I.evaluate(np.array([0.0, 0.0, 1.0]))
    assert F == 1.0
    assert_allclose(DF, 0.0, atol=1e-15)
    assert_allclose(D2F, 0.0, atol=1e-15)


def test_quadratic_value_at_pole():
    I = Integrand.quadratic_form(np.diag([1.0, 1.0, 4.0]))
    F, _, _ = I.evaluate(np.array([0.0, 0.0, 1.0]))
    assert_allclose(F, 2.0, rtol=1e-15)


@pytest.mark.parametrize("family", ["quadratic", "fourier"])
def test_intrinsic_hessian_matches_geodesic_differences(family):
    if family == "quadratic":
        M = np.array([[2.0, 0.3, 0.1], [0.3, 1.5, -0.2], [0.1, -0.2, 3.0]])
        I = Integrand.quadratic_form(M)
    else:
        I = Integrand.fourier_perturbed(1.0, 0.08, (3, 2))
    for nu in random_units(20):
        Hfd, (e1, e2) = geodesic_hessian(I, nu)
        _, _, D2F = I.evaluate(nu)
        Hcl = np.array([[e1 @ D2F @ e1, e1 @ D2F @ e2],
                        [e2 @ D2F @ e1, e2 @ D2F @ e2]])
        assert_allclose(Hcl, Hfd, atol=1e-6)


def test_tangency_invariants():
    I = Integrand.fourier_perturbed(1.0, 0.05, (2, 1))
    for nu in random_units(10):
        F, DF, D2F = I.evaluate(nu)
        assert F > 0
        assert abs(DF @ nu) < 1e-13
        assert np.abs(D2F @ nu).max() < 1e-13
        assert np.abs(nu @ D2F).max() < 1e-13


def test_evaluate_rejects_non_unit():
    I = Integrand.constant()
    with pytest.raises(ValueError):
        I.evaluate(np.array([0.0, 0.0, 1.1]))


def test_anisotropy_constant_is_identity():
    A = Integrand.constant().anisotropy(np.array([0.0, 1.0, 0.0]))
    assert_allclose(A.matrix, np.eye(2), atol=1e-14)
    assert_allclose(A.min_eigenvalue, 1.0, rtol=1e-12)


def test_anisotropy_matches_fd_hessian_plus_f():
    I = Integrand.quadratic_form(np.diag([1.0, 1.0, 4.0]))
    nu = np.array([0.0, 0.0, 1.0])
    Hfd, (e1, e2) = geodesic_hessian(I, nu)
    A = I.anisotropy(nu)
    frame_fd = Hfd + I.value(nu[None])[0] * np.eye(2)
    # express the computed matrix in the FD frame for comparison
    E = np.stack((e1, e2), axis=1)
    A3 = I.anisotropy_ambient(nu)
    assert_allclose(E.T @ A3 @ E, frame_fd, atol=1e-6)
    assert_allclose(A.matrix, A.matrix.T, atol=0)
    assert A.min_eigenvalue > 0


def test_anisotropy_symmetric_exactly():
    I = Integrand.fourier_perturbed(1.0, 0.1, (2, 2))
    for nu in random_units(5):
        A3 = I.anisotropy_ambient(nu)
        assert np.abs(A3 - A3.T).max() == 0.0


def test_ellipticity_margin_positive_and_violation_detected():
    assert Integrand.constant().ellipticity_margin > 0.99
    I = Integrand.quadratic_form(np.diag([1.0, 1.0, 4.0]))
    assert I.ellipticity_margin > 0
    # strong perturbation loses positivity of F
    with pytest.raises(ValueError):
        Integrand.fourier_perturbed(1.0, 5.0, (2, 0))


def test_gauge_euclidean_and_homogeneity():
    I = Integrand.constant()
    x = np.array([0.3, -1.2, 0.4])
    v, g = gauge(I, x)
    assert_allclose(v, np.linalg.norm(x), rtol=1e-12)
    assert_allclose(g, x / np.linalg.norm(x), atol=1e-12)
    v2, _ = gauge(I, 2 * x)
    assert_allclose(v2, 2 * v, rtol=1e-12)
    with pytest.raises(ValueError):
        gauge(I, np.zeros(3))


def test_gauge_closed_form_ellipsoid():
    M = np.diag([1.0, 1.0, 4.0])
    I = Integrand.quadratic_form(M)
    Minv = np.linalg.inv(M)
    pts = rng.normal(size=(12, 3)) * 2
    vals, grads = gauge(I, pts)
    exact = np.sqrt(np.einsum("ni,ij,nj->n", pts, Minv, pts))
    assert_allclose(vals, exact, rtol=1e-10)
    gex = pts @ Minv / exact[:, None]
    assert_allclose(grads, gex, atol=1e-9)


def test_robin_identity_at_wulff_vertices(wulff4, ellipsoid_integrand):
    """F(nu) dF*[c] = <nu, c> at Wulff vertices; literal for F == 1."""
    W = wulff4
    I = ellipsoid_integrand
    sample = W.vertices[::97]
    nu = W.normals[::97]
    _, grads = gauge(I, sample)
    F = I.value(nu)
    for c in rng.normal(size=(10, 3)):
        lhs = F * (grads @ c)
        rhs = nu @ c
        assert np.abs(lhs - rhs).max() / np.abs(rhs).max() < 1e-4


def test_robin_identity_literal_isotropic(sphere5):
    I = Integrand.constant()
    z = sphere5.vertices[::211]
    _, grads = gauge(I, z)
    for c in rng.normal(size=(10, 3)):
        assert np.abs(grads @ c - z @ c).max() / np.abs(z @ c).max() < 1e-4


def test_harmonic_polynomial_table_matches_basis():
    """Tabulated Cartesian harmonics agree with the Legendre-recurrence basis."""
    pts = random_units(50)
    for (ell, m), coeffs in HARMONIC_POLYNOMIALS.items():
        poly = HomogeneousPolynomial(coeffs)
        col = spectral.real_sph_harm_matrix(pts, ell)[:, spectral.sh_index(ell, m)]
        assert_allclose(poly.value(pts), col, atol=1e-12,
                        err_msg=f"(l, m) = {(ell, m)}")


def test_homogeneous_polynomial_derivatives():
    poly = HomogeneousPolynomial(HARMONIC_POLYNOMIALS[(3, 1)])
    pts = rng.normal(size=(5, 3))
    h = 1e-6
    for p in pts:
        g = poly.grad(p[None])[0]
        for ax in range(3):
            e = np.zeros(3)
            e[ax] = h
            fd = (poly.value((p + e)[None])[0] - poly.value((p - e)[None])[0]) / (2 * h)
            assert_allclose(g[ax], fd, rtol=1e-7, atol=1e-9)
        H = poly.hess(p[None])[0]
        assert_allclose(H, H.T, atol=1e-12)


def test_fourier_explicit_polynomial_mode():
    """Explicit exponent dict: F = 1 + a (x^2 z - y^2 z) restricted to S^2."""
    mode = {(2, 0, 1): 1.0, (0, 2, 1): -1.0}
    I = Integrand.fourier_perturbed(1.0, 0.05, mode)
    nu = np.array([0.6, 0.0, 0.8])
    F, DF, D2F = I.evaluate(nu)
    assert_allclose(F, 1.0 + 0.05 * (0.36 * 0.8), rtol=1e-14)
    assert abs(DF @ nu) < 1e-13
    Hfd, (e1, e2) = geodesic_hessian(I, nu)
    Hcl = np.array([[e1 @ D2F @ e1, e1 @ D2F @ e2],
                    [e2 @ D2F @ e1, e2 @ D2F @ e2]])
    assert_allclose(Hcl, Hfd, atol=1e-6)


def test_fourier_rejects_mixed_degree():
    with pytest.raises(ValueError):
        Integrand.fourier_perturbed(1.0, 0.1, {(1, 0, 0): 1.0, (2, 0, 0): 1.0})
