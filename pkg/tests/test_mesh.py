import numpy as np
import pytest
from numpy.testing import assert_allclose

from wulffstab import build_sphere_mesh
from wulffstab import spectral
from wulffstab.operators import (DerivativeOperators, TensorField,
                                 get_operators, lp_norm, w2p_norm)

rng = np.random.default_rng(7)


def test_vertex_counts_and_units():
    m = build_sphere_mesh(2)
    assert m.n_vertices == 162
    assert np.abs(np.linalg.norm(m.vertices, axis=1) - 1).max() < 1e-14
    m3 = build_sphere_mesh(3)
    assert m3.n_vertices == 10 * 4 ** 3 + 2


def test_level_bounds():
    with pytest.raises(ValueError):
        build_sphere_mesh(1)
    with pytest.raises(ValueError):
        build_sphere_mesh(9)


def test_area_converges(sphere5):
    area = sphere5.weights.sum()
    assert abs(area - 4 * np.pi) / (4 * np.pi) < 1e-3


def test_frames_orthonormal(sphere4):
    e1, e2 = sphere4.frames
    n = sphere4.vertices
    assert np.abs(np.einsum("ni,ni->n", e1, e2)).max() < 1e-14
    assert np.abs(np.einsum("ni,ni->n", e1, n)).max() < 1e-14
    assert_allclose(np.cross(e1, e2), n, atol=1e-14)


# --- spectral ---------------------------------------------------------------


def test_recurrence_matches_lpmv_reference(sphere4):
    pts = sphere4.vertices[::17]
    fast = spectral.real_sph_harm_matrix(pts, 12)
    ref = spectral.real_sph_harm_matrix_reference(pts, 12)
    assert_allclose(fast, ref, atol=1e-13)


def test_y10_projects_to_single_coefficient(sphere5):
    f = spectral.real_sph_harm_matrix(sphere5.vertices, 1)[:, spectral.sh_index(1, 0)]
    c = spectral.sh_analyze(sphere5, f, 4)
    pure = np.zeros_like(c)
    pure[spectral.sh_index(1, 0)] = 1.0
    assert np.abs(c - pure).max() < 1e-10


def test_constant_field_is_ell0(sphere4):
    c = spectral.sh_analyze(sphere4, np.ones(sphere4.n_vertices), 3)
    assert abs(c[0] - np.sqrt(4 * np.pi)) < 1e-6
    assert np.abs(c[1:]).max() < 1e-10


def test_band8_round_trip(sphere5):
    coeffs = rng.normal(size=81)
    f = spectral.sh_synthesize(coeffs, sphere5.vertices)
    back = spectral.sh_analyze(sphere5, f, 8)
    assert np.abs(back - coeffs).max() < 1e-9


def test_over_band_rejected(sphere4):
    with pytest.raises(ValueError):
        spectral.sh_analyze(sphere4, np.ones(sphere4.n_vertices), 40)


def test_spectral_derivatives_of_linear_mode(sphere4):
    """u = <c, x> has grad = tangential c and Hess = -u * Id on the sphere."""
    c = np.array([0.4, -0.2, 0.9])
    coeffs = np.zeros(4)
    c1 = np.sqrt(3 / (4 * np.pi))
    coeffs[spectral.sh_index(1, 1)] = c[0] / c1
    coeffs[spectral.sh_index(1, -1)] = c[1] / c1
    coeffs[spectral.sh_index(1, 0)] = c[2] / c1
    val, grad, hess = spectral.spectral_derivatives(
        coeffs, sphere4.vertices, sphere4.frames, mesh=sphere4)
    u = sphere4.vertices @ c
    assert_allclose(val, u, atol=1e-10)
    e1, e2 = sphere4.frames
    assert_allclose(grad[:, 0], e1 @ c, atol=1e-8)
    assert_allclose(grad[:, 1], e2 @ c, atol=1e-8)
    assert_allclose(hess, -u[:, None, None] * np.eye(2)[None], atol=1e-7)


# --- norms and operators ----------------------------------------------------


def test_lp_norm_constant(sphere4):
    n = lp_norm(np.full(sphere4.n_vertices, 3.0), 2.5, sphere4.weights)
    exact = 3 * (4 * np.pi) ** (1 / 2.5)
    assert abs(n - exact) / exact < 1e-3


def test_lp_norm_of_y10_is_one(sphere5):
    f = spectral.real_sph_harm_matrix(sphere5.vertices, 1)[:, spectral.sh_index(1, 0)]
    assert abs(lp_norm(f, 2, sphere5.weights) - 1.0) < 1e-3


def test_lp_rejects_small_p(sphere4):
    with pytest.raises(ValueError):
        lp_norm(np.ones(sphere4.n_vertices), 1.0, sphere4.weights)


def test_w22_of_y20_against_eigenvalue_identity(sphere5):
    """Delta Y2 = -6 Y2 gives ||Y2||=1, ||grad||=sqrt(6), ||Hess||=sqrt(30)."""
    coeffs = np.zeros(9)
    coeffs[spectral.sh_index(2, 0)] = 1.0
    f = spectral.sh_synthesize(coeffs, sphere5.vertices)
    exact = 1 + np.sqrt(6) + np.sqrt(30)
    got = w2p_norm(f, 2, sphere5, coeffs=coeffs)
    assert abs(got - exact) / exact < 0.02
    got_mesh = w2p_norm(f, 2, sphere5, ops=get_operators(sphere5))
    assert abs(got_mesh - exact) / exact < 0.02


def test_gradient_exact_on_constants(sphere4):
    ops = get_operators(sphere4)
    g = ops.gradient(np.full(sphere4.n_vertices, 2.5))
    assert np.abs(g).max() < 1e-10


def test_gradient_of_linear_field(sphere4):
    ops = get_operators(sphere4)
    c = np.array([0.3, -1.1, 0.7])
    g = ops.gradient_ambient(sphere4.vertices @ c)
    exact = c[None, :] - sphere4.vertices * (sphere4.vertices @ c)[:, None]
    assert np.abs(g - exact).max() < sphere4.edge_length()


def test_divergence_adjointness(sphere5):
    ops = get_operators(sphere5)
    cX = rng.normal(size=25)
    cphi = rng.normal(size=25)
    f = spectral.sh_synthesize(cX, sphere5.vertices)
    phi = spectral.sh_synthesize(cphi, sphere5.vertices)
    X = ops.gradient_ambient(f)
    lhs = np.sum(sphere5.weights * ops.divergence(X) * phi)
    rhs = -np.sum(sphere5.weights
                  * np.einsum("ni,ni->n", X, ops.gradient_ambient(phi)))
    assert abs(lhs - rhs) / abs(rhs) < 0.05


def test_laplacian_eigenvalue_refinement():
    errs = []
    hs = []
    for level in (3, 4):
        m = build_sphere_mesh(level)
        ops = DerivativeOperators(m)
        f = spectral.real_sph_harm_matrix(m.vertices, 3)[:, spectral.sh_index(3, 1)]
        lap = ops.laplacian(f)
        err = np.sqrt(np.sum(m.weights * (lap + 12 * f) ** 2)
                      / np.sum(m.weights * (12 * f) ** 2))
        errs.append(err)
        hs.append(m.edge_length())
    order = np.log(errs[0] / errs[1]) / np.log(hs[0] / hs[1])
    assert order >= 1.0


def test_tensor_norms_frame_invariant(sphere4):
    vals = rng.normal(size=(sphere4.n_vertices, 2, 2))
    field = TensorField(vals)
    theta = rng.uniform(0, 2 * np.pi, size=sphere4.n_vertices)
    R = np.zeros((sphere4.n_vertices, 2, 2))
    R[:, 0, 0] = np.cos(theta)
    R[:, 0, 1] = -np.sin(theta)
    R[:, 1, 0] = np.sin(theta)
    R[:, 1, 1] = np.cos(theta)
    rotated = TensorField(np.einsum("nki,nkl,nlj->nij", R, vals, R))
    for p in (2, 4):
        a = lp_norm(field, p, sphere4.weights)
        b = lp_norm(rotated, p, sphere4.weights)
        assert abs(a - b) < 1e-12 * max(1, a)


def test_tensor_field_validation():
    with pytest.raises(ValueError):
        TensorField(np.zeros((5, 3, 3)))
    with pytest.raises(ValueError):
        TensorField(np.zeros((5, 2, 2)), kind="weird")


def test_surface_gradient_divergence_wrappers(sphere4):
    from wulffstab import surface_divergence, surface_gradient
    c = np.array([0.2, 0.4, -0.3])
    f = sphere4.vertices @ c
    X = surface_gradient(sphere4, f)
    lap = surface_divergence(sphere4, X)
    # Laplace-Beltrami of an l=1 mode is -2 times the mode
    rel = np.sqrt(np.sum(sphere4.weights * (lap + 2 * f) ** 2)
                  / np.sum(sphere4.weights * (2 * f) ** 2))
    assert rel < 0.01
