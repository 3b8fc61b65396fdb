"""Real spherical harmonics on the unit sphere.

Orthonormal convention: the L2(S^2) norm of every basis function is 1, and
the Condon-Shortley phase is cancelled (Y_{1,1} is a positive multiple of
x). Evaluation uses the stable fully-normalized associated-Legendre
recurrence; analysis is a weighted least-squares projection, so the
analyze/synthesize round trip is exact (up to conditioning) on band-limited
fields regardless of quadrature error.
"""

import weakref

import numpy as np
from scipy.special import lpmv, gammaln


def band_limit(n_vertices):
    """Largest admissible band for a mesh with the given vertex count."""
    return int(np.sqrt(n_vertices) / 2)


def sh_index(ell, m):
    """Column index of (l, m) in the coefficient vector."""
    return ell * ell + ell + m


def real_sph_harm_matrix(points, L):
    """Evaluate the real orthonormal harmonics Y_lm, l <= L, at unit points.

    Returns an (npoints, (L+1)^2) matrix; columns ordered (l, m) with
    m = -l..l.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    ct = np.clip(z, -1.0, 1.0)
    st = np.sqrt(np.maximum(1.0 - ct * ct, 0.0))
    phi = np.arctan2(y, x)
    n = len(pts)
    out = np.empty((n, (L + 1) ** 2))
    sqrt2 = np.sqrt(2.0)
    # iterate over m; for each m walk l = m..L with the normalized recurrence
    pmm = np.full(n, np.sqrt(1.0 / (4.0 * np.pi)))
    for m in range(L + 1):
        if m > 0:
            pmm = pmm * st * np.sqrt((2 * m + 1) / (2.0 * m))
        if m > 0:
            cm = sqrt2 * np.cos(m * phi)
            sm = sqrt2 * np.sin(m * phi)
        p_prev = np.zeros(n)   # P_{l-2}^m, seeded as 0
        p_curr = pmm           # P_m^m
        a_prev = 0.0
        for ell in range(m, L + 1):
            if ell == m:
                p = p_curr
            else:
                a = np.sqrt((4.0 * ell * ell - 1.0) / (ell * ell - m * m))
                if ell == m + 1:
                    p = a * ct * p_curr
                else:
                    p = a * (ct * p_curr - p_prev / a_prev)
                p_prev, p_curr, a_prev = p_curr, p, a
            if ell == m:
                p_prev, a_prev = np.zeros(n), 0.0
            if m == 0:
                out[:, sh_index(ell, 0)] = p
            else:
                out[:, sh_index(ell, m)] = p * cm
                out[:, sh_index(ell, -m)] = p * sm
    return out


def real_sph_harm_matrix_reference(points, L):
    """Slow lpmv-based evaluation, kept as an independent oracle."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ct = np.clip(pts[:, 2], -1.0, 1.0)
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    cols = []
    for ell in range(L + 1):
        for m in range(-ell, ell + 1):
            am = abs(m)
            lognorm = 0.5 * (np.log(2 * ell + 1) - np.log(4 * np.pi)
                             + gammaln(ell - am + 1) - gammaln(ell + am + 1))
            # (-1)^m cancels the Condon-Shortley phase carried by lpmv
            norm = (-1.0) ** am * np.exp(lognorm)
            P = lpmv(am, ell, ct)
            if m == 0:
                cols.append(norm * P)
            elif m > 0:
                cols.append(np.sqrt(2.0) * norm * P * np.cos(am * phi))
            else:
                cols.append(np.sqrt(2.0) * norm * P * np.sin(am * phi))
    return np.column_stack(cols)


_MATRIX_CACHE = weakref.WeakKeyDictionary()


def _mesh_matrix(mesh, L):
    per_mesh = _MATRIX_CACHE.setdefault(mesh, {})
    if L not in per_mesh:
        per_mesh[L] = real_sph_harm_matrix(mesh.vertices, L)
    return per_mesh[L]


def sh_analyze(mesh, values, L):
    """Least-squares projection of per-vertex values onto harmonics up to L."""
    limit = band_limit(mesh.n_vertices)
    if L > limit:
        raise ValueError(f"band {L} exceeds mesh limit {limit}")
    B = _mesh_matrix(mesh, L)
    sw = np.sqrt(mesh.weights)
    coeffs, *_ = np.linalg.lstsq(B * sw[:, None], values * sw, rcond=None)
    return coeffs


def sh_synthesize(coeffs, points):
    """Evaluate the harmonic expansion at arbitrary unit points."""
    L = int(np.sqrt(len(coeffs))) - 1
    if (L + 1) ** 2 != len(coeffs):
        raise ValueError("coefficient vector length must be a perfect square")
    return real_sph_harm_matrix(points, L) @ coeffs


# Fourth-order centered stencils on geodesic circles. The second derivative
# along a unit-speed great circle equals the covariant Hessian in that
# direction because the geodesic acceleration is purely normal.
_H_STEP = 1e-2
_W1 = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0          # offsets -2h,-h,h,2h
_W2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0  # offsets -2h,-h,0,h,2h


def _stencil_points(points, frames, step):
    e1, e2 = frames
    offs = np.array([-2 * step, -step, step, 2 * step])
    dirs = [e1, e2, (e1 + e2) / np.sqrt(2.0)]
    stacks = [points]
    for d in dirs:
        for t in offs:
            stacks.append(np.cos(t) * points + np.sin(t) * d)
    return np.concatenate(stacks)


_STENCIL_CACHE = weakref.WeakKeyDictionary()


def _stencil_matrix(mesh, L, step):
    per_mesh = _STENCIL_CACHE.setdefault(mesh, {})
    if (L, step) not in per_mesh:
        pts = _stencil_points(mesh.vertices, mesh.frames, step)
        per_mesh[(L, step)] = real_sph_harm_matrix(pts, L)
    return per_mesh[(L, step)]


def spectral_derivatives(coeffs, points, frames, step=_H_STEP, mesh=None):
    """Covariant gradient and Hessian of a band-limited field at unit points.

    Passing mesh enables caching of the stencil basis matrix, which makes
    repeated calls on the same mesh cheap.

    Returns (value (N,), grad (N, 2) in the frame, hess (N, 2, 2)).
    """
    n = len(points)
    L = int(np.sqrt(len(coeffs))) - 1
    if mesh is not None:
        vals = (_stencil_matrix(mesh, L, step) @ coeffs).reshape(13, n)
    else:
        vals = sh_synthesize(coeffs, _stencil_points(points, frames, step))
        vals = vals.reshape(13, n)
    h = step
    f0 = vals[0]
    out_g = np.empty((n, 2))
    d2 = np.empty((3, n))
    for k in range(3):
        block = vals[1 + 4 * k: 5 + 4 * k]  # rows: -2h, -h, h, 2h
        d1 = (_W1[0] * block[0] + _W1[1] * block[1]
              + _W1[2] * block[2] + _W1[3] * block[3]) / h
        d2[k] = (_W2[0] * block[0] + _W2[1] * block[1] + _W2[2] * f0
                 + _W2[3] * block[2] + _W2[4] * block[3]) / h ** 2
        if k < 2:
            out_g[:, k] = d1
    hess = np.empty((n, 2, 2))
    hess[:, 0, 0] = d2[0]
    hess[:, 1, 1] = d2[1]
    hess[:, 0, 1] = hess[:, 1, 0] = d2[2] - 0.5 * (d2[0] + d2[1])
    return f0, out_g, hess
