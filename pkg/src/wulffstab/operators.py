"""Covariant differential operators and norms on triangulated surfaces.

Derivatives come from weighted least-squares polynomial fits over the
one- and two-ring of each vertex, in tangent-plane projection coordinates.
The projection chart agrees with normal coordinates to second order, so the
fitted gradient and Hessian are the covariant ones at the vertex. Fits are
precomputed once per mesh as sparse stencil matrices.
"""

import weakref

import numpy as np
from scipy import sparse

from . import spectral


class TensorField:
    """Per-vertex 2x2 tensor in the local tangent frame.

    kind is 'bilinear' for symmetric second-order forms and 'operator' for
    mixed (1,1) tensors such as shape operators. Norms use the Frobenius
    norm pointwise, which is invariant under per-vertex frame rotations.
    """

    def __init__(self, values, kind="bilinear"):
        values = np.asarray(values, dtype=float)
        if values.ndim != 3 or values.shape[1:] != (2, 2):
            raise ValueError("TensorField expects (N, 2, 2) values")
        if kind not in ("bilinear", "operator"):
            raise ValueError(f"unknown tensor kind {kind!r}")
        self.values = values
        self.kind = kind

    def __len__(self):
        return len(self.values)

    def pointwise_norm(self):
        return np.linalg.norm(self.values, axis=(1, 2))

    def trace(self):
        return np.einsum("nii->n", self.values)


# monomial exponents for fits up to cubic order; coefficients of the
# quadratic block are the Hessian entries thanks to the 1/2 factors
_EXPONENTS = np.array([
    (0, 0),
    (1, 0), (0, 1),
    (2, 0), (1, 1), (0, 2),
    (3, 0), (2, 1), (1, 2), (0, 3),
])
_FACTORS = np.array([1.0, 1, 1, 0.5, 1, 0.5, 1 / 6, 0.5, 0.5, 1 / 6])


def _design_matrix(y, n_terms):
    m = (y[..., 0:1] ** _EXPONENTS[:n_terms, 0]
         * y[..., 1:2] ** _EXPONENTS[:n_terms, 1])
    return m * _FACTORS[:n_terms]


class DerivativeOperators:
    """Sparse stencil matrices for gradient and Hessian in vertex frames.

    Built from any mesh exposing vertices, frames, two_ring and neighbors.
    """

    def __init__(self, mesh, order=3):
        if order not in (2, 3):
            raise ValueError("fit order must be 2 or 3")
        self.mesh = mesh
        n = mesh.n_vertices
        e1, e2 = mesh.frames
        # one stencil row per vertex per derivative channel
        # channels: g1, g2, h11, h12, h22
        stencil_rows = [[] for _ in range(5)]
        stencil_cols = [[] for _ in range(5)]
        stencil_data = [[] for _ in range(5)]
        for i in range(n):
            ring = mesh.two_ring(i)
            if len(mesh.neighbors[i]) < 3:
                raise ValueError(f"degenerate one-ring at vertex {i}")
            idx = np.concatenate(([i], ring))
            d = mesh.vertices[idx] - mesh.vertices[i]
            y = np.column_stack((d @ e1[i], d @ e2[i]))
            r = np.linalg.norm(y, axis=1)
            rbar = r[1:].mean()
            w = np.exp(-((r / rbar) ** 2))
            n_terms = 10 if (order == 3 and len(idx) >= 12) else 6
            A = _design_matrix(y, n_terms) * w[:, None]
            # rows of the pseudo-inverse map weighted values to coefficients
            pinv = np.linalg.pinv(A, rcond=1e-10) * w[None, :]
            for ch, coef in enumerate((1, 2, 3, 4, 5)):
                stencil_rows[ch].extend([i] * len(idx))
                stencil_cols[ch].extend(idx.tolist())
                stencil_data[ch].extend(pinv[coef].tolist())
        mats = []
        for ch in range(5):
            mats.append(sparse.csr_matrix(
                (stencil_data[ch], (stencil_rows[ch], stencil_cols[ch])),
                shape=(n, n)))
        self.g1, self.g2, self.h11, self.h12, self.h22 = mats

    def gradient(self, values):
        """Covariant gradient, (N, 2) components in the vertex frames."""
        values = np.asarray(values, dtype=float)
        return np.column_stack((self.g1 @ values, self.g2 @ values))

    def gradient_ambient(self, values):
        """Covariant gradient as tangent vectors in ambient coordinates."""
        g = self.gradient(values)
        e1, e2 = self.mesh.frames
        return g[:, 0:1] * e1 + g[:, 1:2] * e2

    def jacobian_ambient(self, vectors):
        """Tangential derivative of an ambient-vector-valued field.

        Returns (N, 3, 2): columns are derivatives along the frame
        directions e1 and e2.
        """
        vectors = np.asarray(vectors, dtype=float)
        out = np.empty((len(vectors), 3, 2))
        for k in range(3):
            out[:, k, 0] = self.g1 @ vectors[:, k]
            out[:, k, 1] = self.g2 @ vectors[:, k]
        return out

    def hessian(self, values):
        """Covariant Hessian, (N, 2, 2) in the vertex frames (symmetric)."""
        values = np.asarray(values, dtype=float)
        H = np.empty((len(values), 2, 2))
        H[:, 0, 0] = self.h11 @ values
        H[:, 1, 1] = self.h22 @ values
        H[:, 0, 1] = H[:, 1, 0] = self.h12 @ values
        return H

    def divergence(self, vectors):
        """Surface divergence of a tangent vector field.

        Accepts either (N, 2) frame components or (N, 3) ambient vectors.
        Uses div X = sum_k <grad X^k, e_k> over ambient components, which is
        exact for tangent fields and adjoint to -grad up to quadrature.
        """
        vectors = np.asarray(vectors, dtype=float)
        e1, e2 = self.mesh.frames
        if vectors.shape[1] == 2:
            vectors = vectors[:, 0:1] * e1 + vectors[:, 1:2] * e2
        div = np.zeros(len(vectors))
        for k in range(3):
            div += (self.g1 @ vectors[:, k]) * e1[:, k]
            div += (self.g2 @ vectors[:, k]) * e2[:, k]
        return div

    def laplacian(self, values):
        """Laplace-Beltrami via divergence of the gradient."""
        return self.divergence(self.gradient_ambient(values))


def lp_norm(values, p, weights):
    """(integral |v|^p dV)^(1/p) with vertex quadrature weights.

    values may be scalar (N,), vector (N, d), matrix (N, 2, 2) or a
    TensorField; the pointwise magnitude is the Frobenius norm.
    """
    if p <= 1:
        raise ValueError("p must be > 1")
    if isinstance(values, TensorField):
        mag = values.pointwise_norm()
    else:
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            mag = np.abs(values)
        else:
            mag = np.sqrt(np.sum(values.reshape(len(values), -1) ** 2, axis=1))
    return float(np.sum(weights * mag ** p) ** (1.0 / p))


def w2p_norm(values, p, mesh, ops=None, coeffs=None):
    """Sobolev W^{2,p} norm: ||u||_p + ||grad u||_p + ||Hess u||_p.

    If harmonic coefficients are supplied the derivatives are spectral
    (round sphere only); otherwise they come from the mesh stencils.
    """
    values = np.asarray(values, dtype=float)
    if coeffs is not None:
        _, grad, hess = spectral.spectral_derivatives(coeffs, mesh.vertices,
                                                      mesh.frames, mesh=mesh)
    else:
        if ops is None:
            ops = get_operators(mesh)
        grad = ops.gradient(values)
        hess = ops.hessian(values)
    w = mesh.weights
    return lp_norm(values, p, w) + lp_norm(grad, p, w) + lp_norm(hess, p, w)


_OPS_CACHE = weakref.WeakKeyDictionary()


def get_operators(mesh, order=3):
    """Memoized DerivativeOperators for a mesh instance."""
    per_mesh = _OPS_CACHE.setdefault(mesh, {})
    if order not in per_mesh:
        per_mesh[order] = DerivativeOperators(mesh, order=order)
    return per_mesh[order]


def surface_gradient(mesh, values):
    """Covariant gradient as ambient tangent vectors, (N, 3)."""
    return get_operators(mesh).gradient_ambient(values)


def surface_divergence(mesh, vectors):
    """Surface divergence of a tangent vector field ((N, 2) frame or (N, 3))."""
    return get_operators(mesh).divergence(vectors)
