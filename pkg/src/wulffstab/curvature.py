"""Anisotropic shape operators, trace-free deficits and Gauss-equation algebra."""

import numpy as np

from .operators import TensorField, lp_norm


def anisotropic_shape_operator(geom, integrand):
    """S_F = A_F(nu_Sigma) o d(nu_Sigma) per node, plus H_F = tr S_F.

    Both factors act on the surface tangent plane (which equals the tangent
    plane of the sphere at nu_Sigma), so the composition is a 2x2 product
    in the node's orthonormal surface basis.

    Returns (TensorField of kind 'operator', H_F array).
    """
    if not integrand.is_elliptic:
        raise ValueError(
            f"integrand is not elliptic (margin {integrand.ellipticity_margin:g})")
    A3 = integrand.anisotropy_ambient(geom.normal)
    tau = geom.tangent_basis  # (N, 3, 2)
    A2 = np.einsum("nki,nkl,nlj->nij", tau, A3, tau)
    vals = A2 @ geom.shape_operator
    field = TensorField(vals, kind="operator")
    return field, field.trace()


def trace_free(field):
    """Trace-free part and trace of a per-node 2x2 tensor field."""
    values = field.values if isinstance(field, TensorField) else np.asarray(field)
    tr = np.einsum("nii->n", values)
    dev = values - 0.5 * tr[:, None, None] * np.eye(2)[None]
    kind = field.kind if isinstance(field, TensorField) else "bilinear"
    return TensorField(dev, kind=kind), tr


class DeficitReport:
    """Measured oscillation and deficit quantities for one surface.

    lambda_star minimizes ||S_F - lambda Id||_{L^p}; h_mean_over_n is the
    paper-style comparison value H_bar_F / n; c_osc is the measured ratio
    oscillation / deficit.
    """

    def __init__(self, p, deficit, lambda_star, oscillation, h_mean_over_n):
        self.p = p
        self.deficit = deficit
        self.lambda_star = lambda_star
        self.oscillation = oscillation
        self.h_mean_over_n = h_mean_over_n
        self.c_osc = oscillation / deficit if deficit > 1e-14 else np.nan


def _golden_min(fn, lo, hi, iters=80):
    invphi = (np.sqrt(5.0) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return (a + b) / 2


def oscillation_deficit(s_field, hf, weights, p):
    """Minimal oscillation min_lambda ||S_F - lambda Id||_{L^p} and deficit.

    The map lambda -> norm is convex for p > 1, so a golden-section search
    over the eigenvalue range suffices.
    """
    if not 1 < p < np.inf:
        raise ValueError("p must lie in (1, inf)")
    vals = s_field.values

    def osc(lam):
        return lp_norm(vals - lam * np.eye(2)[None], p, weights)

    eigs = np.linalg.eigvals(vals).real
    lo, hi = float(eigs.min()) - 1e-6, float(eigs.max()) + 1e-6
    lam = _golden_min(osc, lo, hi)
    dev, _ = trace_free(s_field)
    deficit = lp_norm(dev, p, weights)
    area = float(weights.sum())
    h_mean_over_n = float(np.sum(weights * hf) / area) / 2.0
    return DeficitReport(p, deficit, float(lam), osc(lam), h_mean_over_n)


# --- pointwise Gauss-equation algebra (any dimension) ----------------------


def gauss_ricci(h):
    """Ricci tensor and scalar curvature of a hypersurface from h.

    Gauss equation with the flat ambient metric: Ric = H h - h^2 and
    R = H^2 - |h|^2, in an orthonormal frame (g = Id).
    """
    h = np.asarray(h, dtype=float)
    H = np.trace(h)
    ric = H * h - h @ h
    r = H ** 2 - float(np.sum(h * h))
    return ric, r


def riemann_brute(h):
    """Riemann tensor Riem_ijkl = h_ik h_jl - h_il h_jk by explicit loops."""
    h = np.asarray(h, dtype=float)
    n = h.shape[0]
    riem = np.empty((n, n, n, n))
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    riem[i, j, k, l] = h[i, k] * h[j, l] - h[i, l] * h[j, k]
    return riem


def ricci_from_riemann(riem):
    """Contraction Ric_ij = g^{pq} Riem_ipjq with g = Id."""
    return np.einsum("ipjp->ij", riem)
