"""Anisotropic surface-energy densities on the sphere.

An integrand F > 0 on S^2 is represented through its 1-homogeneous extension
Fbar(x) = |x| F(x/|x|), whose ambient gradient and Hessian are closed-form
for every family. This gives all derived quantities directly:

* intrinsic gradient  DF(nu) = grad Fbar(nu) - F(nu) nu
* anisotropy matrix   A_F(nu) = hess Fbar(nu) restricted to the tangent plane
  (the normal direction is annihilated by 1-homogeneity)
* normal map onto the Wulff shape  x(nu) = grad Fbar(nu) = DF(nu) + F(nu) nu
"""

import numpy as np

from . import spheremesh
from .spheremesh import tangent_frames

UNIT_TOL = 1e-12


class EllipticityError(ValueError):
    """The anisotropy matrix failed to be positive definite."""


# real orthonormal spherical harmonics as homogeneous polynomials, used as
# perturbation modes; keys are (l, m)
_C = {
    "y00": np.sqrt(1 / (4 * np.pi)),
    "y1": np.sqrt(3 / (4 * np.pi)),
    "y2d": np.sqrt(15 / (4 * np.pi)),
    "y20": np.sqrt(5 / (16 * np.pi)),
    "y22": np.sqrt(15 / (16 * np.pi)),
    "y3a": np.sqrt(35 / (32 * np.pi)),
    "y3b": np.sqrt(105 / (4 * np.pi)),
    "y3c": np.sqrt(21 / (32 * np.pi)),
    "y30": np.sqrt(7 / (16 * np.pi)),
    "y32": np.sqrt(105 / (16 * np.pi)),
}

HARMONIC_POLYNOMIALS = {
    (0, 0): {(0, 0, 0): _C["y00"]},
    (1, -1): {(0, 1, 0): _C["y1"]},
    (1, 0): {(0, 0, 1): _C["y1"]},
    (1, 1): {(1, 0, 0): _C["y1"]},
    (2, -2): {(1, 1, 0): _C["y2d"]},
    (2, -1): {(0, 1, 1): _C["y2d"]},
    (2, 0): {(0, 0, 2): 2 * _C["y20"], (2, 0, 0): -_C["y20"], (0, 2, 0): -_C["y20"]},
    (2, 1): {(1, 0, 1): _C["y2d"]},
    (2, 2): {(2, 0, 0): _C["y22"], (0, 2, 0): -_C["y22"]},
    (3, -3): {(2, 1, 0): 3 * _C["y3a"], (0, 3, 0): -_C["y3a"]},
    (3, -2): {(1, 1, 1): _C["y3b"]},
    (3, -1): {(0, 1, 2): 4 * _C["y3c"], (2, 1, 0): -_C["y3c"], (0, 3, 0): -_C["y3c"]},
    (3, 0): {(0, 0, 3): 2 * _C["y30"], (2, 0, 1): -3 * _C["y30"], (0, 2, 1): -3 * _C["y30"]},
    (3, 1): {(1, 0, 2): 4 * _C["y3c"], (3, 0, 0): -_C["y3c"], (1, 2, 0): -_C["y3c"]},
    (3, 2): {(2, 0, 1): _C["y32"], (0, 2, 1): -_C["y32"]},
    (3, 3): {(3, 0, 0): _C["y3a"], (1, 2, 0): -3 * _C["y3a"]},
}


class HomogeneousPolynomial:
    """Homogeneous polynomial in (x, y, z) with closed-form derivatives."""

    def __init__(self, coeffs):
        degs = {sum(k) for k in coeffs}
        if len(degs) != 1:
            raise ValueError("coefficients must share one total degree")
        self.degree = degs.pop()
        self.coeffs = dict(coeffs)

    def value(self, pts):
        pts = np.atleast_2d(pts)
        out = np.zeros(len(pts))
        for (i, j, k), c in self.coeffs.items():
            out += c * pts[:, 0] ** i * pts[:, 1] ** j * pts[:, 2] ** k
        return out

    def grad(self, pts):
        pts = np.atleast_2d(pts)
        out = np.zeros((len(pts), 3))
        for (i, j, k), c in self.coeffs.items():
            e = np.array([i, j, k])
            for ax in range(3):
                if e[ax] == 0:
                    continue
                d = e.copy()
                d[ax] -= 1
                out[:, ax] += (c * e[ax] * pts[:, 0] ** d[0]
                               * pts[:, 1] ** d[1] * pts[:, 2] ** d[2])
        return out

    def hess(self, pts):
        pts = np.atleast_2d(pts)
        out = np.zeros((len(pts), 3, 3))
        for (i, j, k), c in self.coeffs.items():
            e0 = np.array([i, j, k])
            for a in range(3):
                if e0[a] == 0:
                    continue
                e1 = e0.copy()
                e1[a] -= 1
                for b in range(3):
                    if e1[b] == 0:
                        continue
                    d = e1.copy()
                    d[b] -= 1
                    out[:, a, b] += (c * e0[a] * e1[b] * pts[:, 0] ** d[0]
                                     * pts[:, 1] ** d[1] * pts[:, 2] ** d[2])
        return out


def _as_points(nu):
    nu = np.asarray(nu, dtype=float)
    single = nu.ndim == 1
    return np.atleast_2d(nu), single


class Integrand:
    """Anisotropic integrand on S^2 with closed-form derived quantities.

    Construct through the classmethods constant, quadratic_form or
    fourier_perturbed. The ellipticity margin (smallest eigenvalue of
    A_F over a dense direction sample) is computed once at construction.
    """

    def __init__(self, family, params, descriptor):
        self.family = family
        self.params = params
        self.descriptor = descriptor
        self.ellipticity_margin = self._compute_margin()

    # families -------------------------------------------------------------

    @classmethod
    def constant(cls, value=1.0):
        if value <= 0:
            raise ValueError("constant integrand must be positive")
        return cls("constant", {"value": float(value)}, f"constant:{value!r}")

    @classmethod
    def quadratic_form(cls, matrix):
        M = np.asarray(matrix, dtype=float)
        if M.shape != (3, 3) or not np.allclose(M, M.T, atol=1e-14):
            raise ValueError("matrix must be symmetric 3x3")
        if np.linalg.eigvalsh(M).min() <= 0:
            raise ValueError("matrix must be positive definite")
        desc = "quadratic:" + ",".join(f"{v!r}" for v in M.ravel())
        return cls("quadratic", {"M": M}, desc)

    @classmethod
    def fourier_perturbed(cls, base, amplitude, mode):
        """base + amplitude * (harmonic polynomial mode restricted to S^2).

        mode is an (l, m) pair naming a real spherical harmonic, or an
        explicit exponent->coefficient dict of one homogeneous degree.
        """
        if isinstance(mode, tuple) and len(mode) == 2 and mode in HARMONIC_POLYNOMIALS:
            poly = HomogeneousPolynomial(HARMONIC_POLYNOMIALS[mode])
            mdesc = f"lm{mode[0]},{mode[1]}"
        else:
            poly = HomogeneousPolynomial(mode)
            mdesc = ";".join(f"{k}:{v!r}" for k, v in sorted(poly.coeffs.items()))
        self = cls("fourier", {"base": float(base), "amplitude": float(amplitude),
                               "poly": poly},
                   f"fourier:{base!r},{amplitude!r},{mdesc}")
        sample = _dense_sample()
        if self.value(sample).min() <= 0:
            raise ValueError("perturbed integrand is not positive on the sphere")
        return self

    # 1-homogeneous extension ----------------------------------------------

    def fbar(self, x):
        pts, single = _as_points(x)
        r = np.linalg.norm(pts, axis=1)
        if self.family == "constant":
            out = self.params["value"] * r
        elif self.family == "quadratic":
            M = self.params["M"]
            out = np.sqrt(np.einsum("ni,ij,nj->n", pts, M, pts))
        else:
            p = self.params["poly"]
            k = 1 - p.degree
            out = self.params["base"] * r + self.params["amplitude"] * p.value(pts) * r ** k
        return out[0] if single else out

    def fbar_grad(self, x):
        pts, single = _as_points(x)
        r = np.linalg.norm(pts, axis=1)[:, None]
        if self.family == "constant":
            out = self.params["value"] * pts / r
        elif self.family == "quadratic":
            M = self.params["M"]
            s = np.sqrt(np.einsum("ni,ij,nj->n", pts, M, pts))[:, None]
            out = pts @ M / s
        else:
            p = self.params["poly"]
            k = 1 - p.degree
            a = self.params["amplitude"]
            pv = p.value(pts)[:, None]
            out = (self.params["base"] * pts / r
                   + a * (p.grad(pts) * r ** k + k * pv * pts * r ** (k - 2)))
        return out[0] if single else out

    def fbar_hess(self, x):
        pts, single = _as_points(x)
        r = np.linalg.norm(pts, axis=1)[:, None, None]
        eye = np.eye(3)[None]
        outer = pts[:, :, None] * pts[:, None, :]
        if self.family == "constant":
            out = self.params["value"] * (eye - outer / r[:, :, 0][..., None] ** 2) / r
        elif self.family == "quadratic":
            M = self.params["M"]
            s = np.sqrt(np.einsum("ni,ij,nj->n", pts, M, pts))[:, None, None]
            Mx = pts @ M
            out = M[None] / s - Mx[:, :, None] * Mx[:, None, :] / s ** 3
        else:
            p = self.params["poly"]
            k = 1 - p.degree
            a = self.params["amplitude"]
            pv = p.value(pts)[:, None, None]
            pg = p.grad(pts)
            cross = pg[:, :, None] * pts[:, None, :] + pts[:, :, None] * pg[:, None, :]
            out = (self.params["base"] * (eye - outer / r ** 2) / r
                   + a * (p.hess(pts) * r ** k
                          + k * cross * r ** (k - 2)
                          + k * pv * eye * r ** (k - 2)
                          + k * (k - 2) * pv * outer * r ** (k - 4)))
        return out[0] if single else out

    # derived quantities ----------------------------------------------------

    def value(self, nu):
        """F at unit directions (no unit check; use evaluate for the contract)."""
        return self.fbar(nu)

    def evaluate(self, nu):
        """F, intrinsic gradient DF and intrinsic Hessian D2F at a unit nu.

        DF is returned as a tangent 3-vector and D2F as an ambient 3x3
        matrix that annihilates nu (rows and columns tangent).
        """
        pts, single = _as_points(nu)
        r = np.linalg.norm(pts, axis=1)
        if np.any(np.abs(r - 1.0) > UNIT_TOL):
            raise ValueError("evaluate expects unit directions (|nu| = 1)")
        F = self.fbar(pts)
        DF = self.fbar_grad(pts) - F[:, None] * pts
        P = np.eye(3)[None] - pts[:, :, None] * pts[:, None, :]
        AF = self.anisotropy_ambient(pts)
        D2F = AF - F[:, None, None] * P
        if single:
            return F[0], DF[0], D2F[0]
        return F, DF, D2F

    def anisotropy_ambient(self, nu):
        """A_F(nu) as an ambient 3x3 matrix with nu in its kernel."""
        pts, single = _as_points(nu)
        H = self.fbar_hess(pts)
        # project out the numerically nonzero normal component; the exact
        # matrix is symmetric, so symmetrize away matmul round-off
        P = np.eye(3)[None] - pts[:, :, None] * pts[:, None, :]
        out = P @ H @ P
        out = 0.5 * (out + np.swapaxes(out, 1, 2))
        return out[0] if single else out

    def anisotropy(self, nu):
        """AnisotropyMatrix at a unit direction; raises if not positive definite."""
        pts, single = _as_points(nu)
        e1, e2 = tangent_frames(pts)
        A3 = self.anisotropy_ambient(pts)
        A = np.empty((len(pts), 2, 2))
        A[:, 0, 0] = np.einsum("ni,nij,nj->n", e1, A3, e1)
        A[:, 0, 1] = A[:, 1, 0] = np.einsum("ni,nij,nj->n", e1, A3, e2)
        A[:, 1, 1] = np.einsum("ni,nij,nj->n", e2, A3, e2)
        mins = np.linalg.eigvalsh(A)[:, 0]
        if np.any(mins <= 0):
            bad = pts[int(np.argmin(mins))]
            raise EllipticityError(f"A_F not positive definite at nu = {bad}")
        if single:
            return AnisotropyMatrix(pts[0], A[0], (e1[0], e2[0]), float(mins[0]))
        return [AnisotropyMatrix(pts[i], A[i], (e1[i], e2[i]), float(mins[i]))
                for i in range(len(pts))]

    def _compute_margin(self):
        sample = _dense_sample()
        A3 = self.anisotropy_ambient(sample)
        e1, e2 = tangent_frames(sample)
        A = np.empty((len(sample), 2, 2))
        A[:, 0, 0] = np.einsum("ni,nij,nj->n", e1, A3, e1)
        A[:, 0, 1] = A[:, 1, 0] = np.einsum("ni,nij,nj->n", e1, A3, e2)
        A[:, 1, 1] = np.einsum("ni,nij,nj->n", e2, A3, e2)
        return float(np.linalg.eigvalsh(A)[:, 0].min())

    @property
    def is_elliptic(self):
        return self.ellipticity_margin > 0


_SAMPLE_CACHE = {}


def _dense_sample(level=4):
    if level not in _SAMPLE_CACHE:
        _SAMPLE_CACHE[level] = spheremesh.build_sphere_mesh(level).vertices
    return _SAMPLE_CACHE[level]


class AnisotropyMatrix:
    """A_F at one direction: SPD form on the tangent plane of the sphere."""

    def __init__(self, base_point, matrix, frame, min_eigenvalue):
        self.base_point = base_point
        self.matrix = matrix
        self.frame = frame
        self.min_eigenvalue = min_eigenvalue


def gauge(integrand, x, n_newton=10):
    """Gauge function F* and its gradient at ambient points.

    F*(x) = sup over unit nu of <x, nu>/F(nu), located by a coarse
    icosphere sample followed by damped Newton ascent on the sphere.
    The envelope rule gives grad F*(x) = nu*/F(nu*) at the maximizer.
    """
    pts, single = _as_points(x)
    norms = np.linalg.norm(pts, axis=1)
    if np.any(norms == 0):
        raise ValueError("gauge is undefined at the origin")

    sample = _dense_sample()
    fs = integrand.value(sample)
    ratios = pts @ sample.T / fs[None, :]
    nu = sample[np.argmax(ratios, axis=1)].copy()

    for _ in range(n_newton):
        F = integrand.value(nu)
        gradF = integrand.fbar_grad(nu)
        DF = gradF - F[:, None] * nu
        A3 = integrand.anisotropy_ambient(nu)
        u = np.einsum("ni,ni->n", pts, nu)
        P = np.eye(3)[None] - nu[:, :, None] * nu[:, None, :]
        Du = np.einsum("nij,nj->ni", P, pts)
        e1, e2 = tangent_frames(nu)
        E = np.stack((e1, e2), axis=2)  # (n, 3, 2)

        def tang(v):
            return np.einsum("nik,ni->nk", E, v)

        Du2, DF2 = tang(Du), tang(DF)
        D2F = np.einsum("nik,nij,njl->nkl", E, A3, E)
        D2F -= F[:, None, None] * np.eye(2)[None]
        # derivatives of g = u/F on the sphere; Hess of a linear restriction
        # is -u * Id
        Dg = (F[:, None] * Du2 - u[:, None] * DF2) / F[:, None] ** 2
        D2g = (-u[:, None, None] * np.eye(2)[None] / F[:, None, None]
               - (Du2[:, :, None] * DF2[:, None, :]
                  + DF2[:, :, None] * Du2[:, None, :]) / F[:, None, None] ** 2
               - u[:, None, None] * D2F / F[:, None, None] ** 2
               + 2 * u[:, None, None] * DF2[:, :, None] * DF2[:, None, :]
               / F[:, None, None] ** 3)
        step = -np.linalg.solve(D2g, Dg[..., None])[..., 0]
        slen = np.linalg.norm(step, axis=1, keepdims=True)
        step = step * np.where(slen > 0.5, 0.5 / np.maximum(slen, 1e-300), 1.0)
        nu = nu + np.einsum("nik,nk->ni", E, step)
        nu /= np.linalg.norm(nu, axis=1, keepdims=True)

    F = integrand.value(nu)
    vals = np.einsum("ni,ni->n", pts, nu) / F
    grads = nu / F[:, None]
    if single:
        return float(vals[0]), grads[0]
    return vals, grads
