"""Quadrature on the unit sphere of the homogeneous norm.

The unit sphere of the homogeneous norm coincides with the Euclidean sphere
S^N in R^{N+1} (the defining equation at rho = 1 reads sum z_i^2 + t^2 = 1).
Two surface measures appear:

* the Euclidean surface measure dsigma, used for the boundary coefficient
  alpha_ij (a divergence-theorem term with Euclidean outward normal), and
* the polar measure omega(zeta) dsigma with omega(zeta) = sum_i a_i zeta_i^2
  + 2 t^2, the Jacobian weight of homogeneous polar coordinates
  z = delta_rho(zeta), dz = rho^{Q+1} omega(zeta) dsigma(zeta) drho.

The polar measure is the intrinsic surface measure of the homogeneous space;
kernel cancellation and the harmonic expansion live in L^2(omega dsigma).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import OperatorShape, dilate_many

__all__ = ["SphereRule", "sphere_rule", "kernel_rule", "polar_weight", "annulus_rule"]


def polar_weight(shape: OperatorShape, pts: np.ndarray) -> np.ndarray:
    """omega(zeta) = sum_i a_i zeta_i^2 + 2 t^2 on |zeta| = 1.

    The exponent vector a already ends with the entry 2 for t, so the
    weighted square sum over all N+1 coordinates is exactly omega.
    """
    return np.sum(shape.a * pts * pts, axis=-1)


@dataclass(frozen=True)
class SphereRule:
    """Product quadrature rule on S^N (supported N = 1, 2).

    ``pts`` has shape (n_nodes, N+1) in coordinates (x_1[, x_2], t);
    ``w_euclid`` integrates against the Euclidean surface measure and
    ``w_polar`` against the polar measure omega dsigma.
    """

    N: int
    pts: np.ndarray
    w_euclid: np.ndarray
    w_polar: np.ndarray
    n_polar: int
    n_azim: int
    kind: str = "full"

    def integrate(self, values: np.ndarray, measure: str = "polar") -> float:
        w = self.w_polar if measure == "polar" else self.w_euclid
        return float(np.sum(w * values))

    def refined(self, shape: OperatorShape, factor: int = 2) -> "SphereRule":
        builder = kernel_rule if self.kind == "kernel" else sphere_rule
        return builder(shape, self.n_polar * factor, self.n_azim * factor)


def sphere_rule(shape: OperatorShape, n_polar: int, n_azim: int | None = None) -> SphereRule:
    """Build the product rule: composite trapezoid on S^1, Gauss-Legendre
    (polar, axis = t) x trapezoid (azimuthal) on S^2."""
    N = shape.N
    if N == 1:
        n = n_azim if n_azim is not None else n_polar
        theta = 2.0 * np.pi * np.arange(n) / n
        pts = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        w = np.full(n, 2.0 * np.pi / n)
        return SphereRule(N=1, pts=pts, w_euclid=w,
                          w_polar=w * polar_weight(shape, pts),
                          n_polar=n, n_azim=n)
    if N == 2:
        if n_azim is None:
            n_azim = 2 * n_polar
        c, wc = np.polynomial.legendre.leggauss(n_polar)
        phi = 2.0 * np.pi * np.arange(n_azim) / n_azim
        wphi = 2.0 * np.pi / n_azim
        st = np.sqrt(1.0 - c ** 2)
        x1 = np.outer(st, np.cos(phi)).ravel()
        x2 = np.outer(st, np.sin(phi)).ravel()
        t = np.repeat(c, n_azim)
        pts = np.stack([x1, x2, t], axis=-1)
        w = np.repeat(wc, n_azim) * wphi
        return SphereRule(N=2, pts=pts, w_euclid=w,
                          w_polar=w * polar_weight(shape, pts),
                          n_polar=n_polar, n_azim=n_azim)
    raise NotImplementedError(f"sphere dimension N={N} not supported")


def kernel_rule(shape: OperatorShape, n_polar: int, n_azim: int | None = None,
                layer_pow: float = 1.5, gmin: float = 2e-3) -> SphereRule:
    """Sphere rule adapted to kernel-type integrands supported in {t > 0}.

    The second-derivative kernels on S^2 concentrate in a band around the
    x_2 = 0 great circle whose width shrinks like t^{3/2} as the band pinches
    into the points (+-1, 0, 0).  Polar nodes are Gauss-Legendre on t in
    [0, 1] (the integrand vanishes for t <= 0) and each polar ring gets
    azimuthal nodes clustered near phi in {0, pi} with clustering strength
    matched to the local layer width.  Only valid for integrands vanishing
    on {t <= 0}.
    """
    N = shape.N
    if N == 1:
        n = n_azim if n_azim is not None else n_polar
        return replace(sphere_rule(shape, n), kind="kernel")
    if N != 2:
        raise NotImplementedError(f"sphere dimension N={N} not supported")
    if n_azim is None:
        n_azim = 2 * n_polar
    u, wu = np.polynomial.legendre.leggauss(n_polar)
    c = 0.5 * (u + 1.0)
    wc = 0.5 * wu
    psi = 2.0 * np.pi * np.arange(n_azim) / n_azim
    g = np.clip(c ** layer_pow, gmin, 1.0)
    phi = psi[None, :] - (1.0 - g[:, None]) / 2.0 * np.sin(2.0 * psi)[None, :]
    jac = 1.0 - (1.0 - g[:, None]) * np.cos(2.0 * psi)[None, :]
    st = np.sqrt(1.0 - c ** 2)
    pts = np.stack([st[:, None] * np.cos(phi), st[:, None] * np.sin(phi),
                    np.broadcast_to(c[:, None], phi.shape)], axis=-1).reshape(-1, 3)
    w = (wc[:, None] * (2.0 * np.pi / n_azim) * jac).ravel()
    return SphereRule(N=2, pts=pts, w_euclid=w,
                      w_polar=w * polar_weight(shape, pts),
                      n_polar=n_polar, n_azim=n_azim, kind="kernel")


def annulus_rule(shape: OperatorShape, srule: SphereRule, a: float, b: float,
                 n_radial: int = 40):
    """Nodes and weights for int_{a < ||z|| < b} f(z) dz in homogeneous polar
    coordinates: z = delta_rho(zeta), dz = rho^{Q+1} omega(zeta) dsigma drho."""
    if not 0.0 < a < b:
        raise ValueError("need 0 < a < b")
    u, wu = np.polynomial.legendre.leggauss(n_radial)
    rho = 0.5 * (b - a) * u + 0.5 * (b + a)
    wr = 0.5 * (b - a) * wu
    pts = dilate_many(shape, rho[:, None], srule.pts[None, :, :])
    w = (wr * rho ** (shape.Q + 1))[:, None] * srule.w_polar[None, :]
    return pts.reshape(-1, shape.N + 1), w.ravel()
