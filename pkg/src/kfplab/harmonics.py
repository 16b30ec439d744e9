"""Sphere basis and harmonic expansion of the second-derivative kernels.

The basis is the degree-graded orthonormalization of classical real spherical
harmonics against the polar surface measure omega dsigma (the intrinsic
surface measure of the homogeneous space; see spheres.py).  Orthonormalizing
in increasing degree keeps the per-degree dimension g_m and makes every
basis element of positive degree orthogonal to constants, which is exactly
the cancellation each homogeneous kernel

    K_km(z) = Y_km(z') / ||z||^{Q+2},        z' = delta_{1/||z||} z

needs for its principal value to exist term by term.

Index convention: columns are ordered by degree m = 0, 1, ..., m_max and
within a degree by k = 1, ..., g_m.  For the circle, k = 1 is the cosine-type
and k = 2 the sine-type element; on S^2 (polar axis = t, azimuth in the
(x_1, x_2) plane) k runs over the classical order index o = k - m - 1 from
-m to m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PoleError, QuadratureError
from .geometry import OperatorShape, compose_many, dilate_many, hom_norm_many, invert_many
from .kernels import FrozenCoefficients, covariance_poly, gamma_many
from .spheres import SphereRule, kernel_rule, sphere_rule

__all__ = [
    "basis_dim",
    "SphereBasis",
    "build_basis",
    "KernelExpansion",
    "expand_coeffs",
    "eval_K",
    "decay_slope",
    "reconstruction_error",
    "hormander_probe",
]


def basis_dim(N: int, m: int) -> int:
    """Dimension g_m of the degree-m spherical harmonics on S^N."""
    if m < 0:
        raise ValueError("degree must be nonnegative")
    if m == 0:
        return 1
    return math.comb(m + N, N) - math.comb(m + N - 2, N)


def _classical_circle(pts: np.ndarray, m_max: int) -> np.ndarray:
    theta = np.arctan2(pts[..., 1], pts[..., 0])
    cols = [np.full(theta.shape, (2.0 * np.pi) ** -0.5)]
    for m in range(1, m_max + 1):
        cols.append(np.cos(m * theta) / np.sqrt(np.pi))
        cols.append(np.sin(m * theta) / np.sqrt(np.pi))
    return np.stack(cols, axis=-1)


def _classical_s2(pts: np.ndarray, m_max: int) -> np.ndarray:
    """Real harmonics, polar axis = t, Euclidean-orthonormal normalization.

    All associated Legendre functions P_l^o(c) for l <= m_max are generated
    by the standard diagonal/vertical recurrences in one vectorized pass
    (this sits under the pairwise kernel tables; scipy.special.lpmv per
    column is an order of magnitude slower).  Condon-Shortley phase matches
    lpmv.
    """
    pts = np.asarray(pts, dtype=float)
    lead = pts.shape[:-1]
    flat = pts.reshape(-1, pts.shape[-1])
    c = np.clip(flat[:, 2], -1.0, 1.0)
    s = np.sqrt(np.maximum(0.0, 1.0 - c * c))
    x1 = flat[:, 0]
    x2 = flat[:, 1]
    # azimuthal factors by the angle-addition recurrence on (cos phi, sin phi)
    r = np.maximum(np.sqrt(x1 * x1 + x2 * x2), 1e-300)
    cphi, sphi = x1 / r, x2 / r
    n = len(flat)
    P = {}
    P[(0, 0)] = np.ones(n)
    for o in range(1, m_max + 1):
        P[(o, o)] = -(2 * o - 1) * s * P[(o - 1, o - 1)]
    for o in range(0, m_max):
        P[(o + 1, o)] = (2 * o + 1) * c * P[(o, o)]
    for o in range(0, m_max + 1):
        for l in range(o + 2, m_max + 1):
            P[(l, o)] = ((2 * l - 1) * c * P[(l - 1, o)]
                         - (l + o - 1) * P[(l - 2, o)]) / (l - o)
    cos_o = [np.ones(n), cphi]
    sin_o = [np.zeros(n), sphi]
    for o in range(2, m_max + 1):
        cos_o.append(cphi * cos_o[o - 1] - sphi * sin_o[o - 1])
        sin_o.append(sphi * cos_o[o - 1] + cphi * sin_o[o - 1])
    cols = np.empty((n, sum(2 * l + 1 for l in range(m_max + 1))))
    idx = 0
    for l in range(m_max + 1):
        for o in range(-l, l + 1):
            oo = abs(o)
            norm = math.sqrt((2 * l + 1) / (4.0 * np.pi)
                             * math.factorial(l - oo) / math.factorial(l + oo))
            base = P[(l, oo)]
            if o > 0:
                cols[:, idx] = (math.sqrt(2.0) * norm) * base * cos_o[oo]
            elif o < 0:
                cols[:, idx] = (math.sqrt(2.0) * norm) * base * sin_o[oo]
            else:
                cols[:, idx] = norm * base
            idx += 1
    return cols.reshape(lead + (cols.shape[-1],))


@dataclass(frozen=True)
class SphereBasis:
    """Orthonormal basis of sphere functions graded by harmonic degree."""

    shape: OperatorShape
    N: int
    m_max: int
    transform: np.ndarray   # classical @ transform = orthonormal basis
    offsets: np.ndarray     # column offset of each degree
    gram_rule: SphereRule

    @property
    def n_columns(self) -> int:
        return int(self.offsets[-1])

    def column(self, m: int, k: int) -> int:
        if not (0 <= m <= self.m_max and 1 <= k <= basis_dim(self.N, m)):
            raise ValueError(f"no basis element (k={k}, m={m})")
        return int(self.offsets[m]) + k - 1

    def eval_classical(self, pts: np.ndarray) -> np.ndarray:
        f = _classical_circle if self.N == 1 else _classical_s2
        return f(np.asarray(pts, dtype=float), self.m_max)

    def eval_classical_upto(self, pts: np.ndarray, m: int) -> np.ndarray:
        f = _classical_circle if self.N == 1 else _classical_s2
        return f(np.asarray(pts, dtype=float), m)

    def eval(self, pts: np.ndarray) -> np.ndarray:
        """All basis columns at unit vectors ``pts``; shape (..., n_columns)."""
        return self.eval_classical(pts) @ self.transform

    def eval_one(self, m: int, k: int, pts: np.ndarray) -> np.ndarray:
        col = self.column(m, k)
        # triangular transform: only classical columns up to this degree enter
        hi = int(self.offsets[m + 1]) if m < self.m_max else self.n_columns
        f = _classical_circle if self.N == 1 else _classical_s2
        return f(np.asarray(pts, dtype=float), m) @ self.transform[:hi, col]

    def sup_norms(self, n_probe: int = 20000, seed: int = 0) -> np.ndarray:
        """Empirical sup |Y_km| per column over a dense sphere sample."""
        rng = np.random.default_rng(seed)
        v = rng.normal(size=(n_probe, self.N + 1))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return np.max(np.abs(self.eval(v)), axis=0)


def build_basis(shape: OperatorShape, m_max: int) -> SphereBasis:
    """Orthonormalize classical harmonics degree by degree against the polar
    measure, via Cholesky of the weighted Gram matrix (condition number is
    bounded by max omega / min omega, so this is stable)."""
    N = shape.N
    rule = sphere_rule(shape, 2 * (m_max + 2), 4 * (m_max + 2))
    Y = _classical_circle(rule.pts, m_max) if N == 1 else _classical_s2(rule.pts, m_max)
    G = Y.T @ (rule.w_polar[:, None] * Y)
    L = np.linalg.cholesky(G)
    transform = np.linalg.inv(L).T  # upper triangular in the degree grading
    dims = [basis_dim(N, m) for m in range(m_max + 1)]
    offsets = np.concatenate([[0], np.cumsum(dims)])
    return SphereBasis(shape=shape, N=N, m_max=m_max, transform=transform,
                       offsets=offsets, gram_rule=rule)


@dataclass(frozen=True)
class KernelExpansion:
    """Expansion data of Gamma_ij on the unit sphere."""

    i: int
    j: int
    m_max: int
    coeffs: np.ndarray
    basis: SphereBasis
    tail_estimate: float

    def coeff(self, m: int, k: int) -> float:
        return float(self.coeffs[self.basis.column(m, k)])

    def max_per_degree(self) -> np.ndarray:
        out = np.empty(self.m_max + 1)
        for m in range(self.m_max + 1):
            lo, hi = self.basis.offsets[m], self.basis.offsets[m + 1]
            out[m] = np.max(np.abs(self.coeffs[lo:hi]))
        return out


def expand_coeffs(shape: OperatorShape, frozen: FrozenCoefficients, i: int, j: int,
                  m_max: int, basis: SphereBasis | None = None,
                  rule: SphereRule | None = None,
                  check_tol: float | None = None) -> KernelExpansion:
    """Coefficients c_ij^{km} = int Gamma_ij Y_km omega dsigma by quadrature.

    The coefficient rule is the layer-adapted kernel rule (the Gram rule of
    the basis is far too coarse for the boundary-layer structure of the
    Kolmogorov kernels).  ``check_tol`` triggers a refinement cross-check.
    """
    if m_max < 2:
        raise ValueError("m_max must be at least 2")
    if not (0 <= i < shape.s[0] and 0 <= j < shape.s[0]):
        raise ValueError("kernel indices must lie in the diffusion block")
    basis = basis if basis is not None else build_basis(shape, m_max)
    if basis.m_max < m_max:
        raise ValueError("basis degree too small for requested m_max")
    rule = rule if rule is not None else (
        kernel_rule(shape, 2048) if shape.N == 1 else kernel_rule(shape, 256, 384))
    cov = covariance_poly(shape, frozen)

    def coeffs_on(r: SphereRule) -> np.ndarray:
        hess = gamma_many(shape, frozen, r.pts, order="hess", cov=cov)
        Y = basis.eval(r.pts)
        return Y.T @ (r.w_polar * hess[:, i, j])

    c = coeffs_on(rule)
    if check_tol is not None:
        c2 = coeffs_on(rule.refined(shape))
        gap = float(np.max(np.abs(c - c2)))
        if gap > check_tol:
            raise QuadratureError(f"expansion coefficients not converged: {gap}")
        c = c2
    c = c[:basis.offsets[m_max + 1]]
    lo = basis.offsets[m_max - 1]
    tail = float(np.max(np.abs(c[lo:])))
    return KernelExpansion(i=i, j=j, m_max=m_max, coeffs=c, basis=basis,
                           tail_estimate=tail)


def eval_K(basis: SphereBasis, shape: OperatorShape, m: int, k: int,
           z: np.ndarray) -> np.ndarray:
    """Homogeneous kernel K_km(z) = Y_km(z') / ||z||^{Q+2}."""
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    pts = z[None, :] if single else z
    rho = hom_norm_many(shape, pts)
    if np.any(rho == 0.0):
        raise PoleError("K_km evaluated at the origin")
    zp = dilate_many(shape, 1.0 / rho, pts)
    out = basis.eval_one(m, k, zp) * rho ** -(shape.Q + 2.0)
    return out[0] if single else out


def decay_slope(expansion: KernelExpansion, m_lo: int = 4, m_hi: int = 16) -> float:
    """Log-log slope of max_k |c^{km}| against m over [m_lo, m_hi]."""
    m_hi = min(m_hi, expansion.m_max)
    mx = expansion.max_per_degree()
    ms = np.arange(m_lo, m_hi + 1)
    vals = np.maximum(mx[m_lo:m_hi + 1], 1e-300)
    slope = np.polyfit(np.log(ms), np.log(vals), 1)[0]
    return float(slope)


def reconstruction_error(shape: OperatorShape, frozen: FrozenCoefficients,
                         expansion: KernelExpansion, m_values=None,
                         n_probe: int = 4000, seed: int = 0) -> dict:
    """Sup error of the truncated series against Gamma_ij on the sphere."""
    basis = expansion.basis
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n_probe, shape.N + 1))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    target = gamma_many(shape, frozen, v, order="hess",
                        cov=covariance_poly(shape, frozen))[:, expansion.i, expansion.j]
    Y = basis.eval(v)
    m_values = m_values if m_values is not None else list(range(1, expansion.m_max + 1))
    errs = {}
    for m in m_values:
        hi = basis.offsets[m + 1]
        approx = Y[:, :hi] @ expansion.coeffs[:hi]
        errs[m] = float(np.max(np.abs(approx - target)))
    return errs


def write_coeff_table(expansion: KernelExpansion, path) -> None:
    """Golden CSV of expansion coefficients: one row per (m, k)."""
    import csv
    from pathlib import Path
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    basis = expansion.basis
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "k", "coeff"])
        for m in range(expansion.m_max + 1):
            for k in range(1, basis_dim(basis.N, m) + 1):
                writer.writerow([m, k, f"{expansion.coeff(m, k):.17g}"])


def check_coeff_table(expansion: KernelExpansion, path, atol: float = 1e-8) -> None:
    """Recompute-and-compare regression check against a committed table."""
    import csv
    from .errors import GoldenMismatch
    with open(path) as fh:
        for row in csv.DictReader(fh):
            m, k, ref = int(row["m"]), int(row["k"]), float(row["coeff"])
            got = expansion.coeff(m, k)
            if abs(got - ref) > atol:
                raise GoldenMismatch(
                    f"{path}: coefficient (m={m}, k={k}): {got} != {ref}")


def hormander_probe(basis: SphereBasis, shape: OperatorShape, m_values,
                    beta: float, M: float = 2.0, n_samples: int = 400,
                    seed: int = 0) -> dict:
    """Empirical continuity constant of K_km: sup over admissible triples of
    |K(zeta^{-1} o eta) - K(z^{-1} o eta)| ||eta^{-1} o z||^{Q+2+beta}
    / ||zeta^{-1} o z||^beta, per degree, with max over k."""
    rng = np.random.default_rng(seed)
    z_list, zeta_list, eta_list, dz_list, de_list = [], [], [], [], []
    n = 0
    while n < n_samples:
        batch = 6 * n_samples
        z = rng.uniform(-2, 2, size=(batch, shape.N + 1))
        eta = rng.uniform(-2, 2, size=(batch, shape.N + 1))
        scale = 10.0 ** rng.uniform(-2.5, -0.3, size=(batch, 1))
        zeta = z + scale * rng.uniform(-1, 1, size=(batch, shape.N + 1))
        d_zz = hom_norm_many(shape, compose_many(shape, invert_many(shape, zeta), z))
        d_ez = hom_norm_many(shape, compose_many(shape, invert_many(shape, eta), z))
        ok = (d_ez >= M * d_zz) & (d_zz > 1e-8)
        for buf, arr in ((z_list, z[ok]), (zeta_list, zeta[ok]), (eta_list, eta[ok]),
                         (dz_list, d_zz[ok]), (de_list, d_ez[ok])):
            buf.append(arr)
        n += int(ok.sum())
    z = np.concatenate(z_list)[:n_samples]
    zeta = np.concatenate(zeta_list)[:n_samples]
    eta = np.concatenate(eta_list)[:n_samples]
    d_zz = np.concatenate(dz_list)[:n_samples]
    d_ez = np.concatenate(de_list)[:n_samples]
    w1 = compose_many(shape, invert_many(shape, zeta), eta)
    w2 = compose_many(shape, invert_many(shape, z), eta)
    weight = d_ez ** (shape.Q + 2.0 + beta) / d_zz ** beta
    sup_per_m = {}
    for m in m_values:
        best = 0.0
        for k in range(1, basis_dim(shape.N, m) + 1):
            diff = np.abs(eval_K(basis, shape, m, k, w1) - eval_K(basis, shape, m, k, w2))
            best = max(best, float(np.max(diff * weight)))
        sup_per_m[m] = best
    ms = np.array(sorted(sup_per_m))
    vals = np.array([sup_per_m[m] for m in ms])
    slope = float(np.polyfit(np.log(ms), np.log(vals), 1)[0]) if len(ms) >= 2 else 0.0
    return {"sup_per_m": sup_per_m, "slope": slope, "beta": beta, "M": M}
