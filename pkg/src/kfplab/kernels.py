"""Frozen fundamental solution, its derivatives, and the boundary coefficient.

For coefficients frozen at a point, the constant-coefficient operator has the
explicit Gaussian fundamental solution

    Gamma0(x, t) = (4 pi)^{-N/2} det C(t)^{-1/2} exp(-<C(t)^{-1} x, x>/4),

supported in {t > 0}, where C(t) is the matrix polynomial obtained by
integrating F(s) A0 F(s)^T from 0 to t with F(s) = exp(-s B^T) and A0 the
diffusion block embedded in an N x N matrix.  All derivative formulas are
analytic; finite differences appear only in independent residual probes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, EllipticityError, GoldenMismatch, QuadratureError
from .geometry import OperatorShape, compose_many, dilate_many, invert_many
from .spheres import SphereRule, annulus_rule, kernel_rule, sphere_rule

__all__ = [
    "FrozenCoefficients",
    "frozen_identity",
    "default_kernel_rule",
    "CovariancePolynomial",
    "covariance_poly",
    "gamma_eval",
    "gamma_many",
    "kernel_with_pole",
    "alpha_coeff",
    "cancellation_check",
    "sphere_mean",
    "pde_residual_probe",
    "growth_bound_check",
    "sphere_smoothness_probe",
    "write_golden_table",
    "check_golden_table",
    "golden_sample_points",
]


@dataclass(frozen=True)
class FrozenCoefficients:
    """Diffusion matrix frozen at a point, with its ellipticity constant."""

    z0: np.ndarray
    A: np.ndarray
    lam: float

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise EllipticityError("A must be a square matrix")
        if not np.allclose(A, A.T, atol=1e-14):
            raise EllipticityError("A must be symmetric")
        ev = np.linalg.eigvalsh(A)
        if ev.min() < 1.0 / self.lam - 1e-12 or ev.max() > self.lam + 1e-12:
            raise EllipticityError(
                f"eigenvalues {ev} outside [{1.0 / self.lam}, {self.lam}]")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "z0", np.asarray(self.z0, dtype=float))


def frozen_identity(shape: OperatorShape, lam: float = 1.0) -> FrozenCoefficients:
    return FrozenCoefficients(z0=np.zeros(shape.N + 1), A=np.eye(shape.s[0]), lam=lam)


def default_kernel_rule(shape: OperatorShape) -> SphereRule:
    """Criterion-grade rule for kernel-type sphere integrals per dimension."""
    return kernel_rule(shape, 2048) if shape.N == 1 else kernel_rule(shape, 256, 384)


@dataclass(frozen=True)
class CovariancePolynomial:
    """C(t) as exact polynomial coefficients, coeffs[i, j, k] multiplying t^k."""

    coeffs: np.ndarray

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        powers = t[..., None] ** np.arange(self.coeffs.shape[-1])
        return np.einsum("ijk,...k->...ij", self.coeffs, powers)

    def det(self, t) -> np.ndarray:
        return np.linalg.det(self(t))


def covariance_poly(shape: OperatorShape, frozen: FrozenCoefficients) -> CovariancePolynomial:
    """Exact antiderivative of the polynomial integrand F(s) A0 F(s)^T."""
    N, s0 = shape.N, shape.s[0]
    if frozen.A.shape != (s0, s0):
        raise EllipticityError(f"A must be {s0}x{s0} for this shape")
    A0 = np.zeros((N, N))
    A0[:s0, :s0] = frozen.A
    powers = shape.bt_powers()
    deg = shape.d
    # F(s) entries as polynomials in s: Fpol[..., k] multiplies s^k
    Fpol = np.zeros((N, N, deg + 1))
    for j, P in enumerate(powers):
        Fpol[:, :, j] = P * ((-1.0) ** j / math.factorial(j))
    # integrand G(s) = F A0 F^T, degree <= 2 d
    G = np.zeros((N, N, 2 * deg + 1))
    for p in range(deg + 1):
        for q in range(deg + 1):
            G[:, :, p + q] += Fpol[:, :, p] @ A0 @ Fpol[:, :, q].T
    # antiderivative with zero constant term
    C = np.zeros((N, N, 2 * deg + 2))
    for k in range(2 * deg + 1):
        C[:, :, k + 1] = G[:, :, k] / (k + 1)
    return CovariancePolynomial(coeffs=C)


def _inv_and_det(C: np.ndarray):
    """Batched inverse and determinant of SPD matrices of size <= 4."""
    n = C.shape[-1]
    if n == 1:
        d = C[..., 0, 0]
        inv = (1.0 / d)[..., None, None]
        return inv, d
    if n == 2:
        a, b, c = C[..., 0, 0], C[..., 0, 1], C[..., 1, 1]
        d = a * c - b * b
        inv = np.empty_like(C)
        inv[..., 0, 0] = c / d
        inv[..., 1, 1] = a / d
        inv[..., 0, 1] = inv[..., 1, 0] = -b / d
        return inv, d
    return np.linalg.inv(C), np.linalg.det(C)


def gamma_many(shape: OperatorShape, frozen: FrozenCoefficients, pts: np.ndarray,
               order: str = "value", cov: CovariancePolynomial | None = None,
               pole_resolution: float = 0.0):
    """Batched Gamma0, its spatial gradient, or its spatial Hessian.

    Returns zeros for t <= 0 (causal support).  ``order`` is one of
    "value" (n,), "grad" (n, N), "hess" (n, N, N).
    """
    pts = np.asarray(pts, dtype=float)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    N = shape.N
    x, t = pts[:, :N], pts[:, N]
    if order == "hess" and pole_resolution > 0.0:
        r = np.sqrt(np.sum(pts * pts, axis=1))
        bad = (t == 0.0) & (r > 0.0) & (r < pole_resolution)
        if np.any(bad):
            raise DomainError("second derivatives requested within pole resolution")
    cov = cov if cov is not None else covariance_poly(shape, frozen)
    pos = t > 0.0
    shape_out = {"value": (len(pts),), "grad": (len(pts), N),
                 "hess": (len(pts), N, N)}[order]
    out = np.zeros(shape_out)
    if np.any(pos):
        C = cov(t[pos])
        Cinv, detC = _inv_and_det(C)
        if np.any(detC <= 0.0):
            raise DomainError("covariance matrix not positive definite in range")
        xp = x[pos]
        y = np.einsum("nij,nj->ni", Cinv, xp)
        g0 = (4.0 * np.pi) ** (-N / 2.0) * detC ** -0.5 * np.exp(
            -0.25 * np.einsum("ni,ni->n", y, xp))
        if order == "value":
            out[pos] = g0
        elif order == "grad":
            out[pos] = -0.5 * y * g0[:, None]
        elif order == "hess":
            out[pos] = (-0.5 * Cinv + 0.25 * y[:, :, None] * y[:, None, :]) * g0[:, None, None]
        else:
            raise ValueError(f"unknown order {order!r}")
    return out[0] if single else out


def gamma_eval(shape: OperatorShape, frozen: FrozenCoefficients, z,
               order: str = "value", **kw):
    """Single-point convenience wrapper around gamma_many."""
    return gamma_many(shape, frozen, np.asarray(z, dtype=float), order=order, **kw)


def kernel_with_pole(shape: OperatorShape, frozen: FrozenCoefficients, z, zeta,
                     order: str = "value", cov=None):
    """Gamma(z; zeta) = Gamma0(zeta^{-1} o z) and its derivatives in z.

    The group coordinate enters the first slot with identity coefficient, so
    derivatives in z coincide with derivatives of Gamma0 at the group point.
    """
    z = np.atleast_2d(np.asarray(z, dtype=float))
    zeta = np.atleast_2d(np.asarray(zeta, dtype=float))
    w = compose_many(shape, invert_many(shape, zeta), z)  # zeta^{-1} o z
    return gamma_many(shape, frozen, w, order=order, cov=cov)


def alpha_coeff(shape: OperatorShape, frozen: FrozenCoefficients, i: int, j: int,
                rule: SphereRule | None = None, tol: float = 1e-6) -> float:
    """Boundary coefficient alpha_ij = int_{S^N} Gamma_j(zeta) nu_i dsigma(zeta).

    Euclidean surface measure and outward normal nu = zeta.  The value is
    cross-checked on a refined rule; disagreement beyond ``tol`` raises
    QuadratureError.
    """
    if not (0 <= i < shape.s[0] and 0 <= j < shape.s[0]):
        raise ValueError("alpha indices must lie in the diffusion block")
    rule = rule or default_kernel_rule(shape)
    cov = covariance_poly(shape, frozen)

    def value(r: SphereRule) -> float:
        grad = gamma_many(shape, frozen, r.pts, order="grad", cov=cov)
        return r.integrate(grad[:, j] * r.pts[:, i], measure="euclid")

    coarse = value(rule)
    fine = value(rule.refined(shape))
    if abs(fine - coarse) > tol:
        raise QuadratureError(
            f"alpha quadrature not converged: |{fine} - {coarse}| > {tol}")
    return fine


def cancellation_check(shape: OperatorShape, frozen: FrozenCoefficients, i: int,
                       j: int, a: float, b: float, rule: SphereRule | None = None,
                       n_radial: int = 40) -> float:
    """Annulus integral int_{a < ||z|| < b} Gamma_ij(z) dz (should vanish)."""
    rule = rule or default_kernel_rule(shape)
    cov = covariance_poly(shape, frozen)
    pts, w = annulus_rule(shape, rule, a, b, n_radial=n_radial)
    hess = gamma_many(shape, frozen, pts, order="hess", cov=cov)
    return float(np.sum(w * hess[:, i, j]))


def sphere_mean(shape: OperatorShape, frozen: FrozenCoefficients, i: int, j: int,
                rule: SphereRule | None = None, measure: str = "polar") -> float:
    """Mean of Gamma_ij over the unit sphere against the chosen measure."""
    rule = rule or default_kernel_rule(shape)
    hess = gamma_many(shape, frozen, rule.pts, order="hess",
                      cov=covariance_poly(shape, frozen))
    return rule.integrate(hess[:, i, j], measure=measure)


def apply_frozen_operator_fd(shape: OperatorShape, frozen: FrozenCoefficients,
                             pts: np.ndarray, h: float,
                             cov: CovariancePolynomial | None = None) -> np.ndarray:
    """Frozen operator applied to Gamma0 by centered finite differences of
    analytic values: sum a_kl d_kl + sum b_ij x_i d_j - d_t."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    cov = cov if cov is not None else covariance_poly(shape, frozen)
    N, s0 = shape.N, shape.s[0]

    def val(q):
        return gamma_many(shape, frozen, q, order="value", cov=cov)

    base = val(pts)
    res = np.zeros(len(pts))
    e = np.eye(N + 1)
    # diffusion block: centered second differences, mixed by 4-point stencil
    for k in range(s0):
        for l in range(s0):
            akl = frozen.A[k, l]
            if akl == 0.0:
                continue
            if k == l:
                d2 = (val(pts + h * e[k]) - 2.0 * base + val(pts - h * e[k])) / h ** 2
            else:
                d2 = (val(pts + h * (e[k] + e[l])) - val(pts + h * (e[k] - e[l]))
                      - val(pts - h * (e[k] - e[l])) + val(pts - h * (e[k] + e[l]))) / (4.0 * h ** 2)
            res += akl * d2
    # drift sum b_ij x_i d_j and time derivative
    for jj in range(N):
        coef = pts[:, :N] @ shape.B[:, jj]
        if np.any(coef != 0.0):
            dj = (val(pts + h * e[jj]) - val(pts - h * e[jj])) / (2.0 * h)
            res += coef * dj
    res -= (val(pts + h * e[N]) - val(pts - h * e[N])) / (2.0 * h)
    return res


def pde_residual_probe(shape: OperatorShape, frozen: FrozenCoefficients,
                       sample_points: np.ndarray, h: float = 1e-3) -> dict:
    """Max |L0 Gamma0| over samples by finite differences, with the O(h^2)
    refinement ratio."""
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    cov = covariance_poly(shape, frozen)
    r_h = np.max(np.abs(apply_frozen_operator_fd(shape, frozen, pts, h, cov)))
    r_h2 = np.max(np.abs(apply_frozen_operator_fd(shape, frozen, pts, h / 2.0, cov)))
    hess = gamma_many(shape, frozen, pts, order="hess", cov=cov)
    scale = float(np.max(np.abs(hess)))
    return {"residual": float(r_h), "residual_half_h": float(r_h2),
            "ratio": float(r_h / r_h2) if r_h2 > 0 else float("inf"),
            "hess_scale": scale, "h": h}


def growth_bound_check(shape: OperatorShape, frozen: FrozenCoefficients,
                       i: int, j: int, rule: SphereRule | None = None,
                       n_rho: int = 25, seed: int = 0) -> dict:
    """Compare sup |Gamma_ij(z)| ||z||^{Q+a_i+a_j} over log-spaced shells with
    the unit-sphere sup (equal by homogeneity)."""
    rule = rule or sphere_rule(shape, 32, 64)
    cov = covariance_poly(shape, frozen)
    rng = np.random.default_rng(seed)
    sub = rng.choice(len(rule.pts), size=min(200, len(rule.pts)), replace=False)
    zeta = rule.pts[sub]
    deg = shape.Q + shape.a[i] + shape.a[j]
    sup_shells = 0.0
    for rho in np.logspace(-2, 2, n_rho):
        pts = dilate_many(shape, rho, zeta)
        hess = gamma_many(shape, frozen, pts, order="hess", cov=cov)
        sup_shells = max(sup_shells, float(np.max(np.abs(hess[:, i, j])) * rho ** deg))
    hess1 = gamma_many(shape, frozen, zeta, order="hess", cov=cov)
    sup_sphere = float(np.max(np.abs(hess1[:, i, j])))
    return {"sup_shells": sup_shells, "sup_sphere": sup_sphere,
            "rel_gap": abs(sup_shells - sup_sphere) / sup_sphere}


def sphere_smoothness_probe(shape: OperatorShape, frozen: FrozenCoefficients,
                            i: int, j: int, order: int = 4, n: int = 720) -> float:
    """Bound on tangential derivatives of Gamma_ij along a great circle on the
    unit sphere, by high-order centered differences in the angle."""
    cov = covariance_poly(shape, frozen)
    theta = 2.0 * np.pi * np.arange(n) / n
    if shape.N == 1:
        pts = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    else:
        # great circle through the x_1 and t axes
        pts = np.zeros((n, shape.N + 1))
        pts[:, 0] = np.cos(theta)
        pts[:, -1] = np.sin(theta)
    vals = gamma_many(shape, frozen, pts, order="hess", cov=cov)[:, i, j]
    d = vals
    h = 2.0 * np.pi / n
    for _ in range(order):
        d = (np.roll(d, -1) - np.roll(d, 1)) / (2.0 * h)
    return float(np.max(np.abs(d)))


# golden tables ---------------------------------------------------------------

def golden_sample_points(shape: OperatorShape) -> np.ndarray:
    """Fixed deterministic sample set per shape (includes a t < 0 point)."""
    rng = np.random.default_rng(1234 + shape.N)
    pts = rng.uniform(-1.5, 1.5, size=(12, shape.N + 1))
    pts[:, -1] = np.abs(pts[:, -1]) + 0.15
    pts[-1, -1] = -0.5
    return pts


def _golden_rows(shape: OperatorShape, frozen: FrozenCoefficients):
    pts = golden_sample_points(shape)
    cov = covariance_poly(shape, frozen)
    val = gamma_many(shape, frozen, pts, order="value", cov=cov)
    grad = gamma_many(shape, frozen, pts, order="grad", cov=cov)
    hess = gamma_many(shape, frozen, pts, order="hess", cov=cov)
    s0 = shape.s[0]
    rows = []
    for n, z in enumerate(pts):
        row = {f"z{k}": z[k] for k in range(shape.N + 1)}
        row["gamma"] = val[n]
        for k in range(shape.N):
            row[f"gamma_{k + 1}"] = grad[n, k]
        for ii in range(s0):
            for jj in range(s0):
                row[f"gamma_{ii + 1}{jj + 1}"] = hess[n, ii, jj]
        rows.append(row)
    return rows


def write_golden_table(shape: OperatorShape, frozen: FrozenCoefficients,
                       path: Path) -> None:
    rows = _golden_rows(shape, frozen)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: f"{v:.17g}" for k, v in row.items()})


def check_golden_table(shape: OperatorShape, frozen: FrozenCoefficients,
                       path: Path, rtol: float = 1e-10) -> None:
    """Recompute the table and compare with the committed file."""
    rows = _golden_rows(shape, frozen)
    with Path(path).open() as fh:
        stored = list(csv.DictReader(fh))
    if len(stored) != len(rows):
        raise GoldenMismatch(f"{path}: row count {len(stored)} != {len(rows)}")
    for n, (got, want) in enumerate(zip(rows, stored)):
        for key, v in got.items():
            ref = float(want[key])
            if abs(v - ref) > rtol * max(1.0, abs(ref)):
                raise GoldenMismatch(
                    f"{Path(path).name}: row {n} column {key}: {v} != {ref}")
