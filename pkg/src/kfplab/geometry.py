"""Intrinsic geometry of the operator class: translations, dilations, norms.

A shape is the structural data (block sizes, drift matrix, homogeneity
exponents) of one operator.  All group and metric operations act on points
of R^{N+1} stored as flat arrays ``(x_1, ..., x_N, t)``; batch variants take
arrays whose last axis has length N+1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, ToleranceError

__all__ = [
    "OperatorShape",
    "Point",
    "validate_shape",
    "parabolic_shape",
    "kolmogorov_shape",
    "translation_matrix",
    "group_op",
    "compose_many",
    "invert_many",
    "dilate",
    "dilate_many",
    "hom_norm",
    "hom_norm_many",
    "quasi_distance",
    "quasi_distance_many",
    "order_beta_probe",
    "ball_volume_mc",
]

_BISECT_ITERS = 54


@dataclass(frozen=True)
class Point:
    """A point z = (x, t) of R^{N+1}."""

    x: np.ndarray
    t: float

    def as_array(self) -> np.ndarray:
        return np.append(np.asarray(self.x, dtype=float), self.t)

    @staticmethod
    def from_array(z: np.ndarray) -> "Point":
        z = np.asarray(z, dtype=float)
        return Point(z[:-1].copy(), float(z[-1]))


@dataclass(frozen=True)
class OperatorShape:
    """Structural data of one operator class.

    Attributes
    ----------
    s : tuple of block sizes s_0 >= s_1 >= ... >= s_d
    B : (N, N) drift matrix with superdiagonal blocks B_k of full rank
    N : total spatial dimension, sum of the block sizes
    a : N+1 homogeneity exponents (1,...,1, 3,...,3, ..., 2d+1, ..., 2) with
        the final entry 2 for the time variable
    Q : homogeneous spatial dimension s_0 + 3 s_1 + ... + (2d+1) s_d
    """

    s: tuple
    B: np.ndarray
    N: int
    a: np.ndarray
    Q: int
    d: int = field(default=0)

    @property
    def a_spatial(self) -> np.ndarray:
        return self.a[:-1]

    def bt_powers(self) -> list:
        """Powers (B^T)^0 ... (B^T)^d; the series beyond d vanishes."""
        out = [np.eye(self.N)]
        for _ in range(self.d):
            out.append(out[-1] @ self.B.T)
        return out


def validate_shape(s, B) -> OperatorShape:
    """Build an OperatorShape from block sizes and a drift matrix.

    Rejects drift matrices that are not in the required upper-block
    nilpotent form (superdiagonal blocks of full rank, zeros elsewhere)
    or block sizes that are not positive and nonincreasing.
    """
    s = tuple(int(v) for v in np.atleast_1d(s))
    if len(s) == 0:
        raise ShapeError("block sizes must be nonempty")
    if any(v <= 0 for v in s):
        raise ShapeError("block sizes must be positive")
    if any(s[k] < s[k + 1] for k in range(len(s) - 1)):
        raise ShapeError("block sizes must be nonincreasing")
    N = sum(s)
    B = np.asarray(B, dtype=float)
    if B.shape != (N, N):
        raise ShapeError(f"drift matrix must be {N}x{N}, got {B.shape}")

    d = len(s) - 1
    offsets = np.concatenate([[0], np.cumsum(s)])
    mask = np.zeros((N, N), dtype=bool)
    for k in range(1, d + 1):
        r0, r1 = offsets[k - 1], offsets[k]
        c0, c1 = offsets[k], offsets[k + 1]
        mask[r0:r1, c0:c1] = True
        block = B[r0:r1, c0:c1]
        if np.linalg.matrix_rank(block) != s[k]:
            raise ShapeError(f"block B_{k} must have full rank {s[k]}")
    if np.any(B[~mask] != 0.0):
        raise ShapeError("drift matrix has entries outside the superdiagonal blocks")

    # nilpotency B^{d+1} = 0 is structural given the block pattern; assert anyway
    P = np.eye(N)
    for _ in range(d + 1):
        P = P @ B
    assert np.all(P == 0.0), "drift matrix is not nilpotent of the expected order"

    a = np.empty(N + 1)
    for k in range(d + 1):
        a[offsets[k]:offsets[k + 1]] = 2 * k + 1
    a[N] = 2.0
    Q = int(sum((2 * k + 1) * s[k] for k in range(d + 1)))
    return OperatorShape(s=s, B=B, N=N, a=a, Q=Q, d=d)


def parabolic_shape() -> OperatorShape:
    """d = 0 baseline: one diffusion variable, no drift (heat operator)."""
    return validate_shape((1,), [[0.0]])


def kolmogorov_shape() -> OperatorShape:
    """Canonical two-variable shape with drift x_1 d_{x_2}."""
    return validate_shape((1, 1), [[0.0, 1.0], [0.0, 0.0]])


def translation_matrix(shape: OperatorShape, tau: float) -> np.ndarray:
    """F(tau) = exp(-tau B^T), evaluated as the exact finite polynomial."""
    F = np.zeros((shape.N, shape.N))
    for j, P in enumerate(shape.bt_powers()):
        F += ((-tau) ** j / math.factorial(j)) * P
    return F


def _trans_many(shape: OperatorShape, tau: np.ndarray) -> np.ndarray:
    """F(tau) for an array of tau values, shape (..., N, N)."""
    tau = np.asarray(tau, dtype=float)
    F = np.zeros(tau.shape + (shape.N, shape.N))
    for j, P in enumerate(shape.bt_powers()):
        F += ((-tau) ** j / math.factorial(j))[..., None, None] * P
    return F


def group_op(shape: OperatorShape, z, w=None, mode: str = "compose") -> np.ndarray:
    """Group composition (x,t) o (y,tau) = (y + F(tau) x, t + tau) or inversion.

    ``z`` and ``w`` are flat arrays (x_1..x_N, t); ``w`` is ignored for
    mode="invert".
    """
    z = np.asarray(z, dtype=float)
    if mode == "invert":
        return invert_many(shape, z[None, :])[0]
    if mode != "compose":
        raise ValueError(f"unknown mode {mode!r}")
    w = np.asarray(w, dtype=float)
    return compose_many(shape, z[None, :], w[None, :])[0]


def compose_many(shape: OperatorShape, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Batched z o w; broadcasts over leading axes."""
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    z, w = np.broadcast_arrays(z, w)
    F = _trans_many(shape, w[..., -1])
    out = np.empty_like(z)
    out[..., :-1] = w[..., :-1] + np.einsum("...ij,...j->...i", F, z[..., :-1])
    out[..., -1] = z[..., -1] + w[..., -1]
    return out


def invert_many(shape: OperatorShape, z: np.ndarray) -> np.ndarray:
    """Batched group inverse (x,t)^{-1} = (-F(-t) x, -t)."""
    z = np.asarray(z, dtype=float)
    F = _trans_many(shape, -z[..., -1])
    out = np.empty_like(z)
    out[..., :-1] = -np.einsum("...ij,...j->...i", F, z[..., :-1])
    out[..., -1] = -z[..., -1]
    return out


def dilate(shape: OperatorShape, r: float, z) -> np.ndarray:
    """Anisotropic dilation delta_r: coordinate i scales by r^{a_i}, t by r^2."""
    return dilate_many(shape, r, np.asarray(z, dtype=float))


def dilate_many(shape: OperatorShape, r, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    r = np.asarray(r, dtype=float)
    return z * r[..., None] ** shape.a if r.ndim else z * r ** shape.a


def hom_norm(shape: OperatorShape, z, tol: float = 1e-12) -> float:
    """Homogeneous norm: the unique rho with sum x_i^2/rho^{2 a_i} + t^2/rho^4 = 1."""
    return float(hom_norm_many(shape, np.asarray(z, dtype=float)[None, :], tol=tol)[0])


def hom_norm_many(shape: OperatorShape, z: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Batched homogeneous norm by bracketed bisection.

    The defining map rho -> sum_i z_i^2 / rho^{2 a_i} is strictly decreasing,
    and [max_i |z_i|^{1/a_i}, sqrt(N+1) * max_i |z_i|^{1/a_i}] brackets the
    root, so 54 bisection steps reach relative machine precision.  The
    exponents 2 a_i are small integers, so each evaluation uses repeated
    multiplication instead of float powers (this routine sits under the
    pairwise kernel tables and is hot).
    """
    z = np.asarray(z, dtype=float)
    a = shape.a
    absz = np.abs(z)
    lo = np.max(absz ** (1.0 / a), axis=-1)
    nonzero = lo > 0.0
    if not np.any(nonzero):
        return np.zeros(z.shape[:-1])
    flat = z[nonzero].reshape(-1, z.shape[-1])
    z2 = flat * flat

    # substitute u = rho^2: the defining equation becomes the monotone
    # polynomial h(u) = u^D - sum_i z_i^2 u^{D - a_i} = 0 with D = max a_i,
    # evaluated by Horner (coefficient c[j] multiplies u^{D-j})
    D = int(a.max())
    # c_0 = 1 (u^D term); c_{a_i} -= z_i^2 (u^{D-a_i} term)
    c = np.zeros((D + 1, len(flat)))
    c[0] = 1.0
    for i, ai in enumerate(a):
        c[int(ai)] -= z2[:, i]

    ulo = lo[nonzero].reshape(-1) ** 2
    uhi = ulo * z.shape[-1]

    def hval(u, out):
        np.copyto(out, c[0])
        for j in range(1, D + 1):
            out *= u
            out += c[j]
        return out

    buf = np.empty_like(ulo)
    if np.any(hval(ulo, buf) > 1e-9 * np.maximum(ulo ** D, 1.0)) or \
       np.any(hval(uhi, buf) < -1e-9 * np.maximum(uhi ** D, 1.0)):
        raise ToleranceError("bisection failed to bracket the homogeneous norm")
    mid = np.empty_like(ulo)
    for _ in range(_BISECT_ITERS):
        np.add(ulo, uhi, out=mid)
        mid *= 0.5
        take = hval(mid, buf) <= 0.0  # h increasing: root above mid
        np.copyto(ulo, mid, where=take)
        np.copyto(uhi, mid, where=~take)
    out = np.zeros(z.shape[:-1])
    out[nonzero] = np.sqrt(0.5 * (ulo + uhi)).reshape(lo[nonzero].shape)
    return out


def quasi_distance(shape: OperatorShape, z, w, symmetrize: bool = True) -> float:
    """d(z,w) = ||w^{-1} o z||; symmetrized variant adds d(w,z)."""
    z = np.asarray(z, dtype=float)[None, :]
    w = np.asarray(w, dtype=float)[None, :]
    return float(quasi_distance_many(shape, z, w, symmetrize=symmetrize)[0])


def quasi_distance_many(shape: OperatorShape, z: np.ndarray, w: np.ndarray,
                        symmetrize: bool = True) -> np.ndarray:
    wz = compose_many(shape, invert_many(shape, w), z)  # w^{-1} o z
    d1 = hom_norm_many(shape, wz)
    if not symmetrize:
        return d1
    return d1 + hom_norm_many(shape, invert_many(shape, wz))


def order_beta_probe(shape: OperatorShape, sample_count: int = 2000, M: float = 2.0,
                     cap: float = 1e3, seed: int = 0) -> dict:
    """Empirical probe of the interpolation inequality relating three points.

    Samples triples (z, zeta, eta) with ||eta^{-1} o z|| >= M ||zeta^{-1} o z||
    and sweeps beta over {0.1, ..., 1.0}, recording the empirical constant
    K(beta) = sup of both difference quotients.  Reports the largest beta for
    which K stays under ``cap``.
    """
    if sample_count < 1000:
        raise ValueError("sample_count must be at least 1000")
    rng = np.random.default_rng(seed)
    kept_lhs, kept_dz, kept_de = [], [], []
    n = 0
    while n < sample_count:
        batch = 4 * sample_count
        z = rng.uniform(-2, 2, size=(batch, shape.N + 1))
        eta = rng.uniform(-2, 2, size=(batch, shape.N + 1))
        scale = 10.0 ** rng.uniform(-3, 0, size=(batch, 1))
        zeta = z + scale * rng.uniform(-1, 1, size=(batch, shape.N + 1))
        d_zz = hom_norm_many(shape, compose_many(shape, invert_many(shape, zeta), z))
        d_ez = hom_norm_many(shape, compose_many(shape, invert_many(shape, eta), z))
        ok = (d_ez >= M * d_zz) & (d_zz > 0)
        z, zeta, eta = z[ok], zeta[ok], eta[ok]
        d_zz, d_ez = d_zz[ok], d_ez[ok]
        ieta, iz, izeta = invert_many(shape, eta), invert_many(shape, z), invert_many(shape, zeta)
        lhs1 = hom_norm_many(shape, compose_many(shape, ieta, z) - compose_many(shape, ieta, zeta))
        lhs2 = hom_norm_many(shape, compose_many(shape, iz, eta) - compose_many(shape, izeta, eta))
        kept_lhs.append(np.maximum(lhs1, lhs2))
        kept_dz.append(d_zz)
        kept_de.append(d_ez)
        n += int(ok.sum())
    lhs = np.concatenate(kept_lhs)[:sample_count]
    d_zz = np.concatenate(kept_dz)[:sample_count]
    d_ez = np.concatenate(kept_de)[:sample_count]

    betas = np.round(np.arange(0.1, 1.01, 0.1), 10)
    ktilde = np.array([
        float(np.max(lhs / (d_zz ** b * d_ez ** (1.0 - b)))) for b in betas
    ])
    admissible = betas[ktilde <= cap]
    beta_star = float(admissible.max()) if admissible.size else float("nan")
    k_star = float(ktilde[np.searchsorted(betas, beta_star)]) if admissible.size else float("inf")
    return {
        "betas": betas,
        "ktilde": ktilde,
        "beta": beta_star,
        "ktilde_at_beta": k_star,
        "M": M,
        "samples": sample_count,
    }


def ball_volume_mc(shape: OperatorShape, r: float, n_samples: int = 40000,
                   seed: int = 0) -> float:
    """Monte Carlo Lebesgue measure of the symmetrized-metric ball B_r(0).

    The ball lies in the coordinate box prod [-r^{a_i}, r^{a_i}], which is
    sampled uniformly.
    """
    rng = np.random.default_rng(seed)
    half = r ** shape.a
    pts = rng.uniform(-1, 1, size=(n_samples, shape.N + 1)) * half
    d = quasi_distance_many(shape, pts, np.zeros(shape.N + 1))
    box_vol = float(np.prod(2.0 * half))
    return box_vol * float(np.mean(d < r))
