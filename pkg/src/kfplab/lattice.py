"""Uniform-lattice representation of functions, weights, and the operator.

Functions that enter the representation-formula experiments are kept in
closed form (SeparableFunction) so their derivatives carry no finite
difference error; grid data is used for weights, coefficient fields, and
operator outputs.  Integrals are midpoint Riemann sums over cell centers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EllipticityError
from .geometry import OperatorShape

__all__ = [
    "Box",
    "GridField",
    "SeparableFunction",
    "bump",
    "monomial_time",
    "sample",
    "integrate",
    "CoefficientField",
    "apply_L",
    "dump_field",
    "load_field",
]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in R^{N+1} with a uniform cell count per axis."""

    lower: tuple
    upper: tuple
    resolution: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        up = tuple(float(v) for v in self.upper)
        res = tuple(int(v) for v in self.resolution)
        if not (len(lo) == len(up) == len(res)):
            raise ValueError("lower/upper/resolution must have equal length")
        if any(u <= l for l, u in zip(lo, up)) or any(r < 1 for r in res):
            raise ValueError("box extents must be positive")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        object.__setattr__(self, "resolution", res)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def spacings(self) -> np.ndarray:
        return (np.asarray(self.upper) - np.asarray(self.lower)) / np.asarray(self.resolution)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacings))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.resolution))

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.spacings[axis]
        return self.lower[axis] + h * (np.arange(self.resolution[axis]) + 0.5)

    def centers(self) -> np.ndarray:
        """Cell centers, shape (n_cells, dim), C-order flattening."""
        axes = [self.axis_centers(k) for k in range(self.dim)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def refined(self, factor: float = 2.0) -> "Box":
        return Box(self.lower, self.upper,
                   tuple(max(1, int(round(r * factor))) for r in self.resolution))

    def volume(self) -> float:
        return float(np.prod(np.asarray(self.upper) - np.asarray(self.lower)))


@dataclass(frozen=True)
class GridField:
    """Scalar function sampled at the cell centers of a box."""

    box: Box
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=float).ravel()
        if v.size != self.box.n_cells:
            raise ValueError(f"{v.size} values for {self.box.n_cells} cells")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values, name: str | None = None) -> "GridField":
        return GridField(self.box, values, self.name if name is None else name)


def sample(expr, box: Box, name: str = "") -> GridField:
    """Sample a callable (vectorized over points) at cell centers."""
    return GridField(box, np.asarray(expr(box.centers()), dtype=float), name)


def integrate(f: GridField, weight: GridField | None = None, p: float | None = None) -> float:
    """Riemann sum; with ``p`` (and optional weight) the L^p(omega) norm
    (int |f|^p omega dz)^{1/p}."""
    vol = f.box.cell_volume
    w = weight.values if weight is not None else 1.0
    if p is None:
        return float(np.sum(f.values * w) * vol)
    if p < 1.0:
        raise ValueError("p must be at least 1")
    return float((np.sum(np.abs(f.values) ** p * w) * vol) ** (1.0 / p))


class SeparableFunction:
    """Product u(z) = prod_k g_k(z_k) with analytic derivatives per factor.

    ``factors`` maps axis -> (g, g', g'') callables; axes not listed are
    constant 1.  ``support`` maps axis -> (lo, hi) where the factor vanishes
    outside, used to check compact support inside a box.
    """

    def __init__(self, dim: int, factors: dict, support: dict | None = None,
                 name: str = ""):
        self.dim = dim
        self.factors = factors
        self.support = support or {}
        self.name = name

    def _fk(self, pts, axis, order):
        if axis not in self.factors:
            return np.ones(len(pts)) if order == 0 else np.zeros(len(pts))
        return self.factors[axis][order](pts[:, axis])

    def value(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        out = np.ones(len(pts))
        for axis in self.factors:
            out = out * self._fk(pts, axis, 0)
        return out

    def deriv(self, pts: np.ndarray, axes: tuple) -> np.ndarray:
        """Partial derivative with multi-axis orders given as a tuple of axis
        indices (repeats allowed, order <= 2 per axis)."""
        pts = np.atleast_2d(pts)
        order = {}
        for ax in axes:
            order[ax] = order.get(ax, 0) + 1
        if any(v > 2 for v in order.values()):
            raise ValueError("derivatives beyond order 2 per axis not stored")
        out = np.ones(len(pts))
        for axis in set(list(self.factors) + list(order)):
            out = out * self._fk(pts, axis, order.get(axis, 0))
        return out

    def supported_inside(self, box: Box, margin_cells: int = 0) -> bool:
        h = box.spacings
        for axis, (lo, hi) in self.support.items():
            if lo < box.lower[axis] + margin_cells * h[axis]:
                return False
            if hi > box.upper[axis] - margin_cells * h[axis]:
                return False
        return True


def _poly_bump_factors(center: float, radius: float, q: int = 4):
    """g(s) = (1 - u^2)^q with u = (s - center)/radius, zero outside."""

    def g(s):
        u = (np.asarray(s, dtype=float) - center) / radius
        inside = np.abs(u) < 1.0
        out = np.zeros_like(u)
        out[inside] = (1.0 - u[inside] ** 2) ** q
        return out

    def g1(s):
        u = (np.asarray(s, dtype=float) - center) / radius
        inside = np.abs(u) < 1.0
        out = np.zeros_like(u)
        out[inside] = -2.0 * q * u[inside] * (1.0 - u[inside] ** 2) ** (q - 1) / radius
        return out

    def g2(s):
        u = (np.asarray(s, dtype=float) - center) / radius
        inside = np.abs(u) < 1.0
        out = np.zeros_like(u)
        ui = u[inside]
        out[inside] = (-2.0 * q * (1.0 - ui ** 2) ** (q - 1)
                       + 4.0 * q * (q - 1) * ui ** 2 * (1.0 - ui ** 2) ** (q - 2)) / radius ** 2
        return out

    return g, g1, g2


def bump(dim: int, center, radii, q: int = 4, name: str = "bump") -> SeparableFunction:
    """Compactly supported product bump, C^{q-1}, smooth inside its support."""
    center = np.asarray(center, dtype=float)
    radii = np.asarray(radii, dtype=float)
    factors = {k: _poly_bump_factors(center[k], radii[k], q) for k in range(dim)}
    support = {k: (center[k] - radii[k], center[k] + radii[k]) for k in range(dim)}
    return SeparableFunction(dim, factors, support, name=name)


def monomial_time(dim: int, axis: int, phi, dphi, name: str = "") -> SeparableFunction:
    """u(z) = z_axis * phi(t): linear in one spatial variable, smooth in time."""
    t_axis = dim - 1
    factors = {
        axis: (lambda s: np.asarray(s, dtype=float),
               lambda s: np.ones_like(np.asarray(s, dtype=float)),
               lambda s: np.zeros_like(np.asarray(s, dtype=float))),
        t_axis: (phi, dphi, None),
    }
    return SeparableFunction(dim, factors, name=name)


@dataclass(frozen=True)
class CoefficientField:
    """Diffusion matrix A(z) on the lattice with its ellipticity constant."""

    shape: OperatorShape
    values: np.ndarray  # (n_cells, s0, s0)
    lam: float
    box: Box = field(repr=False, default=None)

    @staticmethod
    def constant(shape: OperatorShape, box: Box, A, lam: float) -> "CoefficientField":
        A = np.asarray(A, dtype=float)
        vals = np.broadcast_to(A, (box.n_cells,) + A.shape).copy()
        return CoefficientField(shape=shape, values=vals, lam=lam, box=box)

    @staticmethod
    def from_callable(shape: OperatorShape, box: Box, fn, lam: float) -> "CoefficientField":
        vals = np.asarray(fn(box.centers()), dtype=float)
        return CoefficientField(shape=shape, values=vals, lam=lam, box=box)

    def __post_init__(self):
        v = self.values
        s0 = self.shape.s[0]
        if v.shape[1:] != (s0, s0):
            raise EllipticityError(f"coefficient blocks must be {s0}x{s0}")
        if not np.allclose(v, np.swapaxes(v, 1, 2), atol=1e-12):
            raise EllipticityError("coefficient matrices must be symmetric")
        ev = np.linalg.eigvalsh(v)
        if ev.min() < 1.0 / self.lam - 1e-12 or ev.max() > self.lam + 1e-12:
            raise EllipticityError(
                f"eigenvalues in [{ev.min():g}, {ev.max():g}] violate the "
                f"[{1.0 / self.lam:g}, {self.lam:g}] bounds")


def apply_L(shape: OperatorShape, coeff: CoefficientField, u: SeparableFunction,
            box: Box | None = None):
    """Apply sum a_ij d_ij + sum b_ij x_i d_j - d_t to a closed-form function.

    Returns (Lu, Yu) as grid fields; Yu = (sum b_ij x_i d_j - d_t) u is the
    drift part, exposed separately.
    """
    box = box if box is not None else coeff.box
    pts = box.centers()
    s0, N = shape.s[0], shape.N
    n = len(pts)
    diff = np.zeros(n)
    for i in range(s0):
        for j in range(s0):
            aij = coeff.values[:, i, j]
            if np.any(aij != 0.0):
                diff += aij * u.deriv(pts, (i, j))
    drift = np.zeros(n)
    for j in range(N):
        c = pts[:, :N] @ shape.B[:, j]
        if np.any(c != 0.0):
            drift += c * u.deriv(pts, (j,))
    yu = drift - u.deriv(pts, (N,))
    return (GridField(box, diff + yu, name=f"L[{u.name}]"),
            GridField(box, yu, name=f"Y[{u.name}]"))


def dump_field(f: GridField, path) -> None:
    """Flat CSV: one metadata header line (box and resolution), one value per row."""
    meta = json.dumps({"lower": f.box.lower, "upper": f.box.upper,
                       "resolution": f.box.resolution, "name": f.name})
    with open(path, "w") as fh:
        fh.write(f"# {meta}\n")
        fh.write("value\n")
        for v in f.values:
            fh.write(f"{v:.17g}\n")


def load_field(path) -> GridField:
    with open(path) as fh:
        meta = json.loads(fh.readline().lstrip("# ").strip())
        header = fh.readline().strip()
        if header != "value":
            raise ValueError(f"unexpected field file header {header!r}")
        vals = np.array([float(line) for line in fh if line.strip()])
    box = Box(tuple(meta["lower"]), tuple(meta["upper"]), tuple(meta["resolution"]))
    return GridField(box, vals, meta.get("name", ""))
