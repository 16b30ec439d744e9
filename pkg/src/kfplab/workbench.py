"""Lab assembly: one object bundling everything the experiments share.

A lab is a (shape, box) pair with the pairwise group geometry, the dyadic
grid family with ball catalog, the sphere basis, and a cache of kernel
operator matrices.  Labs are memoized per configuration key because the
pairwise geometry is the dominant setup cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dyadic, harmonics, kernels, lattice, operators
from .geometry import OperatorShape, kolmogorov_shape, parabolic_shape, quasi_distance_many

__all__ = ["Lab", "build_lab", "default_box", "field_corpus", "clear_cache"]

_CACHE: dict = {}

DEFAULT_RESOLUTIONS = {
    # operator labs materialize O(cells^2) geometry; keep them moderate.
    # kolmogorov cells are metrically balanced: 0.5 = 0.125^{1/3} = sqrt(0.25)
    "parabolic": (40, 80),
    "kolmogorov": (8, 32, 16),
}

REFINED_RESOLUTIONS = {"parabolic": (52, 104), "kolmogorov": (9, 36, 18)}


def default_box(kind: str, resolution=None) -> lattice.Box:
    if kind == "parabolic":
        res = resolution or DEFAULT_RESOLUTIONS["parabolic"]
        return lattice.Box((-2.0, 0.0), (2.0, 4.0), res)
    if kind == "kolmogorov":
        res = resolution or DEFAULT_RESOLUTIONS["kolmogorov"]
        return lattice.Box((-2.0, -2.0, 0.0), (2.0, 2.0, 4.0), res)
    raise ValueError(f"unknown lab kind {kind!r}")


@dataclass
class Lab:
    kind: str
    shape: OperatorShape
    frozen: kernels.FrozenCoefficients
    box: lattice.Box
    geom: operators.PairwiseGeometry
    family: dyadic.GridFamily
    basis: harmonics.SphereBasis
    m_max: int
    eps: float
    s_dilation: float
    seed: int
    cell_diam: float
    _ops: dict = field(default_factory=dict)

    far: float = 1.0

    def _spec(self, m: int, k: int) -> operators.SingularSpec:
        return operators.SingularSpec(basis=self.basis, m=m, k=k, eps=self.eps,
                                      far=self.far, s_dilation=self.s_dilation)

    def op(self, m: int, k: int) -> operators.KernelOperator:
        return self.ops_for([(m, k)])[0]

    def ops_for(self, kms: list) -> list:
        missing = [km for km in kms if km not in self._ops]
        if missing:
            specs = [self._spec(m, k) for (m, k) in missing]
            for km, op in zip(missing, operators.build_kernel_operators(self.geom, specs)):
                self._ops[km] = op
        return [self._ops[km] for km in kms]

    def drop_ops(self):
        self._ops.clear()

    def c_km(self, m: int, k: int) -> float:
        "Kernel growth constant sup |Y_km| on the sphere (cached)."
        if not hasattr(self, "_sup_norms"):
            self._sup_norms = self.basis.sup_norms()
        return float(self._sup_norms[self.basis.column(m, k)])

    def grid(self, t: int = 0) -> dyadic.DyadicGrid:
        return self.family.grids[t]

    def root_cube(self, t: int = 0) -> dyadic.DyadicCube:
        return dyadic.DyadicCube(self.grid(t), 0, 0)

    def sample(self, fn, name: str = "") -> lattice.GridField:
        return lattice.sample(fn, self.box, name=name)

    def power_weight(self, gamma: float, origin=None) -> lattice.GridField:
        """d(z, z_ref)^gamma; z_ref defaults to the spacetime origin, which
        sits on the boundary so all cell-center distances are positive."""
        ref = np.zeros(self.box.dim) if origin is None else np.asarray(origin, float)
        d = quasi_distance_many(self.shape, self.geom.pts, ref)
        return lattice.GridField(self.box, d ** gamma, name=f"power[{gamma:g}]")


def build_lab(kind: str, resolution=None, m_max: int = 8, delta: float = 0.125,
              L: int | None = None, seed: int = 0, eps_cells: float = 1.05,
              s_dilation: float = 5.0, lam: float = 1.0) -> Lab:
    if L is None:
        # the balanced-cell Kolmogorov lattice has one metric octave between
        # the diameter and the cell scale; four staggered grids keep the ball
        # catalog dense enough for the truncated maximal operator, and the
        # smaller truncation dilation keeps some catalog balls with nonempty
        # exterior inside the box
        L = 4 if kind == "kolmogorov" else 3
    if kind == "kolmogorov" and s_dilation == 5.0:
        s_dilation = 3.0
    key = (kind, tuple(resolution) if resolution else None, m_max, delta, L,
           seed, eps_cells, s_dilation, lam)
    if key in _CACHE:
        return _CACHE[key]
    shape = parabolic_shape() if kind == "parabolic" else kolmogorov_shape()
    box = default_box(kind, resolution)
    frozen = kernels.frozen_identity(shape, lam=lam)
    geom = operators.PairwiseGeometry(shape, box)
    family = dyadic.build_grids(shape, box, delta=delta, L=L, seed=seed,
                                dist_matrix=geom.dtilde, with_balls=True)
    basis = harmonics.build_basis(shape, m_max)
    pos = geom.dtilde[geom.dtilde > 0]
    cell_diam = float(quasi_distance_many(
        shape, box.spacings[None, :], np.zeros((1, box.dim)))[0])
    eps = max(eps_cells * cell_diam, float(np.min(pos)) * 1.001)
    lab = Lab(kind=kind, shape=shape, frozen=frozen, box=box, geom=geom,
              family=family, basis=basis, m_max=m_max, eps=eps,
              s_dilation=s_dilation, seed=seed, cell_diam=cell_diam)
    lab.far = max(1.0, 4.0 * eps)
    _CACHE[key] = lab
    return lab


def clear_cache():
    _CACHE.clear()


def field_corpus(lab: Lab, seed: int = 0) -> list:
    """Deterministic test fields: bumps at two scales, a single-cell spike,
    a smooth random superposition, and an indicator."""
    box = lab.box
    rng = np.random.default_rng(seed)
    pts = box.centers()
    lo, up = np.asarray(box.lower), np.asarray(box.upper)
    mid = 0.5 * (lo + up)
    span = 0.5 * (up - lo)

    def gauss(center, widths):
        return np.exp(-np.sum(((pts - center) / widths) ** 2, axis=1))

    fields = [
        lattice.GridField(box, gauss(mid, 0.5 * span), name="bump"),
        lattice.GridField(box, gauss(mid + 0.3 * span, 0.2 * span), name="bump_small"),
    ]
    spike = np.zeros(box.n_cells)
    spike[np.argmin(np.sum(((pts - mid) / span) ** 2, axis=1))] = 1.0
    fields.append(lattice.GridField(box, spike, name="spike"))
    smooth = np.zeros(box.n_cells)
    for _ in range(4):
        freq = rng.uniform(0.5, 2.0, size=box.dim)
        phase = rng.uniform(0, 2 * np.pi)
        smooth += rng.normal() * np.cos(np.sum(freq * (pts - lo) / span, axis=1) + phase)
    fields.append(lattice.GridField(box, smooth, name="smooth_random"))
    fields.append(lattice.GridField(box, (np.sum(((pts - mid) / span) ** 2, axis=1)
                                          < 0.25).astype(float), name="indicator"))
    return fields
