"""Dyadic cube systems on the discretized homogeneous space.

Construction: per grid, a nested chain of greedy maximal separated nets of
cell centers (seeded jittered insertion order, coarse net contained in every
finer net), a final level in which every lattice cell is its own cube, parent
links from each center to its nearest coarser center, and cube membership by
descendant chains.  The chain construction makes the partition and nesting
axioms exact on the cell complex (it is the fixed point of the one-pass
nesting repair: straddling cells are reassigned to the nearest child of their
parent cube); sandwich constants are measured post hoc and the ball catalog
is inflated until the discrete ball-nesting axiom holds.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionError
from .geometry import OperatorShape, quasi_distance_many
from .lattice import Box, GridField

__all__ = [
    "DyadicCube",
    "DyadicGrid",
    "GridFamily",
    "DistanceProvider",
    "build_grids",
    "dyadic_maximal",
    "hl_maximal",
    "cz_decompose",
    "grid_manifest",
    "dump_manifest",
]


class DistanceProvider:
    """Columns of the symmetrized quasi-distance between all cell centers and
    one cell, optionally backed by a full precomputed matrix."""

    def __init__(self, shape, cell_centers, matrix=None):
        self.shape = shape
        self.pts = cell_centers
        self.matrix = matrix

    def column(self, idx: int) -> np.ndarray:
        if self.matrix is not None:
            return np.asarray(self.matrix[idx], dtype=float)
        return quasi_distance_many(self.shape, self.pts, self.pts[idx])


@dataclass(frozen=True)
class DyadicCube:
    """Handle into a grid: one cube at one level."""

    grid: "DyadicGrid"
    level: int
    index: int

    @property
    def cells(self) -> np.ndarray:
        return self.grid.cube_cells[self.level][self.index]

    @property
    def center_cell(self) -> int:
        return int(self.grid.centers[self.level][self.index])

    @property
    def measure(self) -> float:
        return len(self.cells) * self.grid.cell_volume

    @property
    def scale(self) -> float:
        return self.grid.scales[self.level]

    @property
    def radius(self) -> float:
        """Outer sandwich-ball radius."""
        return self.grid.ball_factor * self.scale

    def children(self) -> list:
        if self.level + 1 >= self.grid.n_levels:
            return []
        idx = np.nonzero(self.grid.parents[self.level + 1] == self.index)[0]
        return [DyadicCube(self.grid, self.level + 1, int(i)) for i in idx]

    def parent(self):
        if self.level == 0:
            return None
        return DyadicCube(self.grid, self.level - 1,
                          int(self.grid.parents[self.level][self.index]))

    def key(self):
        return (self.grid.grid_id, self.level, self.index)


class DyadicGrid:
    """One dyadic system; levels run coarse to fine, the last level is the
    cell level (every cell its own cube)."""

    def __init__(self, grid_id, shape, box, delta, scales, centers, parents,
                 cell_to_cube, dist_to_center, straddler_fraction):
        self.grid_id = grid_id
        self.shape = shape
        self.box = box
        self.delta = delta
        self.scales = scales
        self.centers = centers
        self.parents = parents
        self.cell_to_cube = cell_to_cube
        self.dist_to_center = dist_to_center
        self.straddler_fraction = straddler_fraction
        self.cell_volume = box.cell_volume
        self.n_cells = box.n_cells
        self.n_levels = len(scales)
        self.cube_cells = []
        self.cube_counts = []
        for k in range(self.n_levels):
            order = np.argsort(self.cell_to_cube[k], kind="stable")
            counts = np.bincount(self.cell_to_cube[k], minlength=len(centers[k]))
            splits = np.cumsum(counts)[:-1]
            self.cube_cells.append(np.split(order, splits))
            self.cube_counts.append(counts)
        # outer sandwich constant and doubling-type constant, measured
        self.C1 = float(max(np.max(self.dist_to_center[k]) / self.scales[k]
                            for k in range(self.n_levels - 1)))
        ratios = []
        for k in range(1, self.n_levels):
            child_counts = self.cube_counts[k]
            parent_counts = self.cube_counts[k - 1][self.parents[k]]
            good = child_counts > 0
            ratios.append(np.max(parent_counts[good] / child_counts[good]))
        self.doubling = float(np.max(ratios)) if ratios else 1.0
        self.c1 = float("nan")      # measured when the ball catalog is built
        self.ball_factor = self.C1  # may be inflated by the catalog assembly
        self._assert_axioms()

    def _assert_axioms(self):
        n = self.n_cells
        for k in range(self.n_levels):
            if int(np.sum(self.cube_counts[k])) != n:
                raise ConstructionError(f"level {k} does not partition the lattice")
        for k in range(1, self.n_levels):
            chain = self.parents[k][self.cell_to_cube[k]]
            if np.any(chain != self.cell_to_cube[k - 1]):
                raise ConstructionError(f"nesting violated between levels {k - 1}, {k}")
        seed = self.centers[0][0]
        for k in range(self.n_levels):
            if seed not in self.centers[k]:
                raise ConstructionError("center lineage broken")

    def cubes(self, level=None):
        levels = range(self.n_levels) if level is None else [level]
        for k in levels:
            for a in range(len(self.centers[k])):
                yield DyadicCube(self, k, a)

    def cube_of_cell(self, cell: int, level: int) -> DyadicCube:
        return DyadicCube(self, level, int(self.cell_to_cube[level, cell]))

    def level_averages(self, values: np.ndarray) -> list:
        out = []
        for k in range(self.n_levels):
            sums = np.bincount(self.cell_to_cube[k], weights=values,
                               minlength=len(self.centers[k]))
            out.append(sums / np.maximum(self.cube_counts[k], 1))
        return out


@dataclass
class GridFamily:
    """L translated grids over one box, with an optional shared ball catalog."""

    shape: OperatorShape
    box: Box
    grids: list
    cell_centers: np.ndarray
    dist_provider: DistanceProvider
    ball_members: list = field(default_factory=list)  # (grid_id, level, index, cells)

    def all_cubes(self):
        for g in self.grids:
            yield from g.cubes()

    def cube_catalog(self, min_cells: int = 1, skip_cell_level: bool = False) -> list:
        out = []
        for g in self.grids:
            top = g.n_levels - 1 if skip_cell_level else g.n_levels
            for k in range(top):
                for a in range(len(g.centers[k])):
                    c = DyadicCube(g, k, a)
                    if len(c.cells) >= min_cells:
                        out.append(c)
        return out


def build_grids(shape: OperatorShape, box: Box, delta: float = 0.125, L: int = 3,
                seed: int = 0, dist_matrix=None, with_balls: bool = False,
                min_scale_cells: float = 1.0, stagger: bool = True) -> GridFamily:
    """Build L jittered dyadic grids over the box.

    ``delta`` must be at most 1/8 (quasi-metric safety margin).  With
    ``stagger`` the L grids carry geometrically interleaved scale offsets
    delta^{t/L}; each grid is still a delta-grid and the family jointly
    covers intermediate ball scales (the covering property that motivates
    using several grids).  The ball catalog (needed by the maximal
    operators) requires the pairwise distance matrix; pass it as
    ``dist_matrix`` together with ``with_balls=True``.
    """
    if delta > 0.125 + 1e-12:
        raise ValueError("delta must be at most 1/8")
    if L < 1:
        raise ValueError("need at least one grid")
    if with_balls and dist_matrix is None:
        raise ValueError("the ball catalog requires the pairwise distance matrix")
    pts = box.centers()
    n = len(pts)
    provider = DistanceProvider(shape, pts, matrix=dist_matrix)
    rng = np.random.default_rng(seed)

    probe = rng.choice(n, size=min(n, 64), replace=False)
    diam = float(max(provider.column(int(i))[probe].max() for i in probe[:16]))
    h = box.spacings
    cell_diam = float(quasi_distance_many(shape, h[None, :], np.zeros((1, box.dim)))[0])
    floor = min_scale_cells * cell_diam

    grids = []
    for gid in range(L):
        # 5% margin so the unstaggered grid has a single root cube even though
        # the diameter is estimated from a probe sample
        top = 1.05 * diam * (delta ** (gid / L) if stagger and gid else 1.0)
        scales = [top]
        while scales[-1] * delta >= floor:
            scales.append(scales[-1] * delta)
        order = rng.permutation(n)
        dist = np.full(n, np.inf)
        nearest = np.full(n, -1, dtype=int)
        centers, dist_levels, nearest_levels = [], [], []
        prev: list = []
        for scale in scales:
            chosen = list(prev)
            for cand in order:
                if dist[cand] >= scale:
                    chosen.append(int(cand))
                    col = provider.column(int(cand))
                    closer = col < dist
                    dist[closer] = col[closer]
                    nearest[closer] = int(cand)
            centers.append(np.array(chosen, dtype=int))
            dist_levels.append(dist.copy())
            nearest_levels.append(nearest.copy())
            prev = chosen

        centers.append(np.arange(n))
        # the cell-level sandwich scale is the true cell diameter (the
        # geometric continuation scales[-1] * delta can undershoot it, which
        # would make every cell ball a singleton)
        scales_all = list(scales) + [max(scales[-1] * delta, cell_diam)]
        n_levels = len(centers)

        pos = []
        for cs in centers:
            p = np.full(n, -1, dtype=int)
            p[cs] = np.arange(len(cs))
            pos.append(p)

        parents = [None]
        for k in range(1, n_levels):
            parents.append(pos[k - 1][nearest_levels[k - 1][centers[k]]])

        cell_to_cube = np.empty((n_levels, n), dtype=int)
        cell_to_cube[n_levels - 1] = np.arange(n)
        for k in range(n_levels - 2, -1, -1):
            cell_to_cube[k] = parents[k + 1][cell_to_cube[k + 1]]

        # distance to the assigned center: equals the greedy nearest distance
        # except for straddlers (cells whose chain assignment differs from the
        # nearest net point), which get exact columns
        dist_to_center = np.zeros((n_levels, n))
        straddlers = 0
        for k in range(n_levels - 1):
            assigned_center = centers[k][cell_to_cube[k]]
            d = dist_levels[k].copy()
            off = assigned_center != nearest_levels[k]
            straddlers += int(np.sum(off))
            for c in np.unique(assigned_center[off]):
                mask = off & (assigned_center == c)
                d[mask] = provider.column(int(c))[mask]
            dist_to_center[k] = d
        frac = straddlers / float(n * max(1, n_levels - 1))

        grids.append(DyadicGrid(gid, shape, box, delta, scales_all, centers,
                                parents, cell_to_cube, dist_to_center, frac))

    family = GridFamily(shape=shape, box=box, grids=grids, cell_centers=pts,
                        dist_provider=provider)
    if with_balls:
        _build_ball_catalog(family)
    return family


def _build_ball_catalog(family: GridFamily):
    """Sandwich balls of every cube (cell level included, so the maximal
    function dominates |f| pointwise); the radius factor is inflated until
    the discrete ball-nesting axiom holds, then the inner sandwich constant
    is measured from the same distance matrix."""
    D = family.dist_provider.matrix
    n = D.shape[0]
    for grid in family.grids:
        factor = grid.C1 * 1.02
        for _ in range(80):
            if _ball_nesting_holds(grid, D, factor):
                break
            factor *= 1.1
        else:
            raise ConstructionError("ball nesting could not be repaired")
        grid.ball_factor = factor
        # inner constant: largest c with B(center, c * scale) inside the cube
        c1 = np.inf
        for k in range(grid.n_levels - 1):
            rows = D[grid.centers[k]].copy()
            own = grid.cell_to_cube[k]
            rows[own[None, :] == np.arange(len(grid.centers[k]))[:, None]] = np.inf
            finite = np.isfinite(rows).any(axis=1)
            if finite.any():
                c1 = min(c1, float(np.min(rows[finite].min(axis=1)) / grid.scales[k]))
        grid.c1 = float(c1) if np.isfinite(c1) else 1.0

    members = []
    for grid in family.grids:
        for k in range(grid.n_levels):
            r = grid.ball_factor * grid.scales[k]
            rows = grid.centers[k]
            ii, jj = np.nonzero(D[rows] < r)
            splits = np.searchsorted(ii, np.arange(1, len(rows)))
            cell_lists = np.split(jj, splits)
            for a in range(len(rows)):
                members.append((grid.grid_id, k, a, cell_lists[a]))
    family.ball_members = members
    # flat catalog arrays and a cell -> ball inverted index (CSR), used by the
    # truncated maximal operator inside the sparse recursion
    grids = {g.grid_id: g for g in family.grids}
    centers = np.array([grids[gid].centers[k][a]
                        for (gid, k, a, _) in members], dtype=int)
    radii = np.array([grids[gid].ball_factor * grids[gid].scales[k]
                      for (gid, k, a, _) in members])
    cell_ids = np.concatenate([c for (_, _, _, c) in members])
    ball_ids = np.concatenate([np.full(len(c), q, dtype=int)
                               for q, (_, _, _, c) in enumerate(members)])
    order = np.argsort(cell_ids, kind="stable")
    counts = np.bincount(cell_ids, minlength=n)
    family.ball_centers = centers
    family.ball_radii = radii
    family.ball_cells = [c for (_, _, _, c) in members]
    family.cell_to_balls = (np.concatenate([[0], np.cumsum(counts)]),
                            ball_ids[order])


def _ball_nesting_holds(grid, D, factor) -> bool:
    for k in range(1, grid.n_levels):
        r_child = factor * grid.scales[k]
        r_parent = factor * grid.scales[k - 1]
        child_rows = grid.centers[k]
        parent_rows = grid.centers[k - 1][grid.parents[k]]
        for lo in range(0, len(child_rows), 512):
            hi = min(lo + 512, len(child_rows))
            bad = (D[child_rows[lo:hi]] < r_child) & ~(D[parent_rows[lo:hi]] < r_parent)
            if bad.any():
                return False
    return True


def dyadic_maximal(grid: DyadicGrid, f: GridField, restrict: DyadicCube | None = None) -> GridField:
    """Per cell, the max cube average of |f| over containing cubes
    (restricted to the subtree of ``restrict`` if given)."""
    vals = np.abs(f.values)
    avgs = grid.level_averages(vals)
    if restrict is None:
        out = np.zeros(grid.n_cells)
        for k in range(grid.n_levels):
            out = np.maximum(out, avgs[k][grid.cell_to_cube[k]])
        return f.with_values(out, name="Mdyadic")
    cells = restrict.cells
    out = np.zeros(grid.n_cells)
    for k in range(restrict.level, grid.n_levels):
        sub = grid.cell_to_cube[k, cells]
        out[cells] = np.maximum(out[cells], avgs[k][sub])
    return f.with_values(out, name="Mdyadic_restricted")


def hl_maximal(family: GridFamily, f: GridField):
    """Uncentered maximal function over the sandwich-ball catalog, plus the
    max comparison ratio against the sum of the dyadic maximal functions."""
    if not family.ball_members:
        raise ValueError("family was built without a ball catalog")
    vals = np.abs(f.values)
    out = np.zeros(len(vals))
    for (_, _, _, cells) in family.ball_members:
        if len(cells):
            np.maximum.at(out, cells, float(np.mean(vals[cells])))
    dyadic_sum = np.zeros(len(vals))
    for grid in family.grids:
        dyadic_sum += dyadic_maximal(grid, f).values
    ratio = float(np.max(np.where(dyadic_sum > 0, out / np.maximum(dyadic_sum, 1e-300), 0.0)))
    return f.with_values(out, name="M"), ratio


def cz_decompose(grid: DyadicGrid, f: GridField, lam: float):
    """Calderon-Zygmund decomposition at height ``lam`` on the cube tree.

    Returns (g, parts, report); parts are (cube, cells, h_values) with
    mean-zero h_i supported on disjoint maximal cubes of average > lam.
    """
    if lam <= 0.0:
        raise ValueError("height must be positive")
    vals = f.values
    if np.any(vals < 0.0):
        raise ValueError("decomposition expects a nonnegative function")
    avgs = grid.level_averages(vals)
    stopping = []
    stack = [(0, a) for a in range(len(grid.centers[0]))]
    while stack:
        k, a = stack.pop()
        if avgs[k][a] > lam:
            stopping.append((k, a))
        elif k + 1 < grid.n_levels:
            stack.extend((k + 1, int(b))
                         for b in np.nonzero(grid.parents[k + 1] == a)[0])
    parts = []
    g = vals.copy()
    total_measure = 0.0
    for k, a in stopping:
        cube = DyadicCube(grid, k, a)
        cells = cube.cells
        avg = avgs[k][a]
        g[cells] = avg
        parts.append((cube, cells, vals[cells] - avg))
        total_measure += cube.measure
    l1 = float(np.sum(vals) * grid.cell_volume)
    report = {
        "n_parts": len(parts),
        "sum_measures": total_measure,
        "measure_bound": l1 / lam,
        "g_sup": float(np.max(np.abs(g))) if len(g) else 0.0,
        "doubling": grid.doubling,
        "lam": lam,
    }
    return f.with_values(g, name="cz_good"), parts, report


def grid_manifest(family: GridFamily) -> dict:
    """JSON-ready manifest: levels, centers, measured constants."""
    out = {"delta": family.grids[0].delta, "n_grids": len(family.grids),
           "box": {"lower": family.box.lower, "upper": family.box.upper,
                   "resolution": family.box.resolution},
           "grids": []}
    for g in family.grids:
        out["grids"].append({
            "grid_id": g.grid_id,
            "scales": [float(s) for s in g.scales],
            "n_cubes": [int(len(c)) for c in g.centers],
            "centers": [[int(c) for c in cs] for cs in g.centers[:-1]],
            "c1": g.c1, "C1": g.C1, "ball_factor": g.ball_factor,
            "doubling": g.doubling,
            "straddler_fraction": g.straddler_fraction,
        })
    return out


def dump_manifest(family: GridFamily, path) -> None:
    with open(path, "w") as fh:
        json.dump(grid_manifest(family), fh, indent=1, sort_keys=True)
