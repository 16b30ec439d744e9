"""Sparse-family construction and sparse operators.

The recursion follows the stopping-time pattern: at a cube P, the bad set
collects cells where the maximal function of f or the truncated-operator
majorant exceeds alpha * c_km * <f>_{P*}; alpha doubles until both the bad
measure and its dyadic cover satisfy the half-packing bound; the cover cubes
become children and the recursion descends.  Witness sets are the cube minus
its children, so the half-sparseness of the family is a structural identity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dyadic import DyadicCube, GridFamily, dyadic_maximal, hl_maximal
from .errors import DominationFailure
from .lattice import GridField
from .operators import KernelOperator, grand_maximal

__all__ = [
    "SparseNode",
    "SparseFamily",
    "build_sparse_family",
    "apply_sparse",
    "verify_domination",
    "oscillation_sparse",
    "augmented_composition_check",
    "dump_family",
]

ALPHA_CAP = 2.0 ** 60


@dataclass
class SparseNode:
    cube: DyadicCube
    children: list = field(default_factory=list)
    alpha: float = 0.0

    @property
    def cells(self) -> np.ndarray:
        return self.cube.cells


@dataclass
class SparseFamily:
    root: SparseNode
    nodes: list
    eta: float
    lam: float
    dilation: float  # dilated cube = sandwich ball scaled by this factor
    geom: object

    def star_cells(self, node: SparseNode) -> np.ndarray:
        cube = node.cube
        center = cube.center_cell
        r = self.dilation * cube.radius
        return np.nonzero(self.geom.dtilde[center] <= r)[0]

    def witness(self, node: SparseNode) -> np.ndarray:
        if not node.children:
            return node.cells
        taken = np.concatenate([c.cells for c in node.children])
        return np.setdiff1d(node.cells, taken, assume_unique=False)

    def check_sparseness(self) -> dict:
        """Both definitions, exactly on the cell complex: packing
        sum |children| <= |T| / 2 and disjoint witnesses with
        |F_T| >= eta |T|."""
        worst_packing = 0.0
        worst_witness = 1.0
        seen = np.zeros(self.geom.n, dtype=bool)
        for node in self.nodes:
            size = len(node.cells)
            child_sum = sum(len(c.cells) for c in node.children)
            worst_packing = max(worst_packing, child_sum / size)
            w = self.witness(node)
            worst_witness = min(worst_witness, len(w) / size)
            if np.any(seen[w]):
                raise DominationFailure("witness sets are not disjoint")
            seen[w] = True
        return {"max_child_fraction": worst_packing,
                "min_witness_fraction": worst_witness,
                "n_nodes": len(self.nodes)}


def _cz_cover_indicator(grid, root: DyadicCube, bad_mask: np.ndarray, lam: float):
    """Maximal cubes in the subtree of ``root`` whose bad-cell fraction
    exceeds lam.  The cell level guarantees every bad cell is covered."""
    fractions = []
    for k in range(grid.n_levels):
        good = np.bincount(grid.cell_to_cube[k], weights=bad_mask.astype(float),
                           minlength=len(grid.centers[k]))
        fractions.append(good / np.maximum(grid.cube_counts[k], 1))
    cover = []
    stack = [(root.level, root.index, True)]
    while stack:
        k, a, is_root = stack.pop()
        if not is_root and fractions[k][a] > lam:
            cover.append(DyadicCube(grid, k, a))
        elif k + 1 < grid.n_levels:
            stack.extend((k + 1, int(b), False)
                         for b in np.nonzero(grid.parents[k + 1] == a)[0])
    return cover


def build_sparse_family(lab, root: DyadicCube, f: GridField, op: KernelOperator,
                        mode: str = "plain", b: GridField | None = None,
                        lam: float = 0.25, min_cells: int = 8,
                        alpha0: float = 2.0, c_km: float | None = None,
                        mf: GridField | None = None, seed: int = 0) -> SparseFamily:
    """Stopping-time sparse family for T(f chi_{P*}) (or its commutator with
    b when mode="commutator")."""
    if mode not in ("plain", "commutator"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "commutator" and b is None:
        raise ValueError("commutator mode needs the symbol b")
    geom = lab.geom
    family: GridFamily = lab.family
    grid = root.grid
    c_km = c_km if c_km is not None else lab.c_km(op.spec.m, op.spec.k)
    mf = mf if mf is not None else hl_maximal(family, f)[0]
    absf = np.abs(f.values)
    s = op.spec.s_dilation

    def majorant(vals: np.ndarray, star_mask: np.ndarray, cells: np.ndarray) -> np.ndarray:
        gf = GridField(f.box, vals, name="masked")
        t_at = np.abs(op.apply_at(cells, vals, star_mask))
        msh = grand_maximal(op, family, gf, s=s, support=star_mask,
                            restrict_cells=cells, seed=seed)
        return np.maximum(t_at, msh.values[cells])

    nodes = []

    def recurse(cube: DyadicCube) -> SparseNode:
        node = SparseNode(cube=cube)
        nodes.append(node)
        cells = cube.cells
        if len(cells) < min_cells:
            return node
        center = cube.center_cell
        star_mask = geom.dtilde[center] <= s * cube.radius
        n_star = max(1, int(np.sum(star_mask)))
        favg = float(np.sum(absf[star_mask]) / n_star)
        if favg == 0.0:
            return node
        n1 = majorant(f.values, star_mask, cells)
        drive = np.maximum(mf.values[cells], n1)
        if mode == "commutator":
            b_star = float(np.mean(b.values[star_mask]))
            f2 = (b.values - b_star) * f.values
            favg2 = float(np.sum(np.abs(f2)[star_mask]) / n_star)
            n2 = majorant(f2, star_mask, cells) if favg2 > 0 else None
        alpha = alpha0
        while True:
            bad = drive > alpha * c_km * favg
            if mode == "commutator" and favg2 > 0:
                bad = bad | (n2 > alpha * c_km * favg2)
            size_ok = np.sum(bad) <= 0.5 * len(cells)
            cover = []
            if size_ok:
                mask = np.zeros(geom.n, dtype=bool)
                mask[cells[bad]] = True
                cover = _cz_cover_indicator(grid, cube, mask, lam)
                pack = sum(len(c.cells) for c in cover)
                if pack <= 0.5 * len(cells):
                    break
            alpha *= 2.0
            if alpha > ALPHA_CAP:
                raise RecursionError("alpha doubling exceeded 2^60; operator "
                                     "bounds inconsistent")
        node.alpha = alpha
        for c in cover:
            node.children.append(recurse(c))
        return node

    root_node = recurse(root)
    fam = SparseFamily(root=root_node, nodes=nodes, eta=0.5, lam=lam,
                       dilation=s, geom=geom)
    rep = fam.check_sparseness()
    assert rep["max_child_fraction"] <= 0.5 + 1e-12
    assert rep["min_witness_fraction"] >= 0.5 - 1e-12
    return fam


def apply_sparse(family: SparseFamily, f: GridField, kind: str = "plain",
                 b: GridField | None = None, dilated: bool = True) -> GridField:
    """Sparse operator sums over the family's cubes.

    kind="plain": sum <|f|>_{T(*)} chi_T; "osc": |b - b_{T(*)}| <|f|>_{T(*)} chi_T;
    "osc_adjoint": <|b - b_{T(*)}| |f|>_{T(*)} chi_T.
    """
    if kind in ("osc", "osc_adjoint") and b is None:
        raise ValueError("oscillation kinds need b")
    out = np.zeros(family.geom.n)
    absf = np.abs(f.values)
    for node in family.nodes:
        cells = node.cells
        avg_cells = family.star_cells(node) if dilated else cells
        if kind == "plain":
            out[cells] += float(np.mean(absf[avg_cells]))
        else:
            b_avg = float(np.mean(b.values[avg_cells]))
            if kind == "osc":
                out[cells] += np.abs(b.values[cells] - b_avg) * float(np.mean(absf[avg_cells]))
            else:
                out[cells] += float(np.mean(np.abs(b.values[avg_cells] - b_avg)
                                            * absf[avg_cells]))
    return f.with_values(out, name=f"sparse_{kind}[{f.name}]")


def _percentile_constant(lhs: np.ndarray, rhs: np.ndarray, budget: float = 0.01):
    """Minimal C with lhs <= C rhs on >= (1 - budget) of the cells (the
    1 - budget quantile of the cellwise ratio), plus the fraction of cells
    that no constant can dominate (rhs = 0 < lhs).  Cells where both sides
    sit at roundoff level (below 1e-12 of their maxima) are inactive."""
    lhs = np.where(np.abs(lhs) < 1e-12 * max(np.max(np.abs(lhs)), 1e-300), 0.0, lhs)
    rhs = np.where(np.abs(rhs) < 1e-12 * max(np.max(np.abs(rhs)), 1e-300), 0.0, rhs)
    active = ~((lhs == 0.0) & (rhs == 0.0))
    if not np.any(active):
        return 0.0, 0.0
    with np.errstate(divide="ignore"):
        ratio = np.where(rhs[active] > 0, lhs[active] / np.maximum(rhs[active], 1e-300),
                         np.inf)
        ratio = np.where(lhs[active] == 0.0, 0.0, ratio)
    C = float(np.quantile(ratio, 1.0 - budget))
    hard = float(np.mean(np.isinf(ratio)))
    return C, hard


def verify_domination(lab, root: DyadicCube, f: GridField, op: KernelOperator,
                      mode: str = "plain", b: GridField | None = None,
                      budget: float = 0.01, **kw) -> dict:
    """Build the family and measure the pointwise domination constant on the
    cells of the root cube."""
    family = build_sparse_family(lab, root, f, op, mode=mode, b=b, **kw)
    geom = lab.geom
    cells = root.cells
    star_mask = geom.dtilde[root.center_cell] <= op.spec.s_dilation * root.radius
    c_km = lab.c_km(op.spec.m, op.spec.k)
    if mode == "plain":
        lhs_all = np.abs(op.apply(f.values, star_mask))
        rhs = c_km * apply_sparse(family, f, "plain").values
    else:
        tf = op.apply((b.values * f.values), star_mask) - b.values * op.apply(f.values, star_mask)
        lhs_all = np.abs(tf)
        from .spaces import bmo_norms
        bmo, _ = bmo_norms(b, lab.family.cube_catalog(min_cells=2), 1.0)
        rhs = c_km * (apply_sparse(family, f, "osc", b=b).values
                      + apply_sparse(family, f, "osc_adjoint", b=b).values
                      + bmo * apply_sparse(family, f, "plain").values)
    C, exceptional = _percentile_constant(lhs_all[cells], rhs[cells], budget)
    if not np.isfinite(C) or exceptional > budget:
        raise DominationFailure(
            f"undominatable cell fraction {exceptional:.4f} exceeds {budget} "
            f"(C = {C})")
    return {"constant": C, "constant_over_ckm": C / c_km, "exceptional": exceptional,
            "n_nodes": len(family.nodes), "mode": mode, "m": op.spec.m,
            "k": op.spec.k, "family": family}


def oscillation_sparse(lab, b: GridField, root: DyadicCube, lam: float = 0.25,
                       min_cells: int = 8, alpha0: float = 2.0,
                       budget: float = 0.01) -> tuple:
    """Median-oscillation decomposition: a half-sparse family with
    |b - (b)_P| <= alpha_N sum_T Omega_T(b) chi_T on all but a ``budget``
    fraction of the root cells."""
    grid = root.grid
    geom = lab.geom
    nodes = []
    alpha_used = alpha0

    def recurse(cube: DyadicCube) -> SparseNode:
        nonlocal alpha_used
        node = SparseNode(cube=cube)
        nodes.append(node)
        cells = cube.cells
        if len(cells) < min_cells:
            return node
        b_avg = float(np.mean(b.values[cells]))
        dev = np.abs(b.values - b_avg)
        osc = float(np.mean(dev[cells]))
        if osc == 0.0:
            return node
        mp = dyadic_maximal(grid, GridField(b.box, dev, name="dev"), restrict=cube)
        alpha = alpha0
        while True:
            bad = mp.values[cells] > alpha * osc
            cover = []
            if np.sum(bad) <= 0.5 * len(cells):
                mask = np.zeros(geom.n, dtype=bool)
                mask[cells[bad]] = True
                cover = _cz_cover_indicator(grid, cube, mask, lam)
                if sum(len(c.cells) for c in cover) <= 0.5 * len(cells):
                    break
            alpha *= 2.0
            if alpha > ALPHA_CAP:
                raise RecursionError("alpha doubling exceeded 2^60")
        node.alpha = alpha
        alpha_used = max(alpha_used, alpha)
        for c in cover:
            node.children.append(recurse(c))
        return node

    root_node = recurse(root)
    fam = SparseFamily(root=root_node, nodes=nodes, eta=0.5, lam=lam,
                       dilation=1.0, geom=geom)
    fam.check_sparseness()
    # pointwise oscillation bound on the root cells
    bound = np.zeros(geom.n)
    for node in nodes:
        cells = node.cells
        b_avg = float(np.mean(b.values[cells]))
        bound[cells] += float(np.mean(np.abs(b.values[cells] - b_avg)))
    cells = root.cells
    lhs = np.abs(b.values[cells] - float(np.mean(b.values[cells])))
    C, exceptional = _percentile_constant(lhs, bound[cells], budget)
    report = {"alpha": alpha_used, "pointwise_constant": C,
              "exceptional": exceptional, "n_nodes": len(nodes)}
    return fam, report


def augmented_composition_check(lab, base_family: SparseFamily, b: GridField,
                                f: GridField, lam: float = 0.25,
                                min_cells: int = 8) -> dict:
    """Composition bound: the adjoint oscillation operator of the base family
    is controlled by delta * composed plain sparse operators over the family
    augmented with the per-cube oscillation families."""
    aug_nodes = list(base_family.nodes)
    for node in base_family.nodes:
        if len(node.cells) >= min_cells:
            sub, _ = oscillation_sparse(lab, b, node.cube, lam=lam,
                                        min_cells=min_cells)
            aug_nodes.extend(sub.nodes[1:])  # root duplicates the base node
    aug = SparseFamily(root=base_family.root, nodes=aug_nodes, eta=0.25,
                       lam=lam, dilation=1.0, geom=lab.geom)
    lhs = apply_sparse(base_family, f, "osc_adjoint", b=b, dilated=False).values
    inner = apply_sparse(aug, f, "plain", dilated=False)
    outer = apply_sparse(base_family, inner, "plain", dilated=False).values
    C, exceptional = _percentile_constant(lhs, outer)
    return {"constant": C, "exceptional": exceptional,
            "n_aug_nodes": len(aug_nodes)}


def representation_domination(lab, u, coeff, kms: list, i: int = 0, j: int = 0,
                              budget: float = 0.01, seed: int = 0, **kw) -> dict:
    """Flagship assembly: the Hessian entry is pointwise dominated by the
    sparse right-hand side built from per-kernel families.

    For a constant coefficient field the commutator terms vanish, so the
    bound reads |u_xixj| <= kappa [ sum_{km} c_km |c^{km}| A_{G_km}(|Lu|)
    + |alpha_ij| |Lu| ] off at most a ``budget`` cell fraction; kappa is
    measured and reported.
    """
    from . import harmonics, kernels, lattice
    box = lab.box
    pts = box.centers()
    lu, _ = lattice.apply_L(lab.shape, coeff, u, box)
    target = np.abs(u.deriv(pts, (i, j)))
    A0 = coeff.values[0]
    frozen = kernels.FrozenCoefficients(z0=np.zeros(lab.shape.N + 1), A=A0,
                                        lam=coeff.lam)
    expansion = harmonics.expand_coeffs(lab.shape, frozen, i, j, lab.m_max,
                                        basis=lab.basis)
    alpha = kernels.alpha_coeff(lab.shape, frozen, i, j)
    root = lab.root_cube(0)
    f = lattice.GridField(box, np.abs(lu.values), name="Lu")
    rhs = np.abs(alpha) * np.abs(lu.values)
    ops = lab.ops_for(kms)
    for (m, k), op in zip(kms, ops):
        fam = build_sparse_family(lab, root, f, op, seed=seed, **kw)
        weight = lab.c_km(m, k) * abs(expansion.coeff(m, k))
        rhs += weight * apply_sparse(fam, f, "plain").values
    cells = root.cells
    kappa, exceptional = _percentile_constant(target[cells], rhs[cells], budget)
    if not np.isfinite(kappa) or exceptional > budget:
        raise DominationFailure(
            f"representation assembly undominatable on {exceptional:.4f}")
    return {"kappa": kappa, "exceptional": exceptional, "alpha": alpha,
            "kms": list(kms)}


def dump_family(family: SparseFamily, path) -> None:
    """JSON dump: cube tree, witness cell counts, thresholds per node."""
    def encode(node):
        return {"cube": list(node.cube.key()), "n_cells": int(len(node.cells)),
                "witness": int(len(family.witness(node))),
                "alpha": node.alpha,
                "children": [encode(c) for c in node.children]}

    with open(path, "w") as fh:
        json.dump({"eta": family.eta, "lam": family.lam,
                   "dilation": family.dilation, "tree": encode(family.root)},
                  fh, indent=1, sort_keys=True)
