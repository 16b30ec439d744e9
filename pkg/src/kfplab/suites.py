"""Batch experiment suites: one function per suite, shared by the CLI and by
the acceptance tests.

Each suite returns a dict with ``checks`` (name, passed, value, threshold),
``tables`` (rows for the CSV emitter), and ``curves`` (data behind the report
figures).  Everything is driven by the config and the seed; identical inputs
give identical reports.
"""

from __future__ import annotations

import numpy as np

from . import (config as cfgmod, dyadic, estimates, geometry, harmonics,
               kernels, lattice, operators, sparse, spaces, workbench)

__all__ = ["run_suite", "SUITE_RUNNERS"]


def _check(name, value, threshold, cmp="<=", note=""):
    value = float(value)
    ok = {"<=": value <= threshold, ">=": value >= threshold,
          "in": True}[cmp if cmp in ("<=", ">=") else "<="]
    return {"name": name, "value": value, "threshold": float(threshold),
            "cmp": cmp, "passed": bool(ok), "note": note}


def _check_range(name, value, lo, hi, note=""):
    value = float(value)
    return {"name": name, "value": value, "threshold": float(hi), "cmp": "in",
            "lo": float(lo), "passed": bool(lo <= value <= hi), "note": note}


def _shapes():
    return {"parabolic": geometry.parabolic_shape(),
            "kolmogorov": geometry.kolmogorov_shape()}


# -- geometry -------------------------------------------------------------------

def run_geometry(cp, seed: int) -> dict:
    tol = float(cp["geometry"]["tol"])
    n = int(cp["geometry"]["samples"])
    rng = np.random.default_rng(seed)
    checks, tables = [], {"probes": []}
    for name, shape in _shapes().items():
        d = shape.N + 1
        z = rng.uniform(-2, 2, size=(n, d))
        w = rng.uniform(-2, 2, size=(n, d))
        v = rng.uniform(-2, 2, size=(n, d))
        r = rng.uniform(0.2, 3.0, size=n)
        assoc = np.max(np.abs(
            geometry.compose_many(shape, geometry.compose_many(shape, z, w), v)
            - geometry.compose_many(shape, z, geometry.compose_many(shape, w, v))))
        inv = np.max(np.abs(geometry.compose_many(
            shape, z, geometry.invert_many(shape, z))))
        dil = np.max(np.abs(
            geometry.dilate_many(shape, r, geometry.compose_many(shape, z, w))
            - geometry.compose_many(shape, geometry.dilate_many(shape, r, z),
                                    geometry.dilate_many(shape, r, w))))
        norms = geometry.hom_norm_many(shape, z)
        scaled = geometry.hom_norm_many(shape, geometry.dilate_many(shape, r, z))
        hom = np.max(np.abs(scaled - r * norms) / np.maximum(norms, 1e-30))
        checks += [
            _check(f"{name}/group_associativity", assoc, tol),
            _check(f"{name}/group_inverse", inv, tol),
            _check(f"{name}/dilation_compatibility", dil, tol),
            _check(f"{name}/norm_homogeneity", hom, tol),
        ]
        d_zw = geometry.quasi_distance_many(shape, z[:2000], w[:2000], symmetrize=False)
        d_wz = geometry.quasi_distance_many(shape, w[:2000], z[:2000], symmetrize=False)
        qsym = float(np.max(np.maximum(d_zw / d_wz, d_wz / d_zw)))
        probe = geometry.order_beta_probe(
            shape, sample_count=2000, M=float(cp["geometry"]["order_beta_M"]),
            cap=float(cp["geometry"]["beta_cap"]), seed=seed)
        mc = int(cp["geometry"]["mc_samples"])
        v1 = geometry.ball_volume_mc(shape, 1.0, n_samples=mc, seed=seed + 1)
        v2 = geometry.ball_volume_mc(shape, 2.0, n_samples=mc, seed=seed + 2)
        ball_gap = abs(v2 / 2.0 ** (shape.Q + 2) - v1) / v1
        checks += [
            _check(f"{name}/ball_measure_scaling_mc", ball_gap, 0.05),
            _check(f"{name}/order_beta_finite", probe["ktilde_at_beta"],
                   float(cp["geometry"]["beta_cap"])),
        ]
        tables["probes"].append({
            "shape": name, "quasi_symmetry": qsym, "beta": probe["beta"],
            "ktilde": probe["ktilde_at_beta"], "M": probe["M"],
            "ball_vol_r1": v1, "ball_vol_r2": v2,
        })
    return {"suite": "geometry", "checks": checks, "tables": tables, "curves": {}}


# -- kernels --------------------------------------------------------------------

def run_kernels(cp, seed: int) -> dict:
    import kfplab
    from pathlib import Path
    rng = np.random.default_rng(seed)
    checks, tables = [], {"values": []}
    gdir = Path(kfplab.__file__).parent / "goldens"
    for name, shape in _shapes().items():
        frozen = kernels.frozen_identity(shape)
        anchor = kernels.gamma_eval(shape, frozen, [0.0] * shape.N + [1.0])
        exact = (np.sqrt(3) / (2 * np.pi) if name == "kolmogorov"
                 else (4 * np.pi) ** -0.5)
        checks.append(_check(f"{name}/gamma_anchor", abs(anchor - exact), 1e-10))
        z = rng.uniform(-1, 1, size=(2000, shape.N + 1))
        z[:, -1] = np.abs(z[:, -1]) + 0.1
        r = rng.uniform(0.5, 2.0, size=2000)
        g = kernels.gamma_many(shape, frozen, z)
        gs = kernels.gamma_many(shape, frozen, geometry.dilate_many(shape, r, z))
        keep = g > 1e-30
        hom = np.max(np.abs(gs - r ** -float(shape.Q) * g)[keep] / g[keep])
        checks.append(_check(f"{name}/gamma_homogeneity", hom, 1e-8))
        tol = float(cp["kernels"][f"annulus_tol_{name}"])
        ann = kernels.cancellation_check(shape, frozen, 0, 0, 0.5, 1.0,
                                         n_radial=int(cp["kernels"]["radial_nodes"]))
        mean = kernels.sphere_mean(shape, frozen, 0, 0)
        checks += [
            _check(f"{name}/annulus_cancellation", abs(ann), tol),
            _check(f"{name}/sphere_mean_polar", abs(mean), 1e-6),
        ]
        pts = rng.uniform(-1, 1, size=(100, shape.N + 1))
        pts[:, -1] = np.abs(pts[:, -1]) + 0.3
        pde = kernels.pde_residual_probe(shape, frozen, pts,
                                         h=float(cp["kernels"]["pde_h"]))
        checks += [
            _check(f"{name}/pde_residual", pde["residual"],
                   1e-4 * pde["hess_scale"]),
            _check_range(f"{name}/pde_order_ratio", pde["ratio"], 3.0, 5.0),
        ]
        alpha = kernels.alpha_coeff(shape, frozen, 0, 0)
        growth = kernels.growth_bound_check(shape, frozen, 0, 0, seed=seed)
        checks.append(_check(f"{name}/growth_bound_gap", growth["rel_gap"], 0.10))
        kernels.check_golden_table(shape, frozen, gdir / f"gamma_{name}.csv",
                                   rtol=float(cp["kernels"]["golden_rtol"]))
        checks.append(_check(f"{name}/golden_table", 0.0, 0.5))
        tables["values"].append({
            "shape": name, "alpha_11": alpha, "annulus": ann,
            "sphere_mean": mean, "pde_residual": pde["residual"],
            "pde_ratio": pde["ratio"],
            "smoothness_d4": kernels.sphere_smoothness_probe(shape, frozen, 0, 0),
        })
    return {"suite": "kernels", "checks": checks, "tables": tables, "curves": {}}


# -- harmonics ------------------------------------------------------------------

def run_harmonics(cp, seed: int) -> dict:
    checks, tables, curves = [], {"expansion": []}, {}
    m_max = int(cp["harmonics"]["m_max"])
    lo, hi = int(cp["harmonics"]["decay_lo"]), int(cp["harmonics"]["decay_hi"])
    checks += [
        _check("g_m/S2_m1", abs(harmonics.basis_dim(2, 1) - 3), 0.5),
        _check("g_m/S2_m2", abs(harmonics.basis_dim(2, 2) - 5), 0.5),
        _check("g_m/circle", abs(harmonics.basis_dim(1, 5) - 2), 0.5),
    ]
    rng = np.random.default_rng(seed)
    for name, shape in _shapes().items():
        frozen = kernels.frozen_identity(shape)
        basis = harmonics.build_basis(shape, m_max)
        rule = basis.gram_rule
        Y = basis.eval(rule.pts)
        # orthonormality against the declared sphere measure, m <= 8
        top = basis.offsets[9]
        G = Y[:, :top].T @ (rule.w_polar[:, None] * Y[:, :top])
        checks.append(_check(f"{name}/orthonormality_m_le_8",
                             np.max(np.abs(G - np.eye(top))),
                             float(cp["harmonics"]["ortho_tol"])))
        e = harmonics.expand_coeffs(shape, frozen, 0, 0, m_max, basis=basis)
        checks.append(_check(f"{name}/m0_coefficient", abs(e.coeff(0, 1)),
                             float(cp["harmonics"]["m0_tol"])))
        import kfplab
        from pathlib import Path
        harmonics.check_coeff_table(
            e, Path(kfplab.__file__).parent / "goldens" / f"coeffs_{name}_11_m16.csv")
        checks.append(_check(f"{name}/golden_coefficients", 0.0, 0.5))
        slope = harmonics.decay_slope(e, lo, hi)
        # KNOWN SPEC DEFECT: the canonical kernels have boundary layers of
        # angular width ~0.05, so the asymptotic decay starts near m ~ 30-60
        # and the slope on [4,16] plateaus; see the decisions ledger.  The
        # check is implemented as stated and reported honestly.
        checks.append(_check(f"{name}/coefficient_decay_slope_[{lo},{hi}]",
                             slope, -2.0,
                             note="known spec defect: pre-asymptotic window"))
        curves[f"decay_{name}"] = {
            "m": list(range(1, m_max + 1)),
            "max_coeff": [float(v) for v in e.max_per_degree()[1:]],
        }
        if shape.N == 1:
            alo = int(cp["harmonics"]["asymptotic_lo"])
            ahi = int(cp["harmonics"]["asymptotic_hi"])
            big = harmonics.build_basis(shape, ahi)
            e_big = harmonics.expand_coeffs(shape, frozen, 0, 0, ahi, basis=big)
            tail = harmonics.decay_slope(e_big, alo, ahi)
            checks.append(_check(
                f"{name}/coefficient_decay_slope_[{alo},{ahi}]_asymptotic",
                tail, -2.0))
            curves[f"decay_{name}_full"] = {
                "m": list(range(1, ahi + 1)),
                "max_coeff": [float(v) for v in e_big.max_per_degree()[1:]],
            }
            rec = harmonics.reconstruction_error(
                shape, frozen, e_big, m_values=[4, 8, 16, 64, ahi], seed=seed)
            vals = list(rec.values())
            checks.append(_check(f"{name}/reconstruction_monotone",
                                 max(b - a for a, b in zip(vals, vals[1:])), 0.0))
            # absolute summability of c_km |c^{km}|: the last quarter of the
            # degree range contributes a vanishing share of the total
            sups = big.sup_norms(seed=seed)
            per_deg = e_big.max_per_degree()
            weights_sum = np.array([
                float(np.max(sups[big.offsets[m]:big.offsets[m + 1]])) * per_deg[m]
                * harmonics.basis_dim(shape.N, m) for m in range(1, ahi + 1)])
            tail_share = float(np.sum(weights_sum[(3 * ahi) // 4:])
                               / np.sum(weights_sum))
            checks.append(_check(f"{name}/absolute_summability_tail_share",
                                 tail_share, 0.10))
        # kernel homogeneity and sphere means
        z = rng.uniform(-2, 2, size=(400, shape.N + 1))
        rho = geometry.hom_norm_many(shape, z)
        r = rng.uniform(0.2, 4.0, size=400)
        worst = 0.0
        for (m, k) in [(1, 1), (2, 1), (4, 2), (8, 1)]:
            v = harmonics.eval_K(basis, shape, m, k, z)
            vr = harmonics.eval_K(basis, shape, m, k,
                                  geometry.dilate_many(shape, r, z))
            y1 = v * rho ** (shape.Q + 2.0)
            y2 = vr * (r * rho) ** (shape.Q + 2.0)
            worst = max(worst, float(np.max(np.abs(y2 - y1)) / np.max(np.abs(y1))))
        checks.append(_check(f"{name}/K_homogeneity", worst, 1e-10))
        worst_mean = max(abs(rule.integrate(
            harmonics.eval_K(basis, shape, m, k, rule.pts), measure="polar"))
            for (m, k) in [(1, 1), (2, 1), (4, 2), (8, 1)])
        checks.append(_check(f"{name}/K_sphere_mean", worst_mean, 1e-8))
        beta = 1.0 if shape.N == 1 else 0.5
        hp = harmonics.hormander_probe(basis, shape, [1, 2, 4, 8], beta=beta,
                                       n_samples=300, seed=seed)
        checks.append(_check(f"{name}/hormander_slope", hp["slope"],
                             (shape.N + 1) / 2.0 + 0.5))
        tables["expansion"].append({
            "shape": name, "m0": e.coeff(0, 1), "window_slope": slope,
            "tail_estimate": e.tail_estimate,
            "hormander_slope": hp["slope"],
        })
    return {"suite": "harmonics", "checks": checks, "tables": tables,
            "curves": curves}


# -- dyadic ---------------------------------------------------------------------

def run_dyadic(cp, seed: int) -> dict:
    checks, tables = [], {"grids": [], "cz": []}
    stability = float(cp["dyadic"]["doubling_stability"])
    lam = float(cp["dyadic"]["cz_lambda"])
    boxes = {
        "parabolic": [lattice.Box((-2.0, 0.0), (2.0, 4.0), (24, 48)),
                      lattice.Box((-2.0, 0.0), (2.0, 4.0), (48, 96))],
        "kolmogorov": [lattice.Box((-2.0, -2.0, 0.0), (2.0, 2.0, 4.0), (8, 32, 16)),
                       lattice.Box((-2.0, -2.0, 0.0), (2.0, 2.0, 4.0), (16, 64, 32))],
    }
    shapes = _shapes()
    for name, (base, refined) in boxes.items():
        shape = shapes[name]
        run_consts = []
        for box in (base, refined):
            fam = dyadic.build_grids(shape, box, delta=float(cp["dyadic"]["delta"]),
                                     L=int(cp["dyadic"]["grids"]), seed=seed,
                                     min_scale_cells=float(cp["dyadic"]["min_scale_cells"]))
            grid = fam.grids[0]
            # partition / nesting / lineage asserted at construction; record
            checks.append(_check(f"{name}/{box.resolution}/axioms_exact", 0.0, 0.5))
            f = lattice.sample(lambda p: np.exp(
                -np.sum((p - 0.5 * (np.asarray(box.lower) + np.asarray(box.upper))) ** 2,
                        axis=1)), box)
            g, parts, rep = dyadic.cz_decompose(grid, f, lam)
            recon = g.values.copy()
            mean_zero = 0.0
            for cube, cells, h in parts:
                recon[cells] += h
                mean_zero = max(mean_zero, abs(float(np.sum(h))))
            checks += [
                _check(f"{name}/{box.resolution}/cz_reconstruction",
                       np.max(np.abs(recon - f.values)), 1e-12),
                _check(f"{name}/{box.resolution}/cz_mean_zero", mean_zero, 1e-9),
                _check(f"{name}/{box.resolution}/cz_measure_bound",
                       rep["sum_measures"] / max(rep["measure_bound"], 1e-300), 1.0),
                _check(f"{name}/{box.resolution}/cz_sup_bound",
                       rep["g_sup"] / (rep["doubling"] * lam), 1.0),
            ]
            run_consts.append(rep["g_sup"] / lam)
            tables["cz"].append({"shape": name, "resolution": str(box.resolution),
                                 "n_parts": rep["n_parts"],
                                 "run_constant": rep["g_sup"] / lam,
                                 "tree_doubling": rep["doubling"]})
            tables["grids"].append({"shape": name, "resolution": str(box.resolution),
                                    "levels": grid.n_levels,
                                    "C1": grid.C1,
                                    "straddlers": grid.straddler_fraction})
        drift = abs(run_consts[1] - run_consts[0]) / max(run_consts[0], 1e-300)
        checks.append(_check(f"{name}/cz_constant_stability", drift, stability))
    return {"suite": "dyadic", "checks": checks, "tables": tables, "curves": {}}


# -- operators ------------------------------------------------------------------

def _kernel_subset(shape, k_subset):
    kms = []
    for m in range(1, 9):
        g = harmonics.basis_dim(shape.N, m)
        ks = sorted(set([1, (g + 1) // 2, g]))[:k_subset]
        kms += [(m, k) for k in ks]
    return kms


def run_operators(cp, seed: int) -> dict:
    checks, tables, curves = [], {"l2": [], "weak": []}, {}
    k_subset = int(cp["operators"]["k_subset"])
    for name in ("parabolic", "kolmogorov"):
        lab = workbench.build_lab(name, seed=seed)
        corpus = workbench.field_corpus(lab, seed=seed)
        F = np.stack([f.values for f in corpus], axis=1)
        kms = _kernel_subset(lab.shape, k_subset)
        tvals, _ = operators.kernel_sweep(lab.geom, lab.basis, kms, F,
                                          lab.eps, lab.far)
        norms_f = np.linalg.norm(F, axis=0)
        ratios = np.linalg.norm(tvals, axis=1) / norms_f[None, :]
        per_m = {}
        for q, (m, k) in enumerate(kms):
            per_m[m] = max(per_m.get(m, 0.0), float(np.max(ratios[q])))
        ms = np.array(sorted(per_m))
        slope = float(np.polyfit(np.log(ms), np.log([per_m[m] for m in ms]), 1)[0])
        bound = (lab.shape.N + 1) / 2.0 + 0.5
        checks += [
            _check(f"{name}/l2_ratio_finite", max(per_m.values()), 1e6),
            _check(f"{name}/l2_slope", slope, bound),
        ]
        curves[f"l2_{name}"] = {"m": [int(m) for m in ms],
                                "ratio": [per_m[m] for m in ms]}
        # weak (1,1) for T and the truncated maximal operator; pointwise bound
        op = lab.op(2, 1)
        vol = lab.box.cell_volume
        wt = operators.weak_l1_probe(lambda f: op.apply(f.values), corpus, vol)
        wsharp = operators.weak_l1_probe(
            lambda f: operators.grand_maximal(op, lab.family, f, seed=seed).values,
            corpus[:3], vol)
        worst_pt = 0.0
        for f in corpus[:3]:
            msh = operators.grand_maximal(op, lab.family, f, seed=seed)
            mf, _ = dyadic.hl_maximal(lab.family, f)
            pos = mf.values > 0
            if np.any(msh.values[~pos] != 0.0):
                worst_pt = np.inf
            worst_pt = max(worst_pt, float(np.max(msh.values[pos] / mf.values[pos])))
        ckm = lab.c_km(2, 1)
        checks += [
            _check(f"{name}/weak11_T", wt["max_ratio"], 1e6),
            _check(f"{name}/weak11_Msharp", wsharp["max_ratio"], 1e6),
            _check(f"{name}/pointwise_Msharp_le_CMf", worst_pt, 100.0 * ckm),
        ]
        tables["l2"].append({"shape": name, "slope": slope, "bound": bound,
                             **{f"m{m}": per_m[m] for m in per_m}})
        tables["weak"].append({"shape": name, "T_ratio": wt["max_ratio"],
                               "Msharp_ratio": wsharp["max_ratio"],
                               "pointwise_C": worst_pt,
                               "cancellation_defect": operators.cancellation_defect(op)})
    return {"suite": "operators", "checks": checks, "tables": tables,
            "curves": curves}


# -- sparse ---------------------------------------------------------------------

def run_sparse(cp, seed: int) -> dict:
    checks, tables = [], {"domination": []}
    m_values = cfgmod.get_ints(cp, "sparse", "m_values")
    budget = float(cp["sparse"]["budget"])
    stability = float(cp["sparse"]["stability"])
    kw = dict(lam=float(cp["sparse"]["lam"]),
              min_cells=int(cp["sparse"]["min_cells"]),
              alpha0=float(cp["sparse"]["alpha0"]))
    for name in ("parabolic", "kolmogorov"):
        lab = workbench.build_lab(name, seed=seed)
        f = workbench.field_corpus(lab, seed=seed)[0]
        b = lab.sample(lambda p: 0.3 * np.sin(p[:, 0]) * np.cos(p[:, -1]), name="b")
        root = lab.root_cube(0)
        base_consts = {}
        ops_list = lab.ops_for([(m, 1) for m in m_values])
        for m, op in zip(m_values, ops_list):
            for mode, symbol in (("plain", None), ("commutator", b)):
                rep = sparse.verify_domination(lab, root, f, op, mode=mode,
                                               b=symbol, budget=budget,
                                               seed=seed, **kw)
                srep = rep["family"].check_sparseness()
                checks += [
                    _check(f"{name}/m{m}/{mode}/exceptional", rep["exceptional"], budget),
                    _check(f"{name}/m{m}/{mode}/packing",
                           srep["max_child_fraction"], 0.5),
                    _check(f"{name}/m{m}/{mode}/witness",
                           -srep["min_witness_fraction"], -0.5),
                ]
                base_consts[(m, mode)] = rep["constant"]
                tables["domination"].append({
                    "shape": name, "m": m, "mode": mode,
                    "constant": rep["constant"], "n_nodes": rep["n_nodes"],
                    "exceptional": rep["exceptional"]})
        lab.drop_ops()
        # refinement stability at m = 2, both modes
        rlab = workbench.build_lab(name, resolution=workbench.REFINED_RESOLUTIONS[name],
                                   seed=seed)
        rf = workbench.field_corpus(rlab, seed=seed)[0]
        rb = rlab.sample(lambda p: 0.3 * np.sin(p[:, 0]) * np.cos(p[:, -1]), name="b")
        rop = rlab.op(2, 1)
        for mode, symbol in (("plain", None), ("commutator", rb)):
            rep = sparse.verify_domination(rlab, rlab.root_cube(0), rf, rop,
                                           mode=mode, b=symbol, budget=budget,
                                           seed=seed, **kw)
            drift = (abs(rep["constant"] - base_consts[(2, mode)])
                     / max(base_consts[(2, mode)], 1e-300))
            checks.append(_check(f"{name}/m2/{mode}/refinement_stability",
                                 drift, stability))
            tables["domination"].append({
                "shape": name + "_refined", "m": 2, "mode": mode,
                "constant": rep["constant"], "n_nodes": rep["n_nodes"],
                "exceptional": rep["exceptional"]})
        rlab.drop_ops()
    # flagship assembly: the Hessian is pointwise dominated by the sparse
    # right-hand side built from per-kernel families (constant coefficients)
    lab = workbench.build_lab("parabolic", seed=seed)
    u = lattice.bump(2, center=(0.0, 2.0), radii=(1.2, 1.4))
    coeff = lattice.CoefficientField.constant(lab.shape, lab.box, [[1.0]], 1.5)
    rep = sparse.representation_domination(
        lab, u, coeff, kms=[(1, 1), (1, 2), (2, 1), (2, 2), (4, 1), (8, 1)],
        seed=seed, **kw)
    checks.append(_check("parabolic/representation_assembly_exceptional",
                         rep["exceptional"], budget))
    tables["domination"].append({"shape": "parabolic", "m": -1,
                                 "mode": "assembly", "constant": rep["kappa"],
                                 "n_nodes": 0, "exceptional": rep["exceptional"]})
    lab.drop_ops()
    return {"suite": "sparse", "checks": checks, "tables": tables, "curves": {}}


# -- weights --------------------------------------------------------------------

def run_weights(cp, seed: int) -> dict:
    checks, tables, curves = [], {"sweep": []}, {}
    lab = workbench.build_lab("parabolic", seed=seed)
    cubes = lab.family.cube_catalog(min_cells=2, skip_cell_level=True)
    one = lab.sample(lambda p: np.ones(len(p)))
    checks.append(_check("ap_of_one", abs(spaces.ap_characteristic(one, 2.0, cubes) - 1.0),
                         1e-14))
    w = lab.sample(lambda p: np.exp(0.4 * np.sin(p[:, 0]) + 0.2 * p[:, 1]))
    weight = spaces.Weight(w)
    dual_gap = 0.0
    for p in (1.5, 2.0, 3.0):
        cw = spaces.ap_characteristic(w, p, cubes)
        cs = spaces.ap_characteristic(weight.dual(p), p / (p - 1.0), cubes)
        dual_gap = max(dual_gap, abs(cs - cw ** (1.0 / (p - 1.0))) / cs)
    checks.append(_check("ap_duality_identity", dual_gap, 1e-8))

    for p in cfgmod.get_floats(cp, "weights", "p_values"):
        key = "gamma_factors_p15" if abs(p - 1.5) < 1e-9 else "gamma_factors"
        factors = cfgmod.get_floats(cp, "weights", key)
        rep = estimates.weighted_hessian_sweep(lab, p, gamma_factors=factors,
                                               seed=seed)
        checks.append(_check(f"p{p:g}/char_spread", -rep["char_spread"], -100.0))
        if abs(p - 2.0) < 1e-9:
            checks.append(_check_range("p2/sparse_exponent",
                                       rep["sparse_exponent"], 0.5, 1.25))
        else:
            checks.append(_check(f"p{p:g}/sparse_exponent",
                                 rep["sparse_exponent"], 2.25))
        checks.append(_check(f"p{p:g}/pde_exponent", rep["pde_exponent"],
                             rep["target_exponent"] + 0.25))
        for row in rep["rows"]:
            tables["sweep"].append({"p": p, **row})
        curves[f"sweep_p{p:g}"] = {
            "char": [r["char"] for r in rep["rows"]],
            "ratio": [r["sparse_ratio"] for r in rep["rows"]],
            "exponent": rep["sparse_exponent"],
        }

    # commutator sparse bound scales linearly in the oscillation amplitude
    f = workbench.field_corpus(lab, seed=seed)[0]
    op = lab.op(2, 1)
    fam = sparse.build_sparse_family(lab, lab.root_cube(0), f, op, seed=seed)
    base = lab.sample(lambda p: np.sin(2.0 * p[:, 0]) * np.cos(p[:, 1]), name="b")
    deltas = np.array(cfgmod.get_floats(cp, "weights", "delta_sweep"))
    norms, comps = [], []
    for d in deltas:
        b = base.with_values(d * base.values)
        osc = sparse.apply_sparse(fam, f, "osc", b=b)
        norms.append(lattice.integrate(osc, p=2.0))
        comp = sparse.augmented_composition_check(lab, fam, b, f)
        comps.append(comp["constant"])
    slope_osc = float(np.polyfit(np.log(deltas), np.log(norms), 1)[0])
    slope_comp = float(np.polyfit(np.log(deltas), np.log(comps), 1)[0])
    checks += [
        _check_range("commutator_delta_slope", slope_osc, 0.7, 1.3),
        _check_range("composition_delta_slope", slope_comp, 0.7, 1.3),
    ]
    curves["delta_sweep"] = {"delta": deltas.tolist(), "norm": norms,
                             "composition": comps}
    return {"suite": "weights", "checks": checks, "tables": tables,
            "curves": curves}


# -- orlicz / function spaces ----------------------------------------------------

def run_orlicz(cp, seed: int) -> dict:
    checks, tables = [], {"spaces": []}
    rng = np.random.default_rng(seed)
    lab = workbench.build_lab("parabolic", seed=seed)
    corpus = workbench.field_corpus(lab, seed=seed)
    vol = lab.box.cell_volume
    cubes = lab.family.cube_catalog(min_cells=2, skip_cell_level=True)

    gap = 0.0
    for p in (1.5, 2.0, 3.0):
        for f in corpus[:3]:
            lux = spaces.luxemburg_norm(lambda s: s ** p, f.values, vol)
            gap = max(gap, abs(lux - lattice.integrate(f, p=p)))
    checks.append(_check("luxemburg_matches_lp", gap, 1e-8))

    f = corpus[0]
    norm = spaces.luxemburg_norm(lambda s: s ** 2, f.values, vol)
    checks.append(_check("unit_ball_property",
                         spaces.modular(lambda s: s ** 2, f.values / norm, vol), 1.0))

    a = lab.sample(lambda p: 0.5 + 0.5 * np.sin(p[:, 0]) * np.sin(p[:, 1]))
    phi = spaces.PhiFunction("double_phase", p=2.0, q=3.0, a_field=a)
    rep = spaces.phi_checks(phi, lab.box, cubes, corpus=corpus[:3], seed=seed)
    checks.append(_check("phi_conditions_A0", -rep["A0_alpha"], 0.0))
    worst = 0.0
    n_pairs = int(cp["orlicz"]["holder_pairs"])
    for _ in range(n_pairs):
        fv = rng.normal(size=lab.geom.n) * rng.uniform(0.1, 5.0)
        gv = rng.normal(size=lab.geom.n) * rng.uniform(0.1, 5.0)
        lhs = float(np.sum(np.abs(fv * gv)) * vol)
        nf = spaces.luxemburg_norm(lambda s: phi(s), fv, vol)
        ng = spaces.luxemburg_norm(lambda s: phi.conjugate_values(s), gv, vol)
        worst = max(worst, lhs / (nf * ng))
    checks.append(_check("holder_ratio", worst, 2.0))

    # maximal operator boundedness ratios, stable under refinement
    stability = float(cp["orlicz"]["stability"])
    ratios = []
    for kind_lab in (lab, workbench.build_lab(
            "parabolic", resolution=workbench.REFINED_RESOLUTIONS["parabolic"],
            seed=seed)):
        cc = workbench.field_corpus(kind_lab, seed=seed)
        a2 = kind_lab.sample(lambda p: 0.5 + 0.5 * np.sin(p[:, 0]) * np.sin(p[:, 1]))
        phi2 = spaces.PhiFunction("double_phase", p=2.0, q=3.0, a_field=a2)
        vol2 = kind_lab.box.cell_volume

        def norm_phi(field):
            return spaces.luxemburg_norm(lambda s: phi2(s), field.values, vol2)

        def maximal(field):
            return dyadic.hl_maximal(kind_lab.family, field)[0]

        probe = spaces.maximal_probe(norm_phi, maximal, cc[:4])
        ratios.append(probe["max_ratio"])
        tables["spaces"].append({"resolution": str(kind_lab.box.resolution),
                                 "maximal_ratio": probe["max_ratio"]})
    drift = abs(ratios[1] - ratios[0]) / max(ratios[0], 1e-300)
    checks += [
        _check("maximal_ratio_finite", ratios[0], 1e6),
        _check("maximal_ratio_stability", drift, stability),
    ]
    # variable exponent: log-Holder constant and weighted characteristic
    pexp = spaces.VariableExponent(
        lab.sample(lambda p: 2.0 + 0.25 * np.sin(p[:, 0]) * np.cos(p[:, 1])),
        1.5, 2.5)
    c0 = spaces.log_holder_constant(lab.shape, pexp, lab.box.centers(), seed=seed)
    wv = lab.power_weight(0.5)
    var_char = spaces.variable_ap_characteristic(wv, pexp, cubes[:60])
    checks += [
        _check("log_holder_constant", c0, 1e3),
        _check("variable_ap_finite", var_char, 1e6),
    ]
    tables["spaces"].append({"resolution": "log_holder", "maximal_ratio": c0})
    return {"suite": "orlicz", "checks": checks, "tables": tables, "curves": {}}


# -- estimates ------------------------------------------------------------------

def run_estimates(cp, seed: int) -> dict:
    checks, tables, curves = [], {"representation": [], "theorems": []}, {}
    sec = cp["estimates"]
    stability = float(sec["stability"])
    shapes = _shapes()
    rep_errors = {}
    for name in ("parabolic", "kolmogorov"):
        shape = shapes[name]
        res = tuple(cfgmod.get_ints(cp, "estimates", f"{name}_resolution"))
        res_fine = tuple(cfgmod.get_ints(cp, "estimates", f"{name}_refined"))
        if name == "parabolic":
            box = lattice.Box((-2.0, 0.0), (2.0, 4.0), res)
            box_fine = lattice.Box((-2.0, 0.0), (2.0, 4.0), res_fine)
            u = lattice.bump(2, center=(0.0, 2.0), radii=(1.2, 1.4))
        else:
            box = lattice.Box((-2.0, -2.0, 0.0), (2.0, 2.0, 4.0), res)
            box_fine = lattice.Box((-2.0, -2.0, 0.0), (2.0, 2.0, 4.0), res_fine)
            u = lattice.bump(3, center=(0.0, 0.0, 2.0), radii=(1.2, 1.2, 1.4))
        coeff = lattice.CoefficientField.constant(shape, box, np.eye(shape.s[0]), 1.5)
        m_values = cfgmod.get_ints(cp, "estimates", f"m_values_{name}")
        epsc = float(sec[f"eps_cells_{name}"])
        rep = estimates.hessian_via_representation(
            shape, coeff, u, box, m_values=m_values,
            n_eval=int(sec["n_eval"]), eps_cells=epsc, seed=seed,
            margin_cells=int(sec["margin_cells"]))
        errs = rep["errors"]
        if name == "parabolic":
            bound = float(sec["parabolic_error_bound"])
            checks.append(_check(f"{name}/representation_error", errs[max(errs)],
                                 bound))
            mono = max(errs[b] - errs[a]
                       for a, b in zip(sorted(errs), sorted(errs)[1:]))
            checks.append(_check(f"{name}/representation_monotone", mono, 0.0))
            crit_m = max(errs)
        else:
            crit_m = int(sec["kolmogorov_criterion_m"])
            bound = float(sec["kolmogorov_error_bound"])
            checks.append(_check(f"{name}/representation_error", errs[crit_m],
                                 bound))
        coeff_fine = lattice.CoefficientField.constant(shape, box_fine,
                                                       np.eye(shape.s[0]), 1.5)
        rep_fine = estimates.hessian_via_representation(
            shape, coeff_fine, u, box_fine, m_values=(crit_m,),
            n_eval=max(48, int(sec["n_eval"]) // 2), eps_cells=epsc,
            seed=seed, margin_cells=int(sec["margin_cells"]))
        checks.append(_check(f"{name}/representation_refinement_shrinks",
                             rep_fine["errors"][crit_m], errs[crit_m]))
        rep_errors[name] = errs
        tables["representation"].append({
            "shape": name, "resolution": str(res),
            **{f"err_m{m}": e for m, e in errs.items()},
            "err_refined": rep_fine["errors"][crit_m]})
        curves[f"representation_{name}"] = {
            "m": sorted(errs), "error": [errs[m] for m in sorted(errs)]}

    # theorem-level ratios on the operator labs (both spaces), stability
    lab = workbench.build_lab("parabolic", seed=seed)
    rlab = workbench.build_lab("parabolic",
                               resolution=workbench.REFINED_RESOLUTIONS["parabolic"],
                               seed=seed)
    u_corpus = [lattice.bump(2, center=(0.0, 2.0), radii=(1.2, 1.4)),
                lattice.bump(2, center=(0.3, 2.3), radii=(0.9, 1.0))]
    sweep = estimates.weighted_hessian_sweep(lab, 2.0, seed=seed)
    theorem_rows = []
    for which in ("weighted_lebesgue", "orlicz", "weighted_variable"):
        ratios = []
        for each in (lab, rlab):
            if which == "weighted_variable":
                pexp = spaces.VariableExponent(
                    each.sample(lambda q: 2.0 + 0.25 * np.sin(q[:, 0])), 1.5, 2.5)
                rep = estimates.generalized_space_estimate(
                    each, "variable", u_corpus, pexp=pexp,
                    weight=each.power_weight(0.5))
            elif which == "orlicz":
                a = each.sample(lambda q: 0.4 + 0.4 * np.sin(q[:, 0]))
                phi = spaces.PhiFunction("double_phase", p=2.0, q=3.0, a_field=a)
                rep = estimates.generalized_space_estimate(each, "orlicz",
                                                           u_corpus, phi=phi)
            else:
                rep = estimates.generalized_space_estimate(
                    each, "lebesgue", u_corpus, p=2.0,
                    weight=each.power_weight(0.5))
            ratios.append(rep["max_ratio"])
            checks.append(_check(f"{which}/y_identity", rep["y_identity"], 1e-10))
        drift = abs(ratios[1] - ratios[0]) / max(ratios[0], 1e-300)
        checks += [
            _check(f"{which}/ratio_finite", ratios[0], 1e6),
            _check(f"{which}/ratio_stability", drift, stability),
        ]
        theorem_rows.append({"theorem": which, "ratio": ratios[0],
                             "ratio_refined": ratios[1], "drift": drift})
    # consistency with the fitted sparse exponent
    checks.append(_check("weighted_lebesgue/pde_vs_sparse_exponent",
                         sweep["pde_exponent"],
                         sweep["sparse_exponent"] + 0.35))
    for row, extra in zip(theorem_rows, (
            {"fitted_exponent": sweep["pde_exponent"],
             "sparse_exponent": sweep["sparse_exponent"]}, {}, {})):
        row.update(extra)
        tables["theorems"].append(row)
    return {"suite": "estimates", "checks": checks, "tables": tables,
            "curves": curves}


SUITE_RUNNERS = {
    "geometry": run_geometry,
    "kernels": run_kernels,
    "harmonics": run_harmonics,
    "dyadic": run_dyadic,
    "operators": run_operators,
    "sparse": run_sparse,
    "weights": run_weights,
    "orlicz": run_orlicz,
    "estimates": run_estimates,
}


def run_suite(name: str, cp, seed: int) -> dict:
    if name not in SUITE_RUNNERS:
        raise ValueError(f"unknown suite {name!r}")
    return SUITE_RUNNERS[name](cp, seed)
