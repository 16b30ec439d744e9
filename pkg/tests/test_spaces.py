import numpy as np
import pytest
from numpy.testing import assert_allclose

from kfplab import dyadic as dy
from kfplab import lattice as lat
from kfplab import spaces as sp
from kfplab.errors import ConditionFailure


@pytest.fixture(scope="module")
def cubes(plab):
    return plab.family.cube_catalog(min_cells=2, skip_cell_level=True)


def test_ap_of_one_is_one(plab, cubes):
    one = plab.sample(lambda p: np.ones(len(p)))
    for p in (1.5, 2.0, 3.0):
        assert sp.ap_characteristic(one, p, cubes) == pytest.approx(1.0, abs=1e-14)


def test_ap_halfstep_brute_force(plab, cubes):
    w = plab.sample(lambda p: np.where(p[:, 0] < 0.0, 2.0, 1.0))
    # independent brute-force sup over the same cube family
    best = 0.0
    for cube in cubes:
        vals = w.values[cube.cells]
        best = max(best, float(np.mean(vals) * np.mean(vals ** -1.0)))
    assert sp.ap_characteristic(w, 2.0, cubes) == pytest.approx(best, rel=1e-12)


def test_ap_duality(plab, cubes):
    w = plab.sample(lambda p: np.exp(0.4 * np.sin(p[:, 0]) + 0.2 * p[:, 1]))
    weight = sp.Weight(w)
    for p in (1.5, 2.0, 3.0):
        cw = sp.ap_characteristic(w, p, cubes)
        cs = sp.ap_characteristic(weight.dual(p), p / (p - 1.0), cubes)
        assert cs == pytest.approx(cw ** (1.0 / (p - 1.0)), rel=1e-8)


def test_power_weight_monotone_in_gamma(plab, cubes):
    vals = [sp.ap_characteristic(plab.power_weight(g), 2.0, cubes)
            for g in np.linspace(0.0, 0.9 * (plab.shape.Q + 2), 6)]
    assert all(b >= a - 1e-10 for a, b in zip(vals, vals[1:]))


def test_variable_ap_constant_exponent(plab, cubes):
    one = plab.sample(lambda p: np.ones(len(p)))
    pf = sp.VariableExponent(plab.sample(lambda p: np.full(len(p), 2.0)), 1.5, 2.5)
    assert sp.variable_ap_characteristic(one, pf, cubes[:50]) == pytest.approx(1.0, rel=1e-6)
    sine = sp.VariableExponent(
        plab.sample(lambda p: 2.0 + 0.3 * np.sin(p[:, 0])), 1.5, 2.5)
    val = sp.variable_ap_characteristic(one, sine, cubes[:50])
    assert np.isfinite(val) and val >= 1.0 - 1e-9


def test_log_holder(plab):
    pf = sp.VariableExponent(
        plab.sample(lambda p: 2.0 + 0.25 * np.sin(p[:, 0]) * np.cos(p[:, 1])),
        1.5, 2.5)
    c0 = sp.log_holder_constant(plab.shape, pf, plab.box.centers(), seed=1)
    assert np.isfinite(c0) and c0 > 0


def test_bmo_norms(plab, cubes):
    const = plab.sample(lambda p: np.full(len(p), 7.0))
    assert sp.bmo_norms(const, cubes, 1.0) == (0.0, 0.0)
    step = plab.sample(lambda p: np.where(p[:, 0] < 0.0, 1.0, 0.0))
    bmo, delta_k = sp.bmo_norms(step, cubes, 1.0)
    brute = max(float(np.mean(np.abs(step.values[c.cells]
                                     - np.mean(step.values[c.cells]))))
                for c in cubes)
    assert bmo == pytest.approx(brute, rel=1e-12)
    assert delta_k <= bmo + 1e-15


def test_luxemburg_matches_lp(plab, pcorpus):
    f = pcorpus[0]
    for p in (1.5, 2.0, 3.0):
        lux = sp.luxemburg_norm(lambda s: s ** p, f.values, plab.box.cell_volume)
        assert lux == pytest.approx(lat.integrate(f, p=p), abs=1e-8)


def test_luxemburg_zero_and_unit_ball(plab, pcorpus):
    assert sp.luxemburg_norm(lambda s: s ** 2, np.zeros(8), 1.0) == 0.0
    f = pcorpus[1]
    vol = plab.box.cell_volume
    norm = sp.luxemburg_norm(lambda s: s ** 2, f.values, vol)
    # unit-ball property: modular at f / norm is at most 1, and slightly
    # below the norm it exceeds 1
    assert sp.modular(lambda s: s ** 2, f.values / norm, vol) <= 1.0
    assert sp.modular(lambda s: s ** 2, f.values / (norm * (1 - 1e-6)), vol) >= 1.0 - 1e-9


def test_luxemburg_homogeneity(plab, pcorpus):
    f = pcorpus[0]
    vol = plab.box.cell_volume
    phi = lambda s: s ** 2 + 0.5 * s ** 3
    n1 = sp.luxemburg_norm(phi, 3.7 * f.values, vol)
    n0 = sp.luxemburg_norm(phi, f.values, vol)
    assert n1 == pytest.approx(3.7 * n0, rel=1e-8)


def test_norm_of_indicator(plab):
    E = plab.sample(lambda p: (p[:, 0] > 0).astype(float))
    measure = float(np.sum(E.values) * plab.box.cell_volume)
    lux = sp.luxemburg_norm(lambda s: s ** 2, E.values, plab.box.cell_volume)
    assert lux == pytest.approx(np.sqrt(measure), rel=1e-8)


def test_phi_conjugate_closed_form():
    phi = sp.PhiFunction("power", p=2.0)
    s = np.linspace(0.1, 5.0, 20)
    assert_allclose(phi.conjugate_values(s), s ** 2 / 4.0, rtol=1e-6)
    phi3 = sp.PhiFunction("power", p=3.0)
    # phi*(s) = (p-1) p^{-p'} s^{p'}
    p, q = 3.0, 1.5
    assert_allclose(phi3.conjugate_values(s), (p - 1.0) * p ** -q * s ** q,
                    rtol=1e-6)


def test_phi_left_inverse():
    phi = sp.PhiFunction("power", p=2.0)
    s = np.array([4.0, 9.0, 0.25])
    assert_allclose(phi.left_inverse(s), np.sqrt(s), rtol=1e-9)


def test_phi_checks_pass_for_catalog(plab, pcorpus, cubes):
    a = plab.sample(lambda p: 0.5 + 0.5 * np.sin(p[:, 0]) * np.sin(p[:, 1]))
    catalog = [
        sp.PhiFunction("power", p=2.0),
        sp.PhiFunction("double_phase", p=2.0, q=3.0, a_field=a),
        sp.PhiFunction("log_perturbed", p=2.0, a_field=a),
        sp.PhiFunction("power", p_field=sp.VariableExponent(
            plab.sample(lambda q: 2.0 + 0.3 * np.sin(q[:, 0])), 1.5, 2.5).p),
    ]
    for phi in catalog:
        rep = sp.phi_checks(phi, plab.box, cubes, corpus=pcorpus[:3], seed=2)
        assert rep["A0_alpha"] > 0
        assert rep["A1_beta"] > 0
        assert np.isfinite(rep["aInc_L"]) and np.isfinite(rep["aDec_L"])
        assert rep.get("holder_ratio", 0.0) <= 2.0


def test_phi_checks_a0_failure():
    # a modulating field that blows up breaks the unit normalization
    box = lat.Box((0.0, 0.0), (1.0, 1.0), (8, 8))
    a = lat.sample(lambda p: np.full(len(p), 1e9), box)
    phi = sp.PhiFunction("weighted_power", p=2.0, a_field=a)
    with pytest.raises(ConditionFailure):
        sp.phi_checks(phi, box, [], corpus=None)


def test_holder_on_random_pairs(plab, cubes):
    rng = np.random.default_rng(11)
    a = plab.sample(lambda p: 0.3 + 0.3 * np.cos(p[:, 1]))
    phi = sp.PhiFunction("double_phase", p=2.0, q=3.0, a_field=a)
    vol = plab.box.cell_volume
    worst = 0.0
    for _ in range(100):
        f = rng.normal(size=plab.geom.n) * rng.uniform(0.1, 5.0)
        g = rng.normal(size=plab.geom.n) * rng.uniform(0.1, 5.0)
        lhs = float(np.sum(np.abs(f * g)) * vol)
        nf = sp.luxemburg_norm(lambda s: phi(s), f, vol)
        ng = sp.luxemburg_norm(lambda s: phi.conjugate_values(s), g, vol)
        worst = max(worst, lhs / (nf * ng))
    assert worst <= 2.0 + 1e-9


def test_maximal_probe(plab, pcorpus):
    vol = plab.box.cell_volume

    def norm2(f):
        return sp.luxemburg_norm(lambda s: s ** 2, f.values, vol)

    def maximal(f):
        return dy.hl_maximal(plab.family, f)[0]

    rep = sp.maximal_probe(norm2, maximal, pcorpus)
    assert np.isfinite(rep["max_ratio"]) and rep["max_ratio"] > 0
    const = plab.sample(lambda p: np.full(len(p), 2.0))
    rep_c = sp.maximal_probe(norm2, maximal, [const])
    assert rep_c["max_ratio"] == pytest.approx(1.0, rel=1e-12)
