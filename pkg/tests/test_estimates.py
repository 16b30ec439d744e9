import numpy as np
import pytest

from kfplab import estimates as est
from kfplab import geometry as geo
from kfplab import lattice as lat
from kfplab import spaces as sp
from kfplab import workbench as wb


@pytest.fixture(scope="module")
def small_parabolic():
    shape = geo.parabolic_shape()
    box = lat.Box((-2.0, 0.0), (2.0, 4.0), (96, 96))
    coeff = lat.CoefficientField.constant(shape, box, [[1.0]], lam=1.5)
    u = lat.bump(2, center=(0.0, 2.0), radii=(1.2, 1.4))
    return shape, box, coeff, u


def test_representation_zero_function(small_parabolic):
    shape, box, coeff, _ = small_parabolic
    zero = lat.SeparableFunction(2, {0: (lambda s: np.zeros_like(np.asarray(s, float)),) * 3})
    lu, _ = lat.apply_L(shape, coeff, zero, box)
    assert np.all(lu.values == 0.0)


def test_representation_error_decreases_in_m(small_parabolic):
    shape, box, coeff, u = small_parabolic
    rep = est.hessian_via_representation(shape, coeff, u, box,
                                         m_values=(2, 4, 8), n_eval=48,
                                         eps_cells=1.2, seed=1)
    errs = rep["errors"]
    assert errs[8] <= errs[4] <= errs[2]
    assert errs[8] < 0.25  # coarse lattice; the desk resolution is tested
    # in the acceptance suite


def test_representation_variable_coefficients(small_parabolic):
    # mildly varying coefficients exercise the per-point freezing and the
    # commutator term; the reconstruction stays close
    shape, box, _, u = small_parabolic
    coeff = lat.CoefficientField.from_callable(
        shape, box,
        lambda p: (1.0 + 0.1 * np.sin(p[:, 0]) * np.cos(p[:, 1]))[:, None, None],
        lam=1.5)
    rep = est.hessian_via_representation(shape, coeff, u, box, m_values=(4,),
                                         n_eval=12, eps_cells=1.2, seed=2)
    assert rep["errors"][4] < 0.35


def test_chain_family_valid(plab):
    fam = est.chain_family(plab, int(plab.geom.n // 2))
    rep = fam.check_sparseness()
    assert rep["max_child_fraction"] <= 0.5
    assert len(fam.nodes) >= 2


def test_weighted_sweep_parabolic(plab):
    rep = est.weighted_hessian_sweep(plab, 2.0)
    assert rep["char_spread"] >= 100.0
    assert 0.5 <= rep["sparse_exponent"] <= 1.25
    assert rep["pde_exponent"] <= rep["target_exponent"] + 0.25
    rep32 = est.weighted_hessian_sweep(plab, 1.5)
    assert rep32["sparse_exponent"] <= 2.25
    chars = [r["char"] for r in rep32["rows"]]
    assert all(b >= a for a, b in zip(chars, chars[1:]))


def test_sobolev_y_identity(plab):
    u = lat.bump(2, center=(0.0, 2.0), radii=(1.2, 1.4))

    def norm2(values, mask):
        v = values if mask is None else values[mask]
        return float(np.sqrt(np.sum(v ** 2) * plab.box.cell_volume))

    rep = est.sobolev_lhs_rhs(plab, u, norm2)
    assert rep["y_identity"] < 1e-10
    assert np.isfinite(rep["ratio"]) and rep["ratio"] > 0


def test_orlicz_power_reduces_to_lebesgue(plab):
    u_corpus = [lat.bump(2, center=(0.0, 2.0), radii=(1.2, 1.4)),
                lat.bump(2, center=(0.4, 2.4), radii=(0.9, 1.1))]
    leb = est.generalized_space_estimate(plab, "lebesgue", u_corpus, p=2.0)
    orl = est.generalized_space_estimate(plab, "orlicz", u_corpus,
                                         phi=sp.PhiFunction("power", p=2.0))
    for a, b in zip(leb["ratios"], orl["ratios"]):
        assert abs(a - b) < 1e-6 * a
    assert leb["y_identity"] < 1e-10


def test_generalized_spaces_finite(plab):
    u_corpus = [lat.bump(2, center=(0.0, 2.0), radii=(1.2, 1.4))]
    a = plab.sample(lambda p: 0.4 + 0.4 * np.sin(p[:, 0]))
    phi = sp.PhiFunction("double_phase", p=2.0, q=3.0, a_field=a)
    orl = est.generalized_space_estimate(plab, "orlicz", u_corpus, phi=phi)
    assert np.isfinite(orl["max_ratio"]) and orl["max_ratio"] > 0
    pexp = sp.VariableExponent(
        plab.sample(lambda p: 2.0 + 0.3 * np.sin(p[:, 0])), 1.5, 2.5)
    w = plab.power_weight(0.5)
    var = est.generalized_space_estimate(plab, "variable", u_corpus,
                                         pexp=pexp, weight=w)
    assert np.isfinite(var["max_ratio"]) and var["max_ratio"] > 0


def test_empty_corpus_skips(plab):
    rep = est.generalized_space_estimate(plab, "lebesgue", [], p=2.0)
    assert rep["max_ratio"] == 0.0
