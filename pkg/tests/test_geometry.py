import numpy as np
import pytest
from numpy.testing import assert_allclose

from kfplab import geometry as geo
from kfplab.errors import ShapeError


@pytest.fixture(scope="module")
def kshape():
    return geo.kolmogorov_shape()


@pytest.fixture(scope="module")
def pshape():
    return geo.parabolic_shape()


def test_validate_shape_kolmogorov(kshape):
    assert kshape.N == 2
    assert kshape.Q == 4
    assert_allclose(kshape.a, [1.0, 3.0, 2.0])


def test_validate_shape_parabolic(pshape):
    assert pshape.N == 1
    assert pshape.Q == 1
    assert_allclose(pshape.a, [1.0, 2.0])


def test_validate_shape_rejects_lower_block():
    with pytest.raises(ShapeError):
        geo.validate_shape((1, 1), [[0.0, 0.0], [1.0, 0.0]])


def test_validate_shape_rejects_rank_deficiency():
    with pytest.raises(ShapeError):
        geo.validate_shape((1, 1), [[0.0, 0.0], [0.0, 0.0]])


def test_validate_shape_rejects_increasing_blocks():
    with pytest.raises(ShapeError):
        geo.validate_shape((1, 2), np.zeros((3, 3)))


def test_validate_shape_three_blocks():
    # s = (2, 1, 1): Q = 2 + 3 + 5 = 10, exponents (1,1,3,5,2)
    B = np.zeros((4, 4))
    B[0, 2] = 1.0
    B[2, 3] = 1.0
    sh = geo.validate_shape((2, 1, 1), B)
    assert sh.Q == 10
    assert_allclose(sh.a, [1, 1, 3, 5, 2])


def test_translation_matrix(kshape, pshape):
    assert_allclose(geo.translation_matrix(kshape, 1.0), [[1, 0], [-1, 1]])
    assert_allclose(geo.translation_matrix(kshape, 0.0), np.eye(2))
    assert_allclose(geo.translation_matrix(pshape, 3.7), [[1.0]])


def test_group_op_examples(kshape):
    z = np.array([1.0, 0.0, 0.0])
    w = np.array([0.0, 0.0, 1.0])
    assert_allclose(geo.group_op(kshape, z, w), [1.0, -1.0, 1.0])
    assert_allclose(geo.group_op(kshape, np.array([1.0, 0.0, 2.0]), mode="invert"),
                    [-1.0, -2.0, -2.0])


def test_group_identity(kshape):
    rng = np.random.default_rng(7)
    z = rng.uniform(-3, 3, size=(200, 3))
    zz = geo.compose_many(kshape, z, geo.invert_many(kshape, z))
    assert np.max(np.abs(zz)) < 1e-12


def test_group_axioms_random(kshape):
    rng = np.random.default_rng(11)
    n = 10_000
    z = rng.uniform(-2, 2, size=(n, 3))
    w = rng.uniform(-2, 2, size=(n, 3))
    v = rng.uniform(-2, 2, size=(n, 3))
    lhs = geo.compose_many(kshape, geo.compose_many(kshape, z, w), v)
    rhs = geo.compose_many(kshape, z, geo.compose_many(kshape, w, v))
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_dilation_compatibility(kshape):
    rng = np.random.default_rng(13)
    n = 10_000
    z = rng.uniform(-2, 2, size=(n, 3))
    w = rng.uniform(-2, 2, size=(n, 3))
    r = rng.uniform(0.2, 3.0, size=n)
    lhs = geo.dilate_many(kshape, r, geo.compose_many(kshape, z, w))
    rhs = geo.compose_many(kshape, geo.dilate_many(kshape, r, z),
                           geo.dilate_many(kshape, r, w))
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_dilate_examples(kshape):
    assert_allclose(geo.dilate(kshape, 2.0, [1.0, 1.0, 1.0]), [2.0, 8.0, 4.0])
    rng = np.random.default_rng(17)
    z = rng.uniform(-2, 2, size=(10_000, 3))
    r = rng.uniform(0.1, 10.0, size=10_000)
    back = geo.dilate_many(kshape, 1.0 / r, geo.dilate_many(kshape, r, z))
    assert np.max(np.abs(back - z)) < 1e-12


def test_hom_norm_values(kshape):
    assert geo.hom_norm(kshape, [0.0, 0.0, 0.0]) == 0.0
    assert_allclose(geo.hom_norm(kshape, [0.0, 0.0, 4.0]), 2.0, rtol=1e-12)
    # 1/rho^2 + 1/rho^4 = 1  =>  rho = sqrt((1+sqrt(5))/2)
    assert_allclose(geo.hom_norm(kshape, [1.0, 0.0, 1.0]),
                    np.sqrt((1.0 + np.sqrt(5.0)) / 2.0), rtol=1e-12)


def test_hom_norm_parabolic_closed_form(pshape):
    # x^2/r^2 + t^2/r^4 = 1 has closed form r^2 = (x^2 + sqrt(x^4 + 4 t^2))/2
    rng = np.random.default_rng(19)
    z = rng.uniform(-3, 3, size=(500, 2))
    r2 = 0.5 * (z[:, 0] ** 2 + np.sqrt(z[:, 0] ** 4 + 4.0 * z[:, 1] ** 2))
    assert_allclose(geo.hom_norm_many(pshape, z), np.sqrt(r2), rtol=1e-12)


def test_hom_norm_homogeneity(kshape):
    rng = np.random.default_rng(23)
    z = rng.uniform(-2, 2, size=(10_000, 3))
    r = rng.uniform(0.1, 10.0, size=10_000)
    n1 = geo.hom_norm_many(kshape, geo.dilate_many(kshape, r, z))
    n0 = geo.hom_norm_many(kshape, z)
    assert np.max(np.abs(n1 - r * n0) / np.maximum(n0, 1e-30)) < 1e-10


def test_quasi_symmetry_bounded(kshape):
    rng = np.random.default_rng(29)
    z = rng.uniform(-2, 2, size=(4000, 3))
    w = rng.uniform(-2, 2, size=(4000, 3))
    d_zw = geo.quasi_distance_many(kshape, z, w, symmetrize=False)
    d_wz = geo.quasi_distance_many(kshape, w, z, symmetrize=False)
    ratio = d_zw / d_wz
    assert np.isfinite(ratio).all()
    assert ratio.max() < 50.0 and ratio.min() > 1.0 / 50.0
    dt = geo.quasi_distance_many(kshape, z, w)
    assert_allclose(dt, geo.quasi_distance_many(kshape, w, z), rtol=1e-12)


def test_ball_volume_scaling(kshape):
    # |B_r| = r^{Q+2} |B_1| up to Monte Carlo error
    n = 600_000
    v1 = geo.ball_volume_mc(kshape, 1.0, n_samples=n, seed=101)
    v2 = geo.ball_volume_mc(kshape, 2.0, n_samples=n, seed=202)
    assert abs(v2 / 2 ** (kshape.Q + 2) - v1) / v1 < 0.05


def test_ball_volume_translation_invariance(kshape):
    # |B_r(z)| = |B_r(0)|: sample w = z o v with v in the centered box
    rng = np.random.default_rng(31)
    n = 200_000
    r = 1.0
    half = r ** kshape.a
    v = rng.uniform(-1, 1, size=(n, 3)) * half
    z = np.array([0.7, -0.4, 1.3])
    w = geo.compose_many(kshape, v, np.broadcast_to(z, (n, 3)))
    d = geo.quasi_distance_many(kshape, w, z)
    vol_at_z = float(np.prod(2.0 * half)) * float(np.mean(d < r))
    vol_at_0 = geo.ball_volume_mc(kshape, r, n_samples=n, seed=31)
    assert abs(vol_at_z - vol_at_0) / vol_at_0 < 0.05


def test_order_beta_probe_parabolic(pshape):
    rep = geo.order_beta_probe(pshape, sample_count=2000, seed=5)
    assert rep["beta"] == 1.0
    assert rep["ktilde_at_beta"] < 1.0 + 1e-6


def test_order_beta_probe_kolmogorov(kshape):
    rep = geo.order_beta_probe(kshape, sample_count=2000, seed=5)
    assert 0.0 < rep["beta"] <= 1.0
    assert np.isfinite(rep["ktilde_at_beta"])


def test_order_beta_degenerate_triple(kshape):
    # zeta = eta makes the left side vanish identically
    z = np.array([0.3, 0.2, 0.5])
    eta = np.array([1.0, -1.0, 2.0])
    ie = geo.invert_many(kshape, eta[None])
    lhs = geo.compose_many(kshape, z[None], ie) - geo.compose_many(kshape, z[None], ie)
    assert geo.hom_norm_many(kshape, lhs)[0] == 0.0
