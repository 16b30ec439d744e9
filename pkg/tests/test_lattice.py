import numpy as np
import pytest
from numpy.testing import assert_allclose

from kfplab import geometry as geo
from kfplab import lattice as lat
from kfplab.errors import EllipticityError


def unit_box(res=(32, 32)):
    return lat.Box((0.0, 0.0), (1.0, 1.0), res)


def test_sample_constant():
    f = lat.sample(lambda p: np.ones(len(p)), unit_box())
    assert np.all(f.values == 1.0)


def test_bump_compact_support():
    box = lat.Box((-2.0, 0.0), (2.0, 4.0), (64, 64))
    u = lat.bump(2, center=(0.0, 2.0), radii=(0.3, 0.3))
    f = lat.sample(u.value, box)
    pts = box.centers()
    outside = np.max(np.abs(pts - [0.0, 2.0]), axis=1) > 0.3
    assert np.all(f.values[outside] == 0.0)
    assert u.supported_inside(box, margin_cells=4)


def test_cell_center_representation_error_halves():
    # piecewise-constant representation of a quadratic: max error O(h)
    q = lambda p: p[:, 0] ** 2 + 0.5 * p[:, 1] ** 2

    def max_err(res):
        box = unit_box((res, res))
        f = lat.sample(q, box)
        probe = box.centers() + 0.49 * box.spacings
        exact = q(probe)
        return np.max(np.abs(exact - f.values))

    e1, e2 = max_err(25), max_err(50)
    assert e1 / e2 == pytest.approx(2.0, rel=0.15)


def test_integrate_examples():
    box = unit_box((64, 64))
    one = lat.sample(lambda p: np.ones(len(p)), box)
    assert lat.integrate(one) == pytest.approx(1.0, abs=1e-14)
    # ||chi_E||_{L^2} = |E|^{1/2} to one cell volume
    E = lat.sample(lambda p: (p[:, 0] < 0.5).astype(float), box)
    assert lat.integrate(E, p=2.0) == pytest.approx(np.sqrt(0.5), abs=box.cell_volume)


def test_integrate_quadratic_oracle():
    # midpoint sums converge at O(h^2) to the closed form 1/3
    vals = []
    for res in (20, 40):
        box = lat.Box((0.0,), (1.0,), (res,))
        f = lat.sample(lambda p: p[:, 0] ** 2, box)
        vals.append(abs(lat.integrate(f) - 1.0 / 3.0))
    assert vals[0] / vals[1] == pytest.approx(4.0, rel=0.05)


def test_weighted_norm():
    box = unit_box((40, 40))
    f = lat.sample(lambda p: p[:, 0], box)
    w = lat.sample(lambda p: 2.0 * np.ones(len(p)), box)
    direct = (2.0 * np.sum(np.abs(f.values) ** 3) * box.cell_volume) ** (1 / 3)
    assert lat.integrate(f, weight=w, p=3.0) == pytest.approx(direct, rel=1e-12)


def test_separable_derivatives_fd_oracle():
    u = lat.bump(3, center=(0.0, 0.0, 2.0), radii=(1.0, 1.2, 1.5))
    rng = np.random.default_rng(0)
    pts = rng.uniform(-0.8, 0.8, size=(200, 3))
    pts[:, 2] = rng.uniform(1.0, 3.0, size=200)
    h = 1e-6
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = h
        fd = (u.value(pts + e) - u.value(pts - e)) / (2 * h)
        assert_allclose(u.deriv(pts, (axis,)), fd, rtol=1e-6, atol=1e-8)
    e0 = np.array([h, 0, 0])
    fd2 = (u.value(pts + e0) - 2 * u.value(pts) + u.value(pts - e0)) / h ** 2
    assert_allclose(u.deriv(pts, (0, 0)), fd2, rtol=1e-3, atol=1e-3)


def test_apply_L_no_second_derivative_case():
    # u independent of x_1: L u = -d_t u when B = 0
    shape = geo.parabolic_shape()
    box = lat.Box((-2.0, 0.0), (2.0, 4.0), (32, 32))
    coeff = lat.CoefficientField.constant(shape, box, [[1.7]], lam=2.0)
    u = lat.SeparableFunction(2, {1: (np.sin, np.cos, lambda s: -np.sin(s))})
    Lu, Yu = lat.apply_L(shape, coeff, u)
    pts = box.centers()
    assert_allclose(Lu.values, -np.cos(pts[:, 1]), atol=1e-12)
    assert_allclose(Yu.values, Lu.values, atol=1e-14)


def test_apply_L_kolmogorov_drift():
    # u = x_2 phi(t): L u = x_1 phi(t) - x_2 phi'(t)
    shape = geo.kolmogorov_shape()
    box = lat.Box((-2.0, -2.0, 0.0), (2.0, 2.0, 4.0), (16, 16, 16))
    coeff = lat.CoefficientField.constant(shape, box, [[1.0]], lam=1.5)
    u = lat.monomial_time(3, axis=1, phi=np.sin, dphi=np.cos)
    Lu, _ = lat.apply_L(shape, coeff, u)
    pts = box.centers()
    expect = pts[:, 0] * np.sin(pts[:, 2]) - pts[:, 1] * np.cos(pts[:, 2])
    assert_allclose(Lu.values, expect, atol=1e-12)


class _Sum:
    def __init__(self, u, v):
        self.u, self.v, self.name = u, v, "sum"

    def value(self, pts):
        return self.u.value(pts) + self.v.value(pts)

    def deriv(self, pts, axes):
        return self.u.deriv(pts, axes) + self.v.deriv(pts, axes)


def test_apply_L_linearity_and_fd_oracle():
    shape = geo.kolmogorov_shape()
    box = lat.Box((-2.0, -2.0, 0.0), (2.0, 2.0, 4.0), (12, 12, 12))
    coeff = lat.CoefficientField.constant(shape, box, [[1.3]], lam=2.0)
    u = lat.bump(3, center=(0.2, -0.1, 2.0), radii=(1.2, 1.4, 1.3))
    v = lat.bump(3, center=(-0.3, 0.2, 2.2), radii=(1.0, 1.1, 1.2))
    Lu, _ = lat.apply_L(shape, coeff, u)
    Lv, _ = lat.apply_L(shape, coeff, v)
    Lsum, _ = lat.apply_L(shape, coeff, _Sum(u, v))
    assert np.max(np.abs(Lsum.values - Lu.values - Lv.values)) < 1e-12
    pts = box.centers()
    # finite-difference oracle for L u at lattice points
    h = 1e-4
    e = np.eye(3)
    a = coeff.values[:, 0, 0]
    fd = (a * (u.value(pts + h * e[0]) - 2 * u.value(pts) + u.value(pts - h * e[0])) / h ** 2
          + pts[:, 0] * (u.value(pts + h * e[1]) - u.value(pts - h * e[1])) / (2 * h)
          - (u.value(pts + h * e[2]) - u.value(pts - h * e[2])) / (2 * h))
    assert np.max(np.abs(fd - Lu.values)) < 5e-6 * max(1.0, np.max(np.abs(Lu.values)))


def test_coefficient_field_ellipticity():
    shape = geo.parabolic_shape()
    box = lat.Box((-1.0, 0.0), (1.0, 1.0), (8, 8))
    with pytest.raises(EllipticityError):
        lat.CoefficientField.constant(shape, box, [[5.0]], lam=2.0)


def test_field_dump_load_roundtrip(tmp_path):
    box = lat.Box((-1.0, 0.0), (1.0, 2.0), (8, 8))
    f = lat.sample(lambda p: np.sin(p[:, 0] + p[:, 1]), box, name="probe")
    path = tmp_path / "field.csv"
    lat.dump_field(f, path)
    g = lat.load_field(path)
    assert g.box == box
    assert g.name == "probe"
    assert_allclose(g.values, f.values, rtol=0, atol=0)
