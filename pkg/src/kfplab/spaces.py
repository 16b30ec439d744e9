"""Weights, BMO classes, variable exponents, and generalized Orlicz machinery.

All suprema over "all cubes/balls" are taken over the dyadic cube catalog of
a grid family; the resulting characteristics are equivalent to the ball-based
ones up to the covering constant, which the dyadic module reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BracketError, ConditionFailure
from .lattice import GridField

__all__ = [
    "Weight",
    "VariableExponent",
    "PhiFunction",
    "ap_characteristic",
    "variable_ap_characteristic",
    "bmo_norms",
    "modular",
    "luxemburg_norm",
    "modular_and_norm",
    "weighted_variable_norm",
    "phi_checks",
    "maximal_probe",
    "log_holder_constant",
]

_LAM_LO, _LAM_HI = 2.0 ** -40, 2.0 ** 40


@dataclass
class Weight:
    """Positive weight field with cached dual weights sigma = w^{-1/(p-1)}."""

    w: GridField
    _duals: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(self.w.values <= 0.0):
            raise ValueError("weights must be strictly positive")

    def dual(self, p: float) -> GridField:
        if p not in self._duals:
            self._duals[p] = self.w.with_values(
                self.w.values ** (-1.0 / (p - 1.0)), name=f"dual[{self.w.name}]")
        return self._duals[p]


def ap_characteristic(w: GridField, p: float, cubes: list) -> float:
    """sup over cubes of <w> <w^{1-p'}>^{p-1} (note 1 - p' = -1/(p-1))."""
    if p <= 1.0:
        raise ValueError("p must exceed 1")
    dual = w.values ** (-1.0 / (p - 1.0))
    best = 0.0
    for cube in cubes:
        cells = cube.cells
        best = max(best, float(np.mean(w.values[cells])
                               * np.mean(dual[cells]) ** (p - 1.0)))
    return best


def bmo_norms(b: GridField, cubes: list, K: float) -> tuple:
    """(sup oscillation over all cubes, sup over cubes of radius < K)."""
    if K <= 0.0:
        raise ValueError("the radius bound must be positive")
    bmo, delta_K = 0.0, 0.0
    for cube in cubes:
        cells = cube.cells
        osc = float(np.mean(np.abs(b.values[cells] - np.mean(b.values[cells]))))
        bmo = max(bmo, osc)
        if cube.radius < K:
            delta_K = max(delta_K, osc)
    return bmo, delta_K


@dataclass
class VariableExponent:
    """Exponent field with 1 < gamma_1 <= p(z) <= gamma_2 < infinity."""

    p: GridField
    gamma1: float
    gamma2: float

    def __post_init__(self):
        v = self.p.values
        if not (1.0 < self.gamma1 <= v.min() and v.max() <= self.gamma2):
            raise ValueError("exponent bounds violated on the lattice")

    def conjugate(self) -> "VariableExponent":
        v = self.p.values
        return VariableExponent(self.p.with_values(v / (v - 1.0), name="p'"),
                                gamma1=self.gamma2 / (self.gamma2 - 1.0),
                                gamma2=self.gamma1 / (self.gamma1 - 1.0))


def log_holder_constant(shape, pexp: VariableExponent, pts: np.ndarray,
                        n_pairs: int = 4000, seed: int = 0) -> float:
    """Smallest C_0 with |p(z) - p(w)| <= C_0 / (-log d(z, w)) over sampled
    close pairs (d < 1/2)."""
    from .geometry import quasi_distance_many
    rng = np.random.default_rng(seed)
    n = len(pts)
    best = 0.0
    got = 0
    while got < n_pairs:
        i = rng.integers(0, n, size=4 * n_pairs)
        j = rng.integers(0, n, size=4 * n_pairs)
        d = quasi_distance_many(shape, pts[i], pts[j])
        ok = (d > 0.0) & (d < 0.5)
        dp = np.abs(pexp.p.values[i[ok]] - pexp.p.values[j[ok]])
        if dp.size:
            best = max(best, float(np.max(dp * (-np.log(d[ok])))))
        got += int(ok.sum())
    return best


# modulars and Luxemburg norms --------------------------------------------------


def modular(phi_of_abs, values: np.ndarray, cell_volume: float) -> float:
    """Integral of phi(z, |f(z)|) as a Riemann sum; ``phi_of_abs`` maps the
    array of |f| values to the array of phi values."""
    return float(np.sum(phi_of_abs(np.abs(values))) * cell_volume)


def luxemburg_norm(phi_of_abs, values: np.ndarray, cell_volume: float,
                   tol: float = 1e-10) -> float:
    """inf{lambda > 0 : modular(f / lambda) <= 1} by bisection.

    The returned value certifies modular(f / norm) <= 1 (unit-ball property
    by construction).
    """
    values = np.abs(np.asarray(values, dtype=float))
    if not np.any(values > 0.0):
        return 0.0

    def rho(lam):
        return float(np.sum(phi_of_abs(values / lam)) * cell_volume)

    lo, hi = _LAM_LO, _LAM_HI
    if rho(hi) > 1.0:
        raise BracketError("modular stays above 1 at the bracket top")
    if rho(lo) <= 1.0:
        return lo
    while hi / lo > 1.0 + tol:
        mid = np.sqrt(lo * hi)
        if rho(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


def modular_and_norm(phi_of_abs, f: GridField, weight: GridField | None = None) -> tuple:
    """(modular, Luxemburg norm); an optional weight multiplies the argument
    (the multiplier convention of weighted variable-exponent spaces)."""
    vals = f.values * weight.values if weight is not None else f.values
    vol = f.box.cell_volume
    return (modular(phi_of_abs, vals, vol),
            luxemburg_norm(phi_of_abs, vals, vol))


def variable_norm(pexp: VariableExponent, f: GridField,
                  weight: GridField | None = None) -> float:
    vals = f.values * weight.values if weight is not None else f.values
    pv = pexp.p.values
    return luxemburg_norm(lambda s: s ** pv, vals, f.box.cell_volume)


def weighted_variable_norm(pexp: VariableExponent, f: GridField,
                           w: GridField) -> float:
    """||f||_{L^{p(.)}(w)} = ||f w||_{L^{p(.)}} (multiplier convention)."""
    return variable_norm(pexp, f, weight=w)


def variable_ap_characteristic(w: GridField, pexp: VariableExponent,
                               cubes: list) -> float:
    """sup over cubes of |P|^{-1} ||w chi_P||_{p(.)} ||w^{-1} chi_P||_{p'(.)}."""
    vol = w.box.cell_volume
    pv = pexp.p.values
    qv = pexp.conjugate().p.values
    best = 0.0
    for cube in cubes:
        cells = cube.cells
        measure = len(cells) * vol
        n1 = luxemburg_norm(lambda s: s ** pv[cells], w.values[cells], vol)
        n2 = luxemburg_norm(lambda s: s ** qv[cells], 1.0 / w.values[cells], vol)
        best = max(best, n1 * n2 / measure)
    return best


# generalized Orlicz Phi-functions ----------------------------------------------


CATALOG = ("power", "weighted_power", "double_phase", "log_perturbed")


@dataclass
class PhiFunction:
    """Phi-function family phi(z, s) from the catalog.

    power:          s^p            (p may be a field)
    weighted_power: a(z) s^p
    double_phase:   s^p + a(z) s^q
    log_perturbed:  s^p + a(z) s^p log(e + s)
    """

    kind: str
    p: float = 2.0
    q: float | None = None
    p_field: GridField | None = None
    a_field: GridField | None = None

    def __post_init__(self):
        if self.kind not in CATALOG:
            raise ValueError(f"unknown Phi-function kind {self.kind!r}")
        if self.kind in ("double_phase",) and self.q is None:
            raise ValueError("double_phase needs q")
        if self.a_field is not None and np.any(self.a_field.values < 0.0):
            raise ValueError("the modulating field must be nonnegative")

    def exponents(self) -> tuple:
        """(p, q) with phi/s^p almost increasing and phi/s^q almost decreasing."""
        pv = self.p_field.values if self.p_field is not None else self.p
        p_lo = float(np.min(pv))
        p_hi = float(np.max(pv))
        if self.kind == "double_phase":
            return p_lo, float(self.q)
        if self.kind == "log_perturbed":
            return p_lo, p_hi + 0.5
        return p_lo, p_hi

    def __call__(self, s: np.ndarray, cells: np.ndarray | None = None) -> np.ndarray:
        """phi(z, s) elementwise; ``s`` aligned with the lattice (or with
        ``cells`` when given)."""
        s = np.asarray(s, dtype=float)

        def pick(fieldobj, default):
            if fieldobj is None:
                return default
            v = fieldobj.values
            return v[cells] if cells is not None else v

        pv = pick(self.p_field, self.p)
        if self.kind == "power":
            return s ** pv
        a = pick(self.a_field, 0.0)
        if self.kind == "weighted_power":
            return a * s ** pv
        if self.kind == "double_phase":
            return s ** pv + a * s ** self.q
        return s ** pv * (1.0 + a * np.log(np.e + s))

    def conjugate_values(self, s: np.ndarray, cells: np.ndarray | None = None,
                         iters: int = 80) -> np.ndarray:
        """phi*(z, s) = sup_t (t s - phi(z, t)) by golden-section on t.

        The objective is concave in t; the bracket grows until the slope is
        negative.
        """
        s = np.abs(np.asarray(s, dtype=float))
        hi = np.ones_like(s)
        for _ in range(200):
            rising = (s * (2.0 * hi) - self(2.0 * hi, cells)) > (s * hi - self(hi, cells))
            if not np.any(rising):
                break
            hi = np.where(rising, 2.0 * hi, hi)
        gr = (np.sqrt(5.0) - 1.0) / 2.0
        a_, b_ = np.zeros_like(s), 2.0 * hi
        c_ = b_ - gr * (b_ - a_)
        d_ = a_ + gr * (b_ - a_)
        fc = s * c_ - self(c_, cells)
        fd = s * d_ - self(d_, cells)
        for _ in range(iters):
            take = fc > fd
            b_ = np.where(take, d_, b_)
            a_ = np.where(take, a_, c_)
            c_ = b_ - gr * (b_ - a_)
            d_ = a_ + gr * (b_ - a_)
            fc = s * c_ - self(c_, cells)
            fd = s * d_ - self(d_, cells)
        t = 0.5 * (a_ + b_)
        return np.maximum(s * t - self(t, cells), 0.0)

    def left_inverse(self, s: np.ndarray, cells: np.ndarray | None = None,
                     tol: float = 1e-10) -> np.ndarray:
        """phi^{-1}(z, s) = inf{t : phi(z, t) >= s} by bisection."""
        s = np.asarray(s, dtype=float)
        lo = np.zeros_like(s)
        hi = np.ones_like(s)
        for _ in range(200):
            need = self(hi, cells) < s
            if not np.any(need):
                break
            hi = np.where(need, hi * 2.0, hi)
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            up = self(mid, cells) >= s
            hi = np.where(up, mid, hi)
            lo = np.where(up, lo, mid)
        return 0.5 * (lo + hi)


def phi_checks(phi: PhiFunction, box, cubes: list, corpus: list | None = None,
               seed: int = 0) -> dict:
    """Verify A0, A1, aInc_p, aDec_q numerically and the Orlicz Holder
    inequality on a corpus; raises ConditionFailure naming the violated
    condition."""
    rng = np.random.default_rng(seed)
    report = {}
    # A0: largest grid alpha with phi(z, alpha) <= 1 <= phi(z, 1/alpha)
    alpha_ok = None
    for alpha in np.linspace(1.0, 0.05, 39):
        if np.all(phi(np.full(box.n_cells, alpha)) <= 1.0) and \
           np.all(phi(np.full(box.n_cells, 1.0 / alpha)) >= 1.0):
            alpha_ok = float(alpha)
            break
    if alpha_ok is None:
        raise ConditionFailure("A0 failed: no unit-normalization witness")
    report["A0_alpha"] = alpha_ok

    # A1 on cubes of measure at most 1, s in [1, 1/|B|]
    beta = np.inf
    for cube in cubes:
        cells = cube.cells
        measure = len(cells) * box.cell_volume
        if measure > 1.0 or len(cells) < 2:
            continue
        svals = np.geomspace(1.0, 1.0 / measure, 8)
        pick = rng.choice(cells, size=min(8, len(cells)), replace=False)
        for s in svals:
            inv = phi.left_inverse(np.full(len(pick), s), cells=pick)
            beta = min(beta, float(inv.min() / max(inv.max(), 1e-300)))
    report["A1_beta"] = float(beta if np.isfinite(beta) else 1.0)
    if report["A1_beta"] <= 0.0:
        raise ConditionFailure("A1 failed: inverse ratio collapsed to zero")

    # aInc_p / aDec_q on a log s-grid
    p_lo, q_hi = phi.exponents()
    sgrid = np.geomspace(1e-3, 1e3, 41)
    cells_probe = rng.choice(box.n_cells, size=min(64, box.n_cells), replace=False)
    vals = np.stack([phi(np.full(len(cells_probe), s), cells=cells_probe)
                     for s in sgrid])
    g_inc = vals / sgrid[:, None] ** p_lo
    L_inc = float(np.max(np.maximum.accumulate(g_inc, axis=0) / np.maximum(g_inc, 1e-300)))
    g_dec = vals / sgrid[:, None] ** q_hi
    L_dec = float(np.max(g_dec / np.maximum(np.minimum.accumulate(g_dec, axis=0), 1e-300)))
    report["aInc_L"] = L_inc
    report["aDec_L"] = L_dec
    if not np.isfinite(L_inc):
        raise ConditionFailure("aInc_p failed")
    if not np.isfinite(L_dec):
        raise ConditionFailure("aDec_q failed")

    # Holder: int f g <= 2 ||f||_phi ||g||_phi*
    if corpus:
        worst = 0.0
        vol = box.cell_volume
        for i in range(len(corpus)):
            for j in range(i + 1, len(corpus)):
                fv = np.abs(corpus[i].values)
                gv = np.abs(corpus[j].values)
                lhs = float(np.sum(fv * gv) * vol)
                nf = luxemburg_norm(lambda s: phi(s), fv, vol)
                ng = luxemburg_norm(lambda s: phi.conjugate_values(s), gv, vol)
                if nf > 0 and ng > 0:
                    worst = max(worst, lhs / (nf * ng))
        report["holder_ratio"] = worst
        if worst > 2.0 + 1e-6:
            raise ConditionFailure(f"Holder constant {worst} exceeds 2")
    return report


def maximal_probe(norm_fn, maximal_fn, corpus: list) -> dict:
    """sup over the corpus of ||Mf|| / ||f|| in a given space."""
    ratios = []
    for f in corpus:
        nf = norm_fn(f)
        if nf == 0.0:
            continue
        ratios.append(norm_fn(maximal_fn(f)) / nf)
    return {"max_ratio": float(np.max(ratios)) if ratios else 0.0,
            "ratios": ratios}
