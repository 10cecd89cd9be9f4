import math

import numpy as np
import pytest

from normbiharm.analytic import (
    GNConstant,
    NoPositiveWindow,
    ProblemParams,
    derive_exponents,
    h_function,
    h_tilde_function,
    hypotheses,
    landscape_h,
    landscape_h_tilde,
    multiplier_bounds,
    phi_at_tbar,
    reference_mass,
    rescale_constants,
    thresholds,
)
from normbiharm.fiber import NormQuadruple, energy

UNIT = GNConstant(1.0)


# ---------------------------------------------------------------- exponents

def test_exponents_at_mass_critical_point():
    g, pbar, pstar = derive_exponents(4, 4.0)
    assert g == pytest.approx(0.5)
    assert pbar == pytest.approx(4.0)
    assert 4.0 * g == pytest.approx(2.0)
    assert math.isinf(pstar)


def test_exponents_reference_dimension():
    g, pbar, pstar = derive_exponents(5, 3.8)
    assert g == pytest.approx(9 / 15.2, rel=1e-14)
    assert 3.8 * g == pytest.approx(2.25, rel=1e-14)
    assert pstar == pytest.approx(10.0)
    assert pbar == pytest.approx(3.6)


def test_exponents_dimension_eight():
    g, pbar, pstar = derive_exponents(8, 3.5)
    assert pbar == pytest.approx(3.0)
    assert pstar == pytest.approx(4.0)
    assert g == pytest.approx(3 / 3.5, rel=1e-14)


@pytest.mark.parametrize("N,p", [(1, 3.0), (5, 2.0), (5, 1.5), (2.5, 3.0)])
def test_exponents_reject(N, p):
    with pytest.raises(ValueError):
        derive_exponents(N, p)


@pytest.mark.parametrize("kw", [dict(a=0.0), dict(a=-1.0), dict(mu=-0.1), dict(p=3.5), dict(p=10.0)])
def test_params_invariants(kw):
    base = dict(N=5, p=3.8, a=1.0, mu=1.0)
    base.update(kw)
    with pytest.raises(ValueError):
        ProblemParams(**base)


def test_pg_above_two_in_supercritical_range():
    for p in np.linspace(3.61, 9.9, 25):
        assert ProblemParams(5, float(p), 1.0, 1.0).pg > 2


def test_low_dimension_has_unbounded_critical_exponent():
    pr = ProblemParams(3, 50.0, 1.0, 1.0)
    assert math.isinf(pr.p_star4)


# ---------------------------------------------------------------- thresholds

def test_c_tilde_unit_constant():
    th = thresholds(ProblemParams(5, 3.8, 1.0, 1.0), UNIT)
    assert th.c_tilde == pytest.approx(3.8 / 2.5 * 0.2**0.25, rel=1e-12)
    # the quoted five-decimal value 1.01650 is a rounding of 1.0164853
    assert th.c_tilde == pytest.approx(1.01650, abs=2e-5)


def test_thresholds_positive_and_mu_zero_admissible():
    for N, p in [(5, 3.8), (6, 3.5), (7, 3.2), (3, 5.0)]:
        th = thresholds(ProblemParams(N, p, 123.0, 0.0), UNIT)
        assert min(th.c_tilde, th.c_upper, th.c_lower) > 0
        assert th.admissible_min_flag


def test_reference_flag_with_estimated_constant(gn, ref_params):
    th = thresholds(ref_params, gn)
    assert th.admissible_min_flag
    assert th.lhs == pytest.approx(0.5 * th.minimum, rel=1e-12)


def test_threshold_equivalence_random_draws():
    rng = np.random.default_rng(42)
    hits = [0, 0]
    for _ in range(400):
        N = int(rng.integers(5, 8))
        pbar, pstar = 2 + 8 / N, 2 * N / (N - 4)
        p = float(rng.uniform(pbar + 0.05, min(pstar, 6.0) - 0.05))
        mu = float(rng.uniform(0.2, 3.0))
        gn = GNConstant(float(rng.uniform(0.05, 1.0)))
        th = thresholds(ProblemParams(N, p, 1.0, mu), gn)
        pg = ProblemParams(N, p, 1.0, mu).pg
        # a at a random multiple of the C~ boundary
        a = (th.c_tilde * rng.uniform(0.2, 5.0) / mu ** (pg - 2)) ** (1 / (p - 2))
        pr = ProblemParams(N, p, float(a), mu)
        lhs_ok = thresholds(pr, gn).lhs < thresholds(pr, gn).c_tilde
        phi, half = phi_at_tbar(pr, gn)
        assert lhs_ok == (phi > half)
        hits[lhs_ok] += 1
    assert min(hits) > 50


# ---------------------------------------------------------------- landscape

def _sign_scan_roots(f, lo, hi):
    t = np.geomspace(lo, hi, 400_001)
    v = f(t)
    idx = np.flatnonzero(np.signbit(v[:-1]) != np.signbit(v[1:]))
    return t[idx], t[idx + 1]


def test_landscape_ordering_and_roots(ref_params, gn):
    ls = landscape_h(ref_params, gn)
    h = h_function(ref_params, gn)
    mua = ref_params.mu * ref_params.a
    assert 0 < mua < ls.r0 < ls.t_bar < ls.r1
    tol = 1e-12 * max(1.0, ls.h_max)
    assert abs(h(np.array([ls.r0]))[0]) <= tol * 10 * ls.r0
    assert abs(h(np.array([ls.r1]))[0]) <= tol * 10 * ls.r1
    assert h(np.array([ls.t_bar]))[0] > 0
    assert h(np.array([mua]))[0] < 0
    lo, hi = _sign_scan_roots(h, 1e-3 * mua, 1e3 * ls.r1)
    assert len(lo) == 2
    assert lo[0] <= ls.r0 <= hi[0] and lo[1] <= ls.r1 <= hi[1]
    # sign pattern (-, +, -)
    t = np.concatenate([np.geomspace(1e-3 * ls.r0, ls.r0 * (1 - 1e-9), 500),
                        np.geomspace(ls.r0 * (1 + 1e-9), ls.r1 * (1 - 1e-9), 500),
                        np.geomspace(ls.r1 * (1 + 1e-9), 1e3 * ls.r1, 500)])
    s = np.sign(h(t))
    assert np.all(s[:500] < 0) and np.all(s[500:1000] > 0) and np.all(s[1000:] < 0)


def test_landscape_rejects_mu_zero_and_inadmissible(ref_params, gn):
    with pytest.raises(NoPositiveWindow):
        landscape_h(ref_params.with_mu(0.0), gn)
    with pytest.raises(NoPositiveWindow):
        landscape_h(ref_params.with_mass(10 * ref_params.a), gn)


def test_landscape_tilde(ref_params, gn):
    tau, r0t, r1t = landscape_h_tilde(ref_params, gn)
    rc = rescale_constants(ref_params)
    ls = landscape_h(ref_params, gn)
    N = ref_params.N
    assert tau == pytest.approx(rc.a_tilde ** (2 - N / 2) * rc.b_tilde * ls.t_bar, rel=1e-10)
    m2 = 2 * ref_params.a * math.sqrt(rc.c_tilde_mass)
    assert 0 < m2 < r0t < tau < r1t
    ht = h_tilde_function(ref_params, gn)
    assert ht(np.array([m2]))[0] < 0
    lo, hi = _sign_scan_roots(ht, 1e-3 * m2, 1e3 * r1t)
    assert lo[0] <= r0t <= hi[0] and lo[1] <= r1t <= hi[1]


def test_scaling_consistency_on_quadruples(ref_params):
    rng = np.random.default_rng(42)
    rc = rescale_constants(ref_params)
    N, p = ref_params.N, ref_params.p
    at, bt = rc.a_tilde, rc.b_tilde
    for _ in range(50):
        mm = ref_params.a**2
        dd = float(np.exp(rng.uniform(-3, 8)))
        gg = math.sqrt(mm * dd) * float(rng.uniform(0.01, 1))
        pp = float(np.exp(rng.uniform(-3, 8)))
        e = energy(NormQuadruple(dd, gg, pp, mm), ref_params)
        ddv, ggv = bt**2 * at ** (4 - N) * dd, bt**2 * at ** (2 - N) * gg
        ppv, mmv = bt**p * at ** (-N) * pp, bt**2 * at ** (-N) * mm
        phi0 = ddv - 2 * ggv - ppv / p
        assert e == pytest.approx(at**N * bt ** (-p) * phi0, rel=1e-10, abs=1e-10 * (dd + pp))
        assert mmv == pytest.approx(rc.c_tilde_mass * mm, rel=1e-12)


# ---------------------------------------------------------------- multipliers

def test_multiplier_bounds(ref_params, gn):
    upper, lower = multiplier_bounds(ref_params, gn)
    assert upper == -0.25
    assert lower < upper
    # hand evaluation of the displayed formula
    pg, g = ref_params.pg, ref_params.gamma_p
    expect = (-(pg - 1) / (4 * (pg - 2)) + (g - 1) * gn.power(3.8)
              * ((pg - 1) / (2 * (pg - 2))) ** pg * ref_params.a ** 1.8)
    assert lower == pytest.approx(expect, rel=1e-14)


def test_ground_multiplier_in_window(ground, ref_params, gn):
    upper, lower = multiplier_bounds(ref_params, gn)
    assert lower < ground.lam < upper


def test_hypotheses_report():
    h = hypotheses(ProblemParams(5, 3.8, 1.0, 1.0))
    assert h["N>=5"] and h["p<4"] and h["N<8"] and h["sign_change_window"]
    h = hypotheses(ProblemParams(3, 5.0, 1.0, 0.0))
    assert not h["N>=5"] and not h["mu>0"]


def test_reference_mass_fraction(gn):
    a = reference_mass(5, 3.8, 1.0, gn, 0.25)
    th = thresholds(ProblemParams(5, 3.8, a, 1.0), gn)
    assert th.lhs == pytest.approx(0.25 * th.minimum, rel=1e-12)
