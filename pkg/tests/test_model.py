import math
from fractions import Fraction

import numpy as np
import pytest

from kwcscheme.model import (PAPER_PARAMS, MobilityField, ModelParams, alpha_of, bound_suite,
                             dq_gamma, dq_gamma_prime, dt_error_bound, dt_existence_bound,
                             estimate_lipschitz, gamma_eps, gamma_eps_prime, gamma_eps_second,
                             gamma_eps_third, lemma42_defect, gamma_function)

P = PAPER_PARAMS

# exact value of the existence bound at the paper constants and dx = 1/50
DT_EXIST_EXACT = Fraction(1, 26010000)
A_EXACT = Fraction(99499, 500)


@pytest.mark.parametrize("kw", [dict(eps=0.0), dict(eps=1.0), dict(delta0=1.5), dict(c=0.0),
                                dict(kappa0=-1.0), dict(kappa=float("nan")), dict(nu=0.0)])
def test_params_rejected(kw):
    with pytest.raises(ValueError):
        ModelParams(**kw)


def test_gamma_values():
    assert gamma_eps(P, 0.0) == 0.01
    assert gamma_eps_prime(P, 0.0) == 0.0
    assert gamma_eps_second(P, 0.0) == pytest.approx(100.0)
    assert gamma_eps(P, 0.02) == pytest.approx(0.022360679774997897, rel=1e-15)


def test_gamma_properties(rng):
    v = rng.standard_normal(10_000) * rng.choice([0.01, 1.0, 100.0], 10_000)
    assert np.all(np.abs(gamma_eps_prime(P, v)) < 1.0)
    assert np.all(gamma_eps(P, v) >= P.eps)
    np.testing.assert_array_equal(gamma_eps_prime(P, -v), -gamma_eps_prime(P, v))
    assert np.all(np.abs(gamma_eps_third(P, v)) <= 3 / P.eps ** 2)
    assert np.all(1.0 / gamma_eps(P, v) <= 1.0 / P.eps)


def test_gamma_derivatives_consistent(rng):
    p = ModelParams(eps=0.3)
    v = rng.uniform(-2, 2, 100)
    h = 1e-6
    for f, df in ((gamma_eps, gamma_eps_prime), (gamma_eps_prime, gamma_eps_second),
                  (gamma_eps_second, gamma_eps_third)):
        fd = (f(p, v + h) - f(p, v - h)) / (2 * h)
        np.testing.assert_allclose(df(p, v), fd, rtol=1e-6, atol=1e-6)


def test_dq_gamma_prime_bounds(rng):
    for eps in (0.01, 0.1, 0.9):
        p = ModelParams(eps=eps)
        u, v = rng.standard_normal((2, 10_000)) * rng.choice([eps, 1.0], (2, 10_000))
        q = dq_gamma_prime(p, u, v)
        assert np.all(q >= 0.0) and np.all(q <= 1.5 / eps)
        assert np.all(np.abs(dq_gamma(p, u, v)) <= 1.0)


def test_dq_gamma_prime_equal_and_opposite():
    p = ModelParams(eps=0.1)
    assert dq_gamma_prime(p, 0.3, 0.3) == pytest.approx(gamma_eps_second(p, 0.3))
    assert dq_gamma_prime(p, 0.0, 0.0) == pytest.approx(10.0)
    assert dq_gamma_prime(p, 0.5, -0.5) == pytest.approx(gamma_eps_prime(p, 0.5) / 0.5)


def test_alpha():
    assert alpha_of(P, 0.0) == P.delta0
    assert alpha_of(P, 1.0) == pytest.approx(0.5 + P.delta0)
    h = np.linspace(0, 1, 101)
    a = alpha_of(P, h)
    assert np.all(a >= P.delta0) and np.all(a <= P.delta0 + 0.5)


def test_existence_bound():
    assert dt_existence_bound(P, 0.02) == pytest.approx(float(DT_EXIST_EXACT), rel=1e-14)
    assert dt_existence_bound(P, 0.04) == pytest.approx(4 * dt_existence_bound(P, 0.02))
    assert dt_existence_bound(ModelParams(eps=0.9, nu=3.0), 1e-3) > 0
    with pytest.raises(ValueError):
        dt_existence_bound(P, 0.0)


def test_error_bound():
    mob = MobilityField.default(P)
    b = dt_error_bound(P, mob, 1.0, dx=0.02)
    assert b.a_const == pytest.approx(float(A_EXACT), rel=1e-14)
    assert b.dt_error == pytest.approx(float(1 / (3 * A_EXACT)), rel=1e-14)
    assert f"{b.dt_error:.3e}" == "1.675e-03"
    assert b.dt_exist == pytest.approx(float(DT_EXIST_EXACT))
    assert b.l_tilde == 1.0
    assert math.isnan(dt_error_bound(P, mob, 1.0).dt_exist)


def test_error_bound_second_branch():
    # small kappa: first branch negative, second is (L+1)/delta0 = 100
    p = ModelParams(kappa=1e-4)
    b = dt_error_bound(p, MobilityField.default(p), 1.0)
    assert b.a_const == pytest.approx(100.0)


def test_error_bound_monotone_in_c1():
    mob = MobilityField.default(P)
    a = [dt_error_bound(P, mob, c).a_const for c in (1.0, 1.5, 2.0, 3.0)]
    assert all(x < y for x, y in zip(a, a[1:]))
    with pytest.raises(ValueError):
        dt_error_bound(P, mob, 0.5)


def test_mobility():
    m = MobilityField.default(P)
    np.testing.assert_array_equal(m.at(0.3, np.linspace(0, 1, 5)), np.full(5, P.delta0))
    assert m.inf_value == P.delta0 and m.lipschitz == 0.0
    with pytest.raises(ValueError):
        MobilityField.constant(0.0)
    with pytest.raises(ValueError):
        MobilityField(lambda t, x: x, lipschitz=-1.0)


def test_lipschitz_estimate(rng):
    f = lambda t, x: 0.02 + 0.01 * np.sin(3 * x) + 0.005 * t
    L = estimate_lipschitz(f, T=1.0)
    assert 0.03 <= L <= 0.035
    m = MobilityField(f, lipschitz=L)
    t1, t2, x1, x2 = rng.uniform(0, 1, (4, 1000))
    lhs = np.abs(m.alpha0(t1, x1) - m.alpha0(t2, x2))
    assert np.all(lhs <= L * (np.abs(t1 - t2) + np.abs(x1 - x2)) + 1e-15)


def test_lemma42_split(rng):
    p = ModelParams(eps=0.05)
    a, b, c, d = rng.standard_normal((4, 2000))
    assert np.max(lemma42_defect(gamma_function(p), a, b, c, d)) <= 1e-12


def test_bound_suite():
    r = bound_suite(samples=2000)
    for name, v in r.items():
        if name.startswith("lemma42"):
            assert v <= 1e-12, name
        elif name == "dq_gamma_prime>=0":
            assert v == 0.0
        elif name == "|gamma'|<1":
            assert v < 1.0
        else:
            assert v <= 1.0, name
