from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balllab import identities as idt
from balllab import spectral as sp
from balllab.poly import Polynomial, random_polynomial, random_rational_point


seeds = st.integers(0, 2**31)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_taylor_routes_agree(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 3))
    f = random_polynomial(rng, n, 4)
    res = idt.taylor_error(f, random_rational_point(rng, n), int(rng.integers(0, 3)), 1, 1)
    assert res.residual.is_exact() and res.residual.is_zero()


def test_taylor_polynomial_reproduces_low_degree(rng):
    f = random_polynomial(rng, 2, 3)
    w = random_rational_point(rng, 2)
    assert idt.taylor_polynomial(f, w, 3) == f


def test_taylor_rejects_negative_orders(rng):
    with pytest.raises(ValueError):
        idt.taylor_error(random_polynomial(rng, 1, 2), [Fraction(1, 4)], -1, 0, 0)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_leibnitz_special_case_vanishes(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    f, g = random_polynomial(rng, n, 4), random_polynomial(rng, n, 4)
    assert idt.leibnitz_special_case_residual(f, g).is_zero()


def test_leibnitz_decomposition_reconstructs(rng):
    f, g = random_polynomial(rng, 2, 3), random_polynomial(rng, 2, 3)
    dec = idt.leibnitz_decompose(3, 2, 1, f, g)
    assert dec.reconstruction_residual().is_zero()
    assert not dec.residual_Q.is_zero()


def test_leibnitz_admissibility():
    f = Polynomial.variable(2, 0)
    with pytest.raises(ValueError):
        idt.leibnitz_decompose(1, 2, 0, f, f)
    with pytest.raises(ValueError):
        idt.leibnitz_decompose(3, 2, 5, f, f)


def test_master_coefficients_two_routes():
    a = sp.master_expansion_coefficients(2, 2, 1, 4)
    assert list(a) == list(idt.master_coefficients_by_solve(2, 2, 1, 4))
    assert sp.all_zero(idt.master_spectral_residuals(2, 2, 1, 4, a, mmax=20))


def test_master_with_identity_operator_has_trivial_coefficients():
    a = sp.master_expansion_coefficients(2, 1, 1, 8)
    assert all(c == 0 for c in a[:-1]) and a[-1] == 1


def test_master_decomposition_reconstructs(rng):
    f, g = random_polynomial(rng, 2, 3), random_polynomial(rng, 2, 3)
    dec = idt.master_decompose(2, 1, 3, 8, f, g)
    assert dec.reconstruction_residual().is_zero()
    assert dec.extra["consistency"].is_zero()
    assert (dec.extra["q_from_pieces"] - dec.residual_Q).is_zero()


def test_integration_by_parts_moments(rng):
    ok, _, _ = idt.intparts_moment_check(2, 2, 1, (1, 0), random_polynomial(rng, 2, 3))
    assert ok


def test_q_bound_ratios_finite_and_trending(rng):
    f, g = random_polynomial(rng, 2, 2), random_polynomial(rng, 2, 2)
    rep = idt.leibnitz_q_bound(3, 2, 1, f, g, rng=rng, directions=1, max_depth=6)
    assert np.all(np.isfinite(rep.ratios))
    assert rep.ok


def test_omega_is_positive():
    for r in (-0.5, 0.0, 0.5):
        assert float(idt.Omega(r, 0.25)) > 0
