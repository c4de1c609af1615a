from fractions import Fraction

import pytest

from balllab import spectral as sp
from balllab.poly import random_polynomial


def test_bergman_eigenvalue_closed_form():
    # (n+M)_k / (n+N)_k at n=2, N=1, M=2, k=1
    assert sp.bergman_eigenvalue(2, 1, 2, 1) == Fraction(4, 3)
    assert sp.bergman_eigenvalue(2, 3, 3, 7) == 1


def test_inverse_is_reciprocal():
    P, T = sp.bergman_operator(2, 2, 4), sp.inverse_operator(2, 2, 4)
    for k in range(12):
        assert P.eigenvalue(k) * T.eigenvalue(k) == 1


def test_rkt_eigenvalue():
    # (t+m)_k / (t)_k
    assert sp.rkt_eigenvalue(2, Fraction(1, 2), 3) == Fraction(7, 2) * Fraction(9, 2) / (Fraction(1, 2) * Fraction(3, 2))


def test_semigroup_residuals_vanish():
    assert sp.all_zero(sp.semigroup_residuals(2, 1, 3, 5, kmax=15))


@pytest.mark.parametrize("N,M", [(3, 1), (2, 2), (1, 4)])
def test_expT_matches_reciprocal(N, M):
    l = 1 + max(N - M, 0)
    expT, T = sp.expT_operator(2, N, M, l), sp.inverse_operator(2, N, M)
    assert all(expT.eigenvalue(k) == T.eigenvalue(k) for k in range(20))


def test_operators_act_degreewise(rng):
    f = random_polynomial(rng, 2, 5)
    P = sp.bergman_operator(2, 1, 3)
    out = P(f)
    for k, part in f.homogeneous_parts():
        assert out.homogeneous_part(k) == part.scale(P.eigenvalue(k))


def test_c_N_recursive_agrees():
    for N in range(1, 6):
        assert sp.c_N(2, N) == sp.c_N_recursive(2, N)


def test_corruption_is_scoped():
    clean = sp.bergman_eigenvalue(2, 1, 2, 3)
    with sp.corrupted("eigenvalue"):
        bad = sp.bergman_operator(2, 1, 2).eigenvalue(3)
    assert bad != clean
    assert abs(bad / clean - 1) < 1e-5
    assert sp.bergman_operator(2, 1, 2).eigenvalue(3) == clean


def test_unknown_corruption_kind():
    with pytest.raises(ValueError):
        with sp.corrupted("bogus"):
            pass


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        sp.bergman_operator(2, -1, 1)
    with pytest.raises(ValueError):
        sp.bergman_operator(2, 1, -2)
