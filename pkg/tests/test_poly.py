from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balllab.numbers import QI
from balllab.poly import Polynomial, k_s, monomial_moment_sphere, multi_indices, random_polynomial


def polys(n=2, degree=4):
    return st.integers(0, 2**31).map(lambda seed: random_polynomial(np.random.default_rng(seed), n, degree))


@settings(max_examples=40, deadline=None)
@given(polys(), polys(), polys())
def test_ring_axioms(f, g, h):
    assert f + g == g + f
    assert f * g == g * f
    assert (f * g) * h == f * (g * h)
    assert f * (g + h) == f * g + f * h
    assert f - f == Polynomial.zero(2)


@settings(max_examples=40, deadline=None)
@given(polys(), polys())
def test_radial_derivative_is_a_derivation(f, g):
    assert (f * g).radial_derivative() == f.radial_derivative() * g + f * g.radial_derivative()


@settings(max_examples=30, deadline=None)
@given(polys(n=3, degree=3))
def test_json_round_trip(f):
    assert Polynomial.from_json(f.to_json()) == f


@settings(max_examples=30, deadline=None)
@given(polys(), polys())
def test_evaluation_is_a_homomorphism(f, g):
    z = np.array([[0.3 + 0.1j, -0.2 + 0.4j], [0.5j, 0.1]])
    assert np.allclose((f * g)(z), f(z) * g(z))


def test_homogeneous_parts_reassemble(rng):
    f = random_polynomial(rng, 2, 6)
    parts = f.homogeneous_parts()
    assert sum((part for _, part in parts), Polynomial.zero(2)) == f
    for k, part in parts:
        assert part.radial_derivative() == part.scale(k)


def test_shift_moves_the_argument():
    f = Polynomial.variable(2, 0) ** 2 + Polynomial.variable(2, 1)
    g = f.shift([1, Fraction(1, 2)])
    z = np.array([[0.2, 0.3]])
    assert np.allclose(g(z), f(z + np.array([1, 0.5])))


def test_multi_indices_count():
    assert len(list(multi_indices(2, 3))) == 4
    assert len(list(multi_indices(3, 2))) == 6


def test_sphere_moment_of_z1_squared():
    # |z1|^2 averages to 1/n on the sphere
    assert monomial_moment_sphere((1, 0)) == Fraction(1, 2)


@pytest.mark.parametrize("s,expected", [(0.5, 1), (1, 2), (1.25, 2), (0, 1)])
def test_k_s(s, expected):
    assert k_s(s) == expected


def test_malformed_json_rejected():
    with pytest.raises(ValueError):
        Polynomial.from_json({"n": 2, "terms": [{"alpha": "x"}]})
    with pytest.raises(ValueError):
        Polynomial.from_json({"terms": []})


def test_exact_coefficients_stay_exact(rng):
    f = random_polynomial(rng, 2, 3)
    assert f.is_exact()
    assert all(isinstance(c, QI) for _, c in f.items())
