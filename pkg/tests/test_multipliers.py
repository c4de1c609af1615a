import numpy as np
import pytest

from balllab import multipliers as mp
from balllab.capacity import CapacityProblem, caps_union, default_grid, solve_capacity, three_caps
from balllab.poly import Polynomial
from balllab.quadrature import TentResolution

SMALL = TentResolution(1, 2, 1, 2, 8.0)


@pytest.fixture(scope="module")
def sampler():
    return mp.TentSampler(2, outer_order=2, res=SMALL)


@pytest.fixture(scope="module")
def family():
    return mp.TestFamily.default(2, polys=4, degree=4, kernels=2, depths=range(2, 4))


@pytest.fixture(scope="module")
def grid():
    return default_grid(2, 8)


def test_constant_one_is_an_isometric_multiplier(family, sampler):
    rep = mp.multiplier_ratio(Polynomial.constant(2), family, "Hps", 2.0, 0.5, sampler=sampler)
    assert rep.sup == pytest.approx(1.0, rel=1e-12)


def test_carleson_ratio_scales_linearly_for_p_two(family, sampler):
    g = Polynomial.variable(2, 0)
    one = mp.carleson_ratio(g, 2.0, 2.0, 0.5, family, sampler)
    three = mp.carleson_ratio(mp.scale_member(g, 3), 2.0, 2.0, 0.5, family, sampler)
    assert three.sup == pytest.approx(3 * one.sup, rel=1e-10)
    assert one.finite


def test_multiplier_ratio_invariant_under_family_scaling(family, sampler):
    g = Polynomial.variable(2, 1) + Polynomial.constant(2, 2)
    a = mp.multiplier_ratio(g, family, "Fpq", 2.0, 0.5, sampler=sampler)
    b = mp.multiplier_ratio(g, family.scaled(5), "Fpq", 2.0, 0.5, sampler=sampler)
    assert np.allclose(a.ratios, b.ratios, rtol=1e-10)


def test_unknown_space_rejected(family):
    with pytest.raises(ValueError):
        mp.multiplier_ratio(Polynomial.constant(2), family, "Lp")


@pytest.mark.parametrize("spec", ["x", "1", "1:-3", "a:b"])
def test_family_spec_parsing(spec):
    with pytest.raises(ValueError):
        mp.TestFamily.from_spec(spec, 2)


def test_family_spec_counts():
    fam = mp.TestFamily.from_spec("3:5", 2)
    assert sum(label.startswith("poly") for label in fam.labels) == 5


def test_product_follows_leibniz_rule():
    f, g = Polynomial.variable(2, 0), Polynomial.variable(2, 1) ** 2 + Polynomial.constant(2)
    z = np.array([[0.3, 0.2j], [0.1 - 0.4j, 0.5]])
    got = mp.Product(f, g).radial_derivatives(z, 2)
    want = (f * g).radial_derivatives(z, 2)
    assert all(np.allclose(a, b) for a, b in zip(got, want))


def test_capacitary_potential_is_bounded(grid):
    E = caps_union(grid, three_caps(), 0.5)
    sol = solve_capacity(CapacityProblem(0.6, 2.0, E, grid))
    V = mp.capacitary_potential(sol, 0.9)
    sup = mp.radial_sup(V, mp.potential_directions(grid, E, 12))
    assert np.isfinite(sup) and sup > 0


def test_empty_set_gives_zero_multiplier(grid):
    g, cert = mp.build_capacitary_multiplier([], 0.6, 2.0, 0.9, grid)
    assert g.is_zero() and cert.capacity == 0


def test_lambda_out_of_range(grid):
    with pytest.raises(ValueError):
        mp.build_capacitary_multiplier([0, 1], 0.5, 2.0, 0.95, grid, certify=False)


def test_corona_with_constants_and_empty_cover():
    _, rep = mp.corona_solve([Polynomial.constant(2, 1), Polynomial.constant(2, 2)], n=2)
    assert rep.passed and rep.margin == pytest.approx(3.0)
    assert rep.sup_inverse == pytest.approx(1 / 3)
    _, empty = mp.corona_solve([])
    assert not empty.passed


def test_hemisphere_cover_covers(grid):
    a, b = mp.hemisphere_cover(grid)
    assert len(np.union1d(a, b)) == len(grid.weights)


def test_exceptional_sequence_of_empty_set(grid):
    m, rep = mp.exceptional_sequence([], 0.6, 2.0, 0.9, grid)
    assert m == [] and rep.passed


def test_u_route_potential_is_bounded(grid):
    E = caps_union(grid, three_caps(), 0.5)
    sol = solve_capacity(CapacityProblem(1.25, 1.5, E, grid))
    U = mp.capacitary_potential(sol, 0.9, "U")
    sup = mp.radial_sup(U, mp.potential_directions(grid, E, 8))
    assert np.isfinite(sup) and sup > 0
