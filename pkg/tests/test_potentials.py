import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from balllab import potentials as pt
from balllab.quadrature import cell_sphere_grid

S, P = 0.5, 2.0


@pytest.fixture(scope="module")
def grid():
    return cell_sphere_grid(2, 8)


def test_measure_json_round_trip(rng):
    mu = pt.random_measure(rng, 2, 4)
    back = pt.AtomicMeasure.from_json(json.dumps(mu.to_json()))
    assert np.allclose(back.points, mu.points) and np.allclose(back.masses, mu.masses)


@pytest.mark.parametrize("bad", [
    [], {"atoms": "x"}, {"atoms": [{"point": [1, 0]}]}, {"atoms": [{"point": [1, 0, 0], "mass": 1}]},
    {"atoms": [{"point": [1, 0], "mass": -1}]}, {"atoms": [{"point": ["a", 0], "mass": 1}]},
])
def test_malformed_measures_rejected(bad):
    with pytest.raises(ValueError):
        pt.AtomicMeasure.from_json(bad)


def test_koranyi_distance_is_symmetric(rng):
    z, w = pt.random_sphere_points(rng, 2, 2)
    assert np.isclose(pt.koranyi_distance(z, w), pt.koranyi_distance(w, z))
    assert np.isclose(pt.koranyi_distance(z, z), 0)


def test_cap_area_grows(rng):
    a = pt.cap_area(2, np.array([0.1, 0.5, 1.0, 2.0]))
    assert np.all(np.diff(a) > 0) and np.isclose(a[-1], 1)


def test_riesz_rows_integrate_to_the_sphere_constant(grid):
    A = pt.riesz_matrix(grid, S)
    K = pt.sphere_riesz_constant(2, S)
    assert np.allclose(A @ grid.weights, K, rtol=1e-10)
    assert (np.diag(A) > 0).all()


def test_energy_equals_nonlinear_pairing_on_nodes(grid, rng):
    mu = pt.mollify(pt.random_measure(rng, 2, 3), grid, grid.meta["spacing"])
    rep = pt.wolff_comparability(mu, S, P, grid)
    assert np.isclose(rep.ratios["E/N"], 1, rtol=1e-12)
    assert rep.wolff > 0


def test_comparability_needs_node_measure(grid, rng):
    with pytest.raises(ValueError):
        pt.wolff_comparability(pt.random_measure(rng, 2, 3), S, P, grid)


def test_mollify_preserves_mass(grid, rng):
    mu = pt.random_measure(rng, 2, 5)
    assert np.isclose(pt.mollify(mu, grid, 0.2).total_mass, mu.total_mass)


def test_smear_preserves_mass(grid, rng):
    mu = pt.mollify(pt.random_measure(rng, 2, 2), grid, 0.2)
    sm = pt.smear(mu, grid)
    assert len(sm) == 8 * len(mu) and np.isclose(sm.total_mass, mu.total_mass)


def test_single_atom_wolff_closed_form():
    mu = pt.AtomicMeasure.single(np.array([1.0, 0.0], dtype=complex))
    zeta = np.array([[0.0, 1.0]], dtype=complex)
    assert np.isclose(pt.wolff_potential(mu, S, P, zeta)[0], 1.0, rtol=1e-12)
    assert np.isclose(pt.wolff_potential_quadrature(mu, S, P, zeta[0]), 1.0, rtol=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 3.0), st.integers(0, 1000))
def test_wolff_homogeneity(c, seed):
    # W is homogeneous of degree p'-1 = 1 in the measure when p = 2
    rng = np.random.default_rng(seed)
    mu = pt.random_measure(rng, 2, 3)
    z = pt.random_sphere_points(rng, 2, 4)
    assert np.allclose(pt.wolff_potential(mu.scaled(c), S, P, z), c * pt.wolff_potential(mu, S, P, z))


def test_kernel_function_radial_derivatives_match_evaluation():
    a = np.array([0.3, 0.2j])
    K = pt.kernel_function(a, 2.0)
    z = np.array([[0.1, 0.2], [0.4j, -0.3]])
    h = 1e-6
    d = K.radial_derivatives(z, 1)
    fd = (K.evaluate(z * (1 + h)) - K.evaluate(z * (1 - h))) / (2 * h)
    assert np.allclose(d[1], fd, rtol=1e-6)


def test_potential_parameters_checked():
    with pytest.raises(ValueError):
        pt.PotentialParams(2, 0.5, 1.0).check()
    with pytest.raises(ValueError):
        pt.PotentialParams(2, 0.5, 2.0, lam=0.95).check(need_lambda=True)
    pt.PotentialParams(2, 0.6, 2.0, lam=0.9).check(need_lambda=True)


def test_a1_ratio_of_constant_weight(grid):
    w = pt.WeightField(grid, np.full(len(grid.weights), 2.0))
    assert pt.a1_ratio(w) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        pt.WeightField(grid, np.zeros(len(grid.weights)))


@pytest.mark.parametrize("s", [0.5, 0.6])
def test_wolff_finite_at_own_cell_atoms(grid, s):
    mu = pt.grid_measure(grid, np.where(np.arange(len(grid.weights)) < 4, 1.0, 0.0))
    vals = pt.wolff_potential(mu, s, P, mu.points)
    assert np.all(np.isfinite(vals)) and np.all(vals > 0)
