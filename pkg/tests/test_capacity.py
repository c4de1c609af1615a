import numpy as np
import pytest

from balllab import capacity as cp
from balllab.potentials import sphere_riesz_constant

S, P = 0.5, 2.0


@pytest.fixture(scope="module")
def grid():
    return cp.default_grid(2, 8)


@pytest.fixture(scope="module")
def caps_solution(grid):
    E = cp.caps_union(grid, cp.three_caps(), 0.5)
    return cp.solve_capacity(cp.CapacityProblem(S, P, E, grid))


def test_sphere_capacity_symmetry_oracle(grid):
    sol = cp.solve_capacity(cp.CapacityProblem(S, P, np.arange(len(grid.weights)), grid))
    K = sphere_riesz_constant(2, S)
    assert sol.value == pytest.approx(K ** -P, rel=1e-3)


def test_singleton_closed_form(grid):
    node = 17
    sol = cp.solve_capacity(cp.CapacityProblem(S, P, [node], grid))
    assert sol.value == pytest.approx(cp.singleton_capacity(grid, S, P, node), rel=1e-6)


def test_duality_gap_and_feasibility(caps_solution):
    assert caps_solution.converged
    assert 0 <= caps_solution.duality_gap <= 1e-2
    assert caps_solution.feasibility() <= 1e-9
    assert (caps_solution.nu >= 0).all()


def test_capacity_scales_with_level(grid, caps_solution):
    E = caps_solution.problem.E
    twice = cp.solve_capacity(cp.CapacityProblem(S, P, E, grid, level=2.0))
    assert twice.value == pytest.approx(2 ** P * caps_solution.value, rel=1e-3)


def test_monotone_in_the_set(grid):
    centre = [1.0, 0.0]
    small = cp.solve_capacity(cp.CapacityProblem(S, P, cp.cap_nodes(grid, centre, 0.4), grid)).value
    big = cp.solve_capacity(cp.CapacityProblem(S, P, cp.cap_nodes(grid, centre, 0.8), grid)).value
    assert small <= big


def test_extremal_properties(caps_solution):
    rep = cp.verify_extremal(caps_solution, levels=(0.75,), wolff_points=50)
    assert rep.mass_error <= 0.05 and rep.energy_error <= 0.05
    assert rep.min_wolff_on_E > 0
    assert np.isfinite(rep.max_nonlinear)


def test_solution_json(caps_solution):
    data = caps_solution.to_json()
    assert data["params"]["order"] == 8 and len(data["nu"]) == len(caps_solution.problem.E)


def test_load_set_formats(grid):
    assert len(cp.load_set({"all": True}, grid)) == len(grid.weights)
    assert list(cp.load_set({"nodes": [1, 2]}, grid)) == [1, 2]
    caps = cp.load_set({"caps": [{"center": [1, 0, 0, 0], "radius": 0.5}]}, grid)
    assert np.array_equal(caps, cp.cap_nodes(grid, [1, 0], 0.5))
    with pytest.raises(ValueError):
        cp.load_set({"bogus": 1}, grid)
    with pytest.raises(ValueError):
        cp.load_set([1, 2], grid)


def test_problem_validation(grid):
    with pytest.raises(ValueError):
        cp.CapacityProblem(S, 1.0, [0], grid)
    with pytest.raises(ValueError):
        cp.CapacityProblem(S, P, [], grid)
    with pytest.raises(ValueError):
        cp.CapacityProblem(S, P, [len(grid.weights)], grid)


def test_capacitary_weight_interval(caps_solution):
    assert cp.delta_interval(2, S, P) == (1.0, 2.0)
    with pytest.raises(ValueError):
        cp.capacitary_weight(caps_solution, 2.2)
    assert cp.weight_a1(caps_solution, 1.5) >= 1
