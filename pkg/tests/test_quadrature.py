import numpy as np
import pytest

from balllab import quadrature as qd
from balllab.poly import monomial_moment_sphere


def test_gauss_jacobi_integrates_polynomials():
    x, w = qd.gauss_jacobi_01(6, 2.0, 1.0)
    # int_0^1 (1-x)^2 x * x^3 dx = B(5, 3) = 4! 2! / 7!
    assert np.isclose(np.sum(w * x ** 3), 48 / 5040, rtol=1e-13)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_sphere_grid_moments(n):
    g = qd.sphere_grid(n, 10)
    assert np.isclose(g.weights.sum(), 1)
    alpha = (2,) + (1,) * (n - 1)
    vals = np.prod(np.abs(g.nodes) ** (2 * np.array(alpha)), axis=1)
    assert np.isclose(g.integrate(vals), float(monomial_moment_sphere(alpha)), rtol=1e-12)


def test_sphere_grid_kills_unbalanced_monomials():
    g = qd.sphere_grid(2, 8)
    assert abs(g.integrate(g.nodes[:, 0] ** 2 * g.nodes[:, 1].conj())) < 1e-14


@pytest.mark.parametrize("order", [8, 12, 16])
def test_cell_grid_partitions_the_sphere(order):
    g = qd.cell_sphere_grid(2, order)
    assert np.isclose(g.weights.sum(), 1, rtol=1e-12)
    assert np.allclose(np.linalg.norm(g.nodes, axis=1), 1)
    assert (g.weights > 0).all()


def test_cell_subsample_stays_in_cells():
    g = qd.cell_sphere_grid(2, 8)
    pts, w = qd.cell_subsample(g, np.arange(5), 3)
    assert pts.shape == (5, 27, 2) and np.isclose(w.sum(), 1)
    assert np.allclose(np.linalg.norm(pts, axis=2), 1)


def test_ball_grid_is_normalized():
    g = qd.ball_grid(2, 3, 12)
    assert np.isclose(g.weights.sum(), 1)
    assert (np.linalg.norm(g.nodes, axis=1) < 1).all()


def test_invalid_orders():
    with pytest.raises(ValueError):
        qd.sphere_grid(2, 0)
    with pytest.raises(ValueError):
        qd.ball_grid(2, 0, 8)
    with pytest.raises(NotImplementedError):
        qd.cell_sphere_grid(3, 8)


def test_tent_region_inside_ball():
    zeta = np.array([1.0, 0.0], dtype=complex)
    g = qd.tent_region_grid(zeta, 2, qd.TentResolution(2, 4, 1, 3, 8.0))
    assert (np.linalg.norm(g.nodes, axis=1) < 1).all()
    assert qd.in_tent(g.nodes, zeta).mean() > 0.9
