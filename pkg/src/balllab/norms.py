"""Norm estimators for Hardy-Sobolev, Besov and Triebel-Lizorkin spaces.

Functions are either exact :class:`Polynomial` objects or "evaluables":
objects exposing ``radial_derivatives(points, kmax)`` that return
[F, RF, ..., R^kmax F] at complex points of shape (..., n).
"""

from __future__ import annotations

import math
from typing import Protocol

import numpy as np
from scipy.optimize import minimize

from .numbers import to_mp
from .poly import Polynomial
from .quadrature import TentResolution, ball_grid, sphere_grid, tent_norm
from .spectral import apply_diagonal, radial_power


class Evaluable(Protocol):
    n: int

    def radial_derivatives(self, points: np.ndarray, kmax: int) -> list: ...


def one_plus_R_power(func, points: np.ndarray, k: int) -> np.ndarray:
    """(1+R)^k F at the points, combining R^j F binomially."""
    ders = func.radial_derivatives(points, k)
    out = np.zeros_like(ders[0], dtype=complex)
    for j in range(k + 1):
        out = out + math.comb(k, j) * ders[j]
    return out


def product_one_plus_R_power(g, f, points: np.ndarray, k: int) -> np.ndarray:
    """(1+R)^k (g f) = sum_j C(k,j) R^j g (1+R)^(k-j) f, since R is a derivation."""
    gd = g.radial_derivatives(points, k)
    fd = f.radial_derivatives(points, k)
    out = np.zeros_like(gd[0], dtype=complex)
    for j in range(k + 1):
        one_plus = np.zeros_like(fd[0], dtype=complex)
        for i in range(k - j + 1):
            one_plus = one_plus + math.comb(k - j, i) * fd[i]
        out = out + math.comb(k, j) * gd[j] * one_plus
    return out


def hardy_sobolev_norm(f: Polynomial, p: float, s, order: int | None = None) -> float:
    """||(1+R)^s f||_{H^p}, the sphere L^p norm of the boundary values."""
    g = apply_diagonal(radial_power(s), f)
    if g.is_zero():
        return 0.0
    if order is None:
        order = max(2 * g.degree + 4, 8) if p != 2 else max(2 * g.degree, 2)
    grid = sphere_grid(f.n, order)
    vals = np.abs(g.evaluate(grid.nodes)) ** p
    return float(np.sum(grid.weights * vals) ** (1 / p))


def hardy_sobolev_norm_parseval(f: Polynomial, s) -> float:
    """H^2_s norm from sphere moments (no quadrature)."""
    from .poly import monomial_moment_sphere
    g = apply_diagonal(radial_power(s), f)
    total = 0.0
    for alpha, c in g.items():
        total += float(abs(to_mp(c)) ** 2) * float(monomial_moment_sphere(alpha))
    return math.sqrt(total)


def shell_norm(func, p: float, radius: float, order: int = 16, k: int = 0) -> float:
    """L^p(sigma) norm of (1+R)^k F on the sphere of the given radius."""
    grid = sphere_grid(func.n, order)
    vals = one_plus_R_power(func, radius * grid.nodes, k)
    return float(np.sum(grid.weights * np.abs(vals) ** p) ** (1 / p))


def besov_norm(f, p: float, s: float, k: int, order: int = 24) -> float:
    """(int_B |(1+R)^k f|^p (1-|z|^2)^((k-s)p-1) dnu)^(1/p) for integer k > s."""
    if k <= s:
        raise ValueError("need integer k > s")
    N = (k - s) * p
    grid = ball_grid(f.n, N, order, normalized=False)
    vals = np.abs(one_plus_R_power(f, grid.nodes, k)) ** p
    return float(np.sum(grid.weights * vals) ** (1 / p))


def besov_infty_norm(f, s: float, k: int, order: int = 16, radii: int = 48) -> float:
    """sup_z |(1+R)^k f(z)| (1-|z|^2)^(k-s), grid search refined by Nelder-Mead."""
    if k <= s:
        raise ValueError("need integer k > s")
    n = f.n
    sph = sphere_grid(n, order)
    rs = np.concatenate([[0.0], 1 - np.geomspace(1.0, 2.0 ** -14, radii)[1:]])
    pts = (rs[:, None, None] * sph.nodes[None, :, :]).reshape(-1, n)
    pts = np.concatenate([np.zeros((1, n)), pts])

    def weighted(points):
        points = np.atleast_2d(points)
        d = np.clip(1 - np.sum(np.abs(points) ** 2, axis=-1), 0, None)
        return np.abs(one_plus_R_power(f, points, k)) * d ** (k - s)

    vals = weighted(pts)
    best = int(np.argmax(vals))
    x0 = np.concatenate([pts[best].real, pts[best].imag])

    def neg(x):
        z = x[:n] + 1j * x[n:]
        if np.sum(np.abs(z) ** 2) >= 1:
            return 0.0
        return -float(weighted(z[None, :])[0])

    res = minimize(neg, x0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
    return float(max(vals[best], -res.fun))


def triebel_norm(f, p: float, q: float, s: float, k: int, outer_order: int = 6,
                 res: TentResolution = TentResolution()) -> float:
    """||(1-|z|^2)^(k-s) (1+R)^k f||_{T^{p,q}} for integer k > s."""
    if k <= s:
        raise ValueError("need integer k > s")

    def phi(w):
        d = 1 - np.sum(np.abs(w) ** 2, axis=-1)
        return d ** (k - s) * one_plus_R_power(f, w, k)
    return float(tent_norm(phi, p, q, f.n, outer_order=outer_order, res=res))
