"""Discrete nonisotropic Riesz capacity and its extremal measure.

On a sphere grid with cell areas sigma_i and Riesz cell matrix A, the
capacity of a node set E is

    C(E) = min  sum_i sigma_i f_i^p   s.t.  (A (sigma f))_j >= level  (j in E),  f >= 0.

Its Lagrangian dual over nu >= 0 supported on E is

    h(nu) = p * level * sum(nu) - (p - 1) * sum_i sigma_i u_i^p',   u = A_E^T nu,

with primal recovery f = u^(p'-1).  At the optimum nu(E) = E(nu) = C(E), which
is the discrete form of the extremal-measure identities.  The dual is smooth
because the kernel is positive, so it is maximized with bound-constrained
L-BFGS; the gap is measured against the rescaled feasible primal point.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .potentials import (AtomicMeasure, WeightField, a1_ratio, koranyi_distance, riesz_matrix,
                         wolff_potential)
from .quadrature import QuadratureGrid, cell_sphere_grid


@dataclass
class CapacityProblem:
    s: float
    p: float
    E: np.ndarray                 # node indices into grid
    grid: QuadratureGrid
    level: float = 1.0
    max_iter: int = 5000
    tol: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        self.E = np.unique(np.asarray(self.E, dtype=int))
        if self.E.size == 0:
            raise ValueError("E must contain at least one node")
        if self.E.min() < 0 or self.E.max() >= len(self.grid.weights):
            raise ValueError("E indices out of range for the grid")
        if not 1 < self.p < math.inf:
            raise ValueError("need 1 < p < inf")
        if not 0 < self.s < self.grid.n / self.p:
            raise ValueError("need 0 < s < n/p")
        if self.level <= 0:
            raise ValueError("constraint level must be positive")

    @property
    def p_prime(self) -> float:
        return self.p / (self.p - 1)

    @property
    def matrix(self) -> np.ndarray:
        return riesz_matrix(self.grid, self.s)


@dataclass
class CapacitySolution:
    problem: CapacityProblem
    value: float
    f_star: np.ndarray
    nu: np.ndarray                # dual masses on E (aligned with problem.E)
    dual_value: float
    primal_value: float
    duality_gap: float
    iterations: int
    converged: bool
    runtime: float
    history: list = field(default_factory=list)

    @property
    def mu_star(self) -> AtomicMeasure:
        grid = self.problem.grid
        keep = self.nu > 0
        idx = self.problem.E[keep]
        return AtomicMeasure(grid.nodes[idx], self.nu[keep], grid.weights[idx])

    def potential(self) -> np.ndarray:
        """I_s(mu*) on every grid node (cell averages)."""
        A = self.problem.matrix
        return A[self.problem.E].T @ self.nu

    def nonlinear_potential(self) -> np.ndarray:
        """I_s((I_s mu*)^(p'-1)) on every grid node."""
        pr = self.problem
        u = self.potential()
        return pr.matrix @ (pr.grid.weights * u ** (pr.p_prime - 1))

    def feasibility(self) -> float:
        """max over E of (level - I_s f*)_+ / level."""
        pr = self.problem
        Kf = pr.matrix[pr.E] @ (pr.grid.weights * self.f_star)
        return float(max(0.0, np.max(pr.level - Kf)) / pr.level)

    def to_json(self) -> dict:
        pr = self.problem
        return {
            "value": self.value,
            "primal_value": self.primal_value,
            "dual_value": self.dual_value,
            "duality_gap": self.duality_gap,
            "iterations": self.iterations,
            "converged": self.converged,
            "runtime_s": round(self.runtime, 3),
            "params": {"n": pr.grid.n, "s": pr.s, "p": pr.p, "level": pr.level, "order": pr.grid.order,
                       "grid": pr.grid.kind},
            "E": pr.E.tolist(),
            "nu": self.nu.tolist(),
            "f_star": self.f_star.tolist(),
        }


def _dual_parts(A_E: np.ndarray, sigma: np.ndarray, nu: np.ndarray, p: float, level: float):
    pp = p / (p - 1)
    u = A_E.T @ nu
    u = np.maximum(u, 0.0)
    h = p * level * nu.sum() - (p - 1) * np.sum(sigma * u ** pp)
    grad = p * level - p * (A_E @ (sigma * u ** (pp - 1)))
    return h, grad, u


def _primal_from_dual(A_E, sigma, u, p, level):
    f = u ** (1 / (p - 1))
    Kf = A_E @ (sigma * f)
    if Kf.min() <= 0:
        return f, math.inf
    f = f * (level / Kf.min())
    return f, float(np.sum(sigma * f ** p))


def solve_capacity(problem: CapacityProblem) -> CapacitySolution:
    """Maximize the dual, recover a feasible primal point, report the relative gap."""
    t0 = time.perf_counter()
    A_E = np.ascontiguousarray(problem.matrix[problem.E])
    sigma = problem.grid.weights
    p, level = problem.p, problem.level
    K_rows = A_E @ sigma
    # warm start: the constant density that is just feasible, read as a dual measure
    x0 = np.full(len(problem.E), level / K_rows.mean() / len(problem.E))
    history = []

    def neg(nu):
        h, g, _ = _dual_parts(A_E, sigma, nu, p, level)
        return -h, -g

    def record(nu):
        h, _, u = _dual_parts(A_E, sigma, nu, p, level)
        _, P = _primal_from_dual(A_E, sigma, u, p, level)
        history.append((float(h), float(P)))

    iterations = 0
    nu = x0
    gap = math.inf
    for _ in range(6):
        res = minimize(neg, nu, jac=True, method="L-BFGS-B", bounds=[(0, None)] * len(nu),
                       callback=record,
                       options={"maxiter": problem.max_iter, "ftol": 1e-15, "gtol": 1e-12, "maxcor": 30})
        nu = res.x
        iterations += res.nit
        h, _, u = _dual_parts(A_E, sigma, nu, p, level)
        f, P = _primal_from_dual(A_E, sigma, u, p, level)
        gap = (P - h) / P if P > 0 else math.inf
        if gap <= problem.tol * 1e-2 or iterations >= problem.max_iter:
            break
    # multipliers of constraints that are clearly slack carry no mass
    slack = (A_E @ (sigma * u ** (1 / (p - 1)))) / level - 1
    nu = np.where(slack > 1e-4 * max(1.0, np.abs(slack).max()), 0.0, nu) if np.any(nu > 0) else nu
    nu = np.where(nu > 1e-14 * nu.max(), nu, 0.0)
    return CapacitySolution(problem, float(P), f, nu, float(h), float(P), float(gap), iterations,
                            bool(gap <= problem.tol), time.perf_counter() - t0, history)


def singleton_capacity(grid: QuadratureGrid, s: float, p: float, node: int, level: float = 1.0) -> float:
    """Closed form for one constraint: f = c a^(p'-1), value = level^p (sum sigma a^p')^(1-p)."""
    a = riesz_matrix(grid, s)[node]
    S = float(np.sum(grid.weights * a ** (p / (p - 1))))
    return level ** p * S ** (1 - p)


# set construction --------------------------------------------------------------------------

def cap_nodes(grid: QuadratureGrid, center, radius: float) -> np.ndarray:
    """Nodes of the Koranyi ball {eta : |1 - <zeta, eta>| < radius}."""
    c = np.asarray(center, dtype=complex)
    c = c / np.linalg.norm(c)
    return np.nonzero(koranyi_distance(grid.nodes, c) < radius)[0]


def caps_union(grid: QuadratureGrid, centers, radius: float) -> np.ndarray:
    return np.unique(np.concatenate([cap_nodes(grid, c, radius) for c in centers]))


def three_caps(n: int = 2) -> list:
    """Three well separated cap centres used by the fixtures."""
    if n == 1:
        return [[1.0], [np.exp(2j * np.pi / 3)], [np.exp(4j * np.pi / 3)]]
    base = [np.zeros(n, dtype=complex) for _ in range(3)]
    base[0][0] = 1
    base[1][1] = 1
    base[2][0] = base[2][1] = 1 / math.sqrt(2)
    base[2][1] *= -1
    return base


def load_set(path_or_obj, grid: QuadratureGrid) -> np.ndarray:
    """E from JSON: {"nodes": [...]}, {"all": true} or {"caps": [{"center": [re, im, ...], "radius": r}]}."""
    obj = path_or_obj
    if isinstance(obj, str):
        with open(obj) as fh:
            obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ValueError("set description must be a JSON object")
    if obj.get("all"):
        return np.arange(len(grid.weights))
    if "nodes" in obj:
        return np.asarray(obj["nodes"], dtype=int)
    if "caps" in obj:
        parts = []
        for cap in obj["caps"]:
            xs = np.asarray(cap["center"], dtype=float)
            if xs.size != 2 * grid.n:
                raise ValueError("cap centre needs 2n real coordinates")
            parts.append(cap_nodes(grid, xs[0::2] + 1j * xs[1::2], float(cap["radius"])))
        return np.unique(np.concatenate(parts))
    raise ValueError("set description needs 'nodes', 'all' or 'caps'")


# extremal properties -------------------------------------------------------------------------

@dataclass
class ExtremalReport:
    mass_error: float          # |mu*(E) - C| / C
    energy_error: float        # |E(mu*) - C| / C
    min_wolff_on_E: float
    max_nonlinear: float
    level_sets: list           # (t, capacity, capacity * t^eps / C)
    feasibility: float
    kkt_spread: float          # max/min of f* / (I_s mu*)^(p'-1) on supp f*

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def verify_extremal(sol: CapacitySolution, levels=(0.5, 0.75, 0.9), wolff_points: int | None = 200,
                    seed: int = 0, subsolve_tol: float = 1e-2) -> ExtremalReport:
    """Discrete checks on the extremal measure: mass and energy equal the
    capacity, the Wolff potential is positive on E, the nonlinear potential
    stays bounded, and level sets of it obey the capacity estimate."""
    pr = sol.problem
    C = sol.value
    mu = sol.mu_star
    u = sol.potential()
    mass_err = abs(mu.total_mass - C) / C
    energy = float(np.sum(pr.grid.weights * u ** pr.p_prime))
    energy_err = abs(energy - C) / C

    E = pr.E
    if wolff_points is not None and len(E) > wolff_points:
        E = np.random.default_rng(seed).choice(E, size=wolff_points, replace=False)
    W = wolff_potential(mu, pr.s, pr.p, pr.grid.nodes[E])
    N = sol.nonlinear_potential()

    eps = min(1.0, pr.p - 1)
    table = []
    top = float(N.max())
    for frac in levels:
        t = frac * top
        sub = np.nonzero(N >= t)[0]
        sub_sol = solve_capacity(CapacityProblem(pr.s, pr.p, sub, pr.grid, tol=subsolve_tol))
        table.append((t, sub_sol.value, sub_sol.value * t ** eps / C))

    base = u ** (pr.p_prime - 1)
    supp = sol.f_star > 1e-12 * sol.f_star.max()
    ratio = sol.f_star[supp] / base[supp]
    return ExtremalReport(float(mass_err), float(energy_err), float(W.min()), top, table,
                          sol.feasibility(), float(ratio.max() / ratio.min()))


def delta_interval(n: int, s: float, p: float) -> tuple:
    """Open interval of exponents delta for which w^delta is claimed to be A1."""
    if p <= 2 - s / n:
        return 1.0, n / (n - s)
    return 1.0, (p - 1) * n / (n - s * p) if n > s * p else math.inf


def capacitary_weight(sol: CapacitySolution, delta: float) -> WeightField:
    """w^delta with w = I_s((I_s mu*)^(p'-1)) sampled on the grid."""
    pr = sol.problem
    lo, hi = delta_interval(pr.grid.n, pr.s, pr.p)
    if not lo < delta < hi:
        raise ValueError(f"delta must lie in ({lo}, {hi}) for these parameters")
    return WeightField(pr.grid, sol.nonlinear_potential() ** delta)


def weight_a1(sol: CapacitySolution, delta: float, **kw) -> float:
    return a1_ratio(capacitary_weight(sol, delta), **kw)


def default_grid(n: int = 2, order: int = 16) -> QuadratureGrid:
    return cell_sphere_grid(n, order)
