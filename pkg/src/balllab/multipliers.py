"""Empirical multiplier certificates: Carleson ratios, multiplier ratios,
capacitary multipliers, the Corona combination and exceptional sequences.

Every certificate is a finite-sample estimate on declared grids; the reports
record the grids so that refinement studies can be compared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .capacity import CapacityProblem, CapacitySolution, cap_nodes, solve_capacity
from .norms import besov_norm, hardy_sobolev_norm, one_plus_R_power
from .poly import Polynomial, k_s, random_polynomial
from .potentials import (AtomicMeasure, CellVPotential, KernelSum, PotentialParams, holo_potential_U, holo_potential_V,
                         kernel_function, radial_depths, radial_values, random_sphere_points, smear,
                         wolff_potential)
from .quadrature import (QuadratureGrid, TentResolution, _tent_template, sphere_grid,
                         unitary_with_first_column)

CERT_RES = TentResolution(q_tau=2, q_psi=4, q_s=1, q_xi=3, depth=16.0)


# evaluable combinators ---------------------------------------------------------------------

class Scaled:
    def __init__(self, func, c):
        self.func, self.c, self.n = func, c, func.n

    def radial_derivatives(self, points, kmax):
        return [self.c * d for d in self.func.radial_derivatives(points, kmax)]

    def evaluate(self, points):
        return self.radial_derivatives(points, 0)[0]


class Product:
    """g f with R^j(g f) = sum_i C(j, i) R^i g R^(j-i) f."""

    def __init__(self, g, f):
        if g.n != f.n:
            raise ValueError("dimension mismatch")
        self.g, self.f, self.n = g, f, f.n

    def radial_derivatives(self, points, kmax):
        gd = self.g.radial_derivatives(points, kmax)
        fd = self.f.radial_derivatives(points, kmax)
        return [sum(math.comb(j, i) * gd[i] * fd[j - i] for i in range(j + 1)) for j in range(kmax + 1)]

    def evaluate(self, points):
        return self.radial_derivatives(points, 0)[0]


class Sum:
    def __init__(self, parts):
        self.parts = list(parts)
        self.n = self.parts[0].n

    def radial_derivatives(self, points, kmax):
        out = None
        for part in self.parts:
            d = part.radial_derivatives(points, kmax)
            out = d if out is None else [a + b for a, b in zip(out, d)]
        return out

    def evaluate(self, points):
        return self.radial_derivatives(points, 0)[0]


def scale_member(f, c):
    if isinstance(f, Polynomial):
        return f.scale(c)
    if isinstance(f, KernelSum):
        return f.scaled(c)
    return Scaled(f, c)


# test families -------------------------------------------------------------------------------

@dataclass
class TestFamily:
    members: list
    labels: list
    seed: int = 0

    def __post_init__(self):
        if not self.members:
            raise ValueError("a test family needs at least one member")

    @property
    def n(self) -> int:
        return self.members[0].n

    def __len__(self):
        return len(self.members)

    @classmethod
    def default(cls, n: int = 2, seed: int = 0, polys: int = 64, degree: int = 8, kernels: int = 16,
                N: float = 1.0, depths=range(2, 10), snap_order: int | None = 4) -> "TestFamily":
        """Random polynomials plus kernel functions f_a with 1-|a| = 2^-j.

        With ``snap_order`` the kernel directions are nodes of that sphere rule,
        so that the outer rule of a tent norm sees every peak.
        """
        rng = np.random.default_rng(seed)
        members, labels = [], []
        for i in range(polys):
            members.append(random_polynomial(rng, n, degree, terms=int(rng.integers(1, 9))))
            labels.append(f"poly{i}")
        depths = list(depths)
        dirs = random_sphere_points(rng, n, kernels)
        if snap_order is not None:
            nodes = sphere_grid(n, snap_order).nodes
            dirs = nodes[rng.choice(len(nodes), size=kernels, replace=len(nodes) < kernels)]
        for i in range(kernels):
            j = depths[i % len(depths)]
            a = (1 - 2.0 ** -j) * dirs[i]
            members.append(kernel_function(a, N))
            labels.append(f"kernel{i}:1-|a|=2^-{j}")
        return cls(members, labels, seed)

    @classmethod
    def from_spec(cls, spec: str, n: int) -> "TestFamily":
        """'seed:N' gives N random polynomials plus the default kernels."""
        try:
            seed, count = (int(x) for x in spec.split(":"))
        except ValueError as exc:
            raise ValueError("family spec must look like seed:N") from exc
        if count < 1:
            raise ValueError("family size must be positive")
        return cls.default(n, seed=seed, polys=count)

    def scaled(self, c) -> "TestFamily":
        return TestFamily([scale_member(f, c) for f in self.members], list(self.labels), self.seed)


# tent sampling ----------------------------------------------------------------------------

class TentSampler:
    """All aperture nodes of an outer sphere rule, stacked for reuse across functions."""

    def __init__(self, n: int, outer_order: int = 4, res: TentResolution = CERT_RES):
        outer = sphere_grid(n, outer_order)
        pts, w = _tent_template(n, res)
        self.n, self.outer_order, self.res = n, outer_order, res
        self.points = np.stack([pts @ unitary_with_first_column(z).T for z in outer.nodes])
        self.inner_w = w
        self.outer_w = outer.weights
        self.lift = np.clip(1 - np.sum(np.abs(self.points) ** 2, axis=-1), 0, None)
        self._cache = {}

    def derivatives(self, func, k: int, cache: bool = False) -> list:
        """[F, RF, ..., R^k F] on the nodes; ``cache`` keeps the result for reuse."""
        hit = self._cache.get(id(func))
        if hit is not None and hit[0] is func and len(hit[1]) > k:
            return hit[1][:k + 1]
        flat = self.points.reshape(-1, self.n)
        ders = [d.reshape(self.points.shape[:-1]) for d in func.radial_derivatives(flat, k)]
        if cache:
            self._cache[id(func)] = (func, ders)
        return ders

    def one_plus_R(self, func, k: int) -> np.ndarray:
        return one_plus_R_power(func, self.points.reshape(-1, self.n), k).reshape(self.points.shape[:-1])

    def weighted_from_derivatives(self, ders: list, s: float, k: int) -> np.ndarray:
        """(1-|w|^2)^(k-s) (1+R)^k F from [F, RF, ..., R^k F] on the nodes."""
        return self.lift ** (k - s) * sum(math.comb(k, j) * ders[j] for j in range(k + 1))

    def norm(self, vals: np.ndarray, p: float, q: float) -> float:
        inner = np.sum(self.inner_w * np.abs(vals) ** q, axis=-1)
        return float(np.sum(self.outer_w * inner ** (p / q)) ** (1 / p))

    def triebel(self, func, p: float, q: float, s: float, k: int | None = None) -> float:
        k = k_s(s) if k is None else k
        return self.norm(self.lift ** (k - s) * self.one_plus_R(func, k), p, q)

    def meta(self) -> dict:
        r = self.res
        return {"outer_order": self.outer_order, "tent": [r.q_tau, r.q_psi, r.q_s, r.q_xi, r.depth],
                "points": int(self.points.shape[0] * self.points.shape[1])}


# reports ---------------------------------------------------------------------------------------

@dataclass
class CertificationReport:
    name: str
    ratios: list
    labels: list
    threshold: float = math.inf
    meta: dict = field(default_factory=dict)

    @property
    def sup(self) -> float:
        return float(max(self.ratios)) if self.ratios else 0.0

    @property
    def finite(self) -> bool:
        return all(np.isfinite(r) and r >= 0 for r in self.ratios)

    @property
    def passed(self) -> bool:
        return self.finite and self.sup <= self.threshold

    def to_json(self) -> dict:
        return {"name": self.name, "sup": self.sup, "passed": self.passed,
                "threshold": None if math.isinf(self.threshold) else self.threshold,
                "ratios": dict(zip(self.labels, map(float, self.ratios))), "meta": self.meta}


def carleson_ratio(g, p: float, q: float, s: float, family: TestFamily,
                   sampler: TentSampler | None = None, threshold: float = math.inf) -> CertificationReport:
    """sup_f ||f||_{T^{p,q}(mu_g)} / ||f||_{F^{p,q}_s} with
    d mu_g = |(1+R)^k g|^q (1-|z|^2)^((k-s) q) d nu,  k = k_s."""
    sampler = sampler or TentSampler(family.n)
    k = k_s(s)
    gw = sampler.weighted_from_derivatives(sampler.derivatives(g, k, cache=True), s, k)
    ratios = []
    for f in family.members:
        fd = sampler.derivatives(f, k)
        one_plus = sum(math.comb(k, j) * fd[j] for j in range(k + 1))
        den = sampler.norm(sampler.lift ** (k - s) * one_plus, p, q)
        num = sampler.norm(fd[0] * gw, p, q)
        ratios.append(num / den if den > 0 else (0.0 if num == 0 else math.inf))
    return CertificationReport("carleson", ratios, list(family.labels), threshold,
                               {"p": p, "q": q, "s": s, "k": k, **sampler.meta()})


SPACES = ("Hps", "Bps", "Fpq")


def multiplier_ratio(g, family: TestFamily, space: str = "Hps", p: float = 2.0, s: float = 0.5,
                     q: float = 2.0, sampler: TentSampler | None = None,
                     threshold: float = math.inf) -> CertificationReport:
    """sup_f ||g f|| / ||f|| in H^p_s, B^p_s or F^{p,q}_s.

    Polynomial pairs in H^p_s use the exact product and spectral (1+R)^s;
    everything else uses the F^{p,2}_s (resp. F^{p,q}_s) tent norm, or the
    Besov ball integral, of the pointwise product.
    """
    if space not in SPACES:
        raise ValueError(f"space must be one of {SPACES}")
    ratios, routes = [], []
    g_ders = None
    for f in family.members:
        if space == "Hps" and isinstance(g, Polynomial) and isinstance(f, Polynomial):
            num, den = hardy_sobolev_norm(g * f, p, s), hardy_sobolev_norm(f, p, s)
            routes.append("exact")
        elif space == "Bps":
            k = k_s(s)
            num, den = besov_norm(Product(g, f), p, s, k), besov_norm(f, p, s, k)
            routes.append("besov")
        else:
            if sampler is None:
                sampler = TentSampler(family.n)
            k = k_s(s)
            if g_ders is None:
                g_ders = sampler.derivatives(g, k, cache=True)
            qq = 2.0 if space == "Hps" else q
            fd = sampler.derivatives(f, k)
            gf = [sum(math.comb(j, i) * g_ders[i] * fd[j - i] for i in range(j + 1)) for j in range(k + 1)]
            num = sampler.norm(sampler.weighted_from_derivatives(gf, s, k), p, qq)
            den = sampler.norm(sampler.weighted_from_derivatives(fd, s, k), p, qq)
            routes.append("tent")
        ratios.append(num / den if den > 0 else (0.0 if num == 0 else math.inf))
    meta = {"space": space, "p": p, "s": s, "q": q, "routes": sorted(set(routes))}
    if sampler is not None:
        meta.update(sampler.meta())
    return CertificationReport("multiplier", ratios, list(family.labels), threshold, meta)


# capacitary multipliers ----------------------------------------------------------------------

def radial_sup(F, etas: np.ndarray, depths: np.ndarray | None = None) -> float:
    depths = radial_depths() if depths is None else depths
    return float(np.max(np.abs(radial_values(F, etas, depths))))


def potential_directions(grid: QuadratureGrid, E: np.ndarray, count: int = 48, seed: int = 0) -> np.ndarray:
    """Directions for the deep radial sup: E nodes plus random points of the sphere."""
    rng = np.random.default_rng(seed)
    pick = E if len(E) <= count else rng.choice(E, size=count, replace=False)
    return np.concatenate([grid.nodes[pick], random_sphere_points(rng, grid.n, count)])


def capacitary_potential(sol: CapacitySolution, lam: float | None, route: str | None = None,
                         smear_points: int = 2, **kw):
    """U (p < 2), V (p >= 2) or the Cauchy route C_s((I_s mu)^(p'-1)) from the extremal measure.

    V is built from the cell-smeared measure (smear_points^d sub-atoms per
    cell); U already treats node atoms as cell masses.
    """
    pr = sol.problem
    n = pr.grid.n
    route = route or ("U" if pr.p < 2 else "V")
    mu = sol.mu_star
    if route == "C":
        u = sol.potential()
        return KernelSum(n, n - pr.s, pr.grid.weights * u ** (pr.p_prime - 1), pr.grid.nodes)
    params = PotentialParams(n, pr.s, pr.p, lam)
    if route == "U":
        return holo_potential_U(mu, params, **kw)
    if route == "V":
        if pr.p == 2 and pr.grid.kind == "cells" and not kw:
            return CellVPotential(mu, params, pr.grid, smear_points)
        return holo_potential_V(smear(mu, pr.grid, smear_points), params, **kw)
    raise ValueError("route must be U, V or C")


@dataclass
class MultiplierCertificate:
    route: str
    capacity: float
    duality_gap: float
    radial_sup: float
    radial_sup_refined: float | None
    carleson: CertificationReport | None
    multiplier: CertificationReport | None
    stability_tol: float = 0.10

    @property
    def stable(self) -> bool:
        if self.radial_sup_refined is None:
            return True
        return abs(self.radial_sup_refined - self.radial_sup) <= self.stability_tol * self.radial_sup

    @property
    def passed(self) -> bool:
        ok = np.isfinite(self.radial_sup) and self.stable
        for rep in (self.carleson, self.multiplier):
            ok = ok and (rep is None or rep.finite)
        return bool(ok)

    def to_json(self) -> dict:
        return {"route": self.route, "capacity": self.capacity, "duality_gap": self.duality_gap,
                "radial_sup": self.radial_sup, "radial_sup_refined": self.radial_sup_refined,
                "stable": self.stable, "passed": self.passed,
                "carleson": self.carleson.to_json() if self.carleson else None,
                "multiplier": self.multiplier.to_json() if self.multiplier else None}


def build_capacitary_multiplier(E, s: float, p: float, lam: float | None, grid: QuadratureGrid, *,
                                route: str | None = None, refine_grid: QuadratureGrid | None = None,
                                family: TestFamily | None = None, sampler: TentSampler | None = None,
                                certify: bool = True, directions: int = 48, seed: int = 0,
                                potential_kw: dict | None = None):
    """Solve the capacity problem on E, lift the extremal measure to a holomorphic
    potential and certify it: deep radial sup (optionally re-measured on a
    refined grid), Carleson ratio and multiplier ratio over the family."""
    n = grid.n
    kw = potential_kw or {}
    E = np.asarray(E, dtype=int)
    if E.size == 0:
        zero = Polynomial.zero(n)
        return zero, MultiplierCertificate(route or "zero", 0.0, 0.0, 0.0, None, None, None)
    params = PotentialParams(n, s, p, lam)
    route = route or ("U" if p < 2 else "V")
    if route in ("U", "V"):
        params.check(need_lambda=True, strict_u=(route == "U"))
    sol = solve_capacity(CapacityProblem(s, p, E, grid))
    g = capacitary_potential(sol, lam, route, **kw)
    etas = potential_directions(grid, E, directions, seed)
    sup = radial_sup(g, etas)
    refined = None
    if refine_grid is not None:
        E2 = _transfer_set(grid, E, refine_grid)
        sol2 = solve_capacity(CapacityProblem(s, p, E2, refine_grid))
        refined = radial_sup(capacitary_potential(sol2, lam, route, **kw), etas)
    carl = mult = None
    if certify:
        family = family or TestFamily.default(n, seed=seed)
        sampler = sampler or TentSampler(n)
        carl = carleson_ratio(g, p, 2.0, s, family, sampler)
        mult = multiplier_ratio(g, family, "Hps", p, s, sampler=sampler)
    return g, MultiplierCertificate(route, sol.value, sol.duality_gap, sup, refined, carl, mult)


def _transfer_set(grid: QuadratureGrid, E: np.ndarray, target: QuadratureGrid) -> np.ndarray:
    """Nodes of the target grid whose nearest source node lies in E."""
    d = np.abs(1 - target.nodes @ grid.nodes.conj().T)
    nearest = np.argmin(d, axis=1)
    mask = np.zeros(len(grid.weights), dtype=bool)
    mask[E] = True
    return np.nonzero(mask[nearest])[0]


# corona -----------------------------------------------------------------------------------------

@dataclass
class CoronaReport:
    margin: float          # min Re sum V_i over the samples
    sup_inverse: float     # sup |1 / sum V_i|
    residual: float        # max |1 - sum V_i * V|
    samples: int

    @property
    def passed(self) -> bool:
        return self.samples > 0 and self.margin > 0 and bool(np.isfinite(self.sup_inverse))

    def to_json(self) -> dict:
        return {"margin": self.margin, "sup_inverse": self.sup_inverse, "residual": self.residual,
                "samples": self.samples, "passed": self.passed}


def corona_points(n: int, order: int = 10, depths: int = 12) -> np.ndarray:
    sph = sphere_grid(n, order).nodes
    radii = np.concatenate([[0.0, 0.5], 1 - radial_depths(depths)])
    pts = (radii[:, None, None] * sph[None, :, :]).reshape(-1, n)
    return pts


def corona_solve(potentials: list, points: np.ndarray | None = None, n: int | None = None):
    """V = 1 / sum V_i on the samples, with the positivity margin and the sup bound."""
    if not potentials:
        return None, CoronaReport(-math.inf, math.inf, math.inf, 0)
    n = n or potentials[0].n
    points = corona_points(n) if points is None else np.atleast_2d(points)
    total = sum(np.asarray(V.evaluate(points)) for V in potentials)
    inv = 1 / total
    residual = float(np.max(np.abs(1 - total * inv)))
    return inv, CoronaReport(float(total.real.min()), float(np.max(np.abs(inv))), residual, len(points))


def hemisphere_cover(grid: QuadratureGrid, radius: float = 1.5) -> list:
    """Two Koranyi caps about +e_1 and -e_1; radius 1.5 covers the sphere."""
    e = np.zeros(grid.n, dtype=complex)
    e[0] = 1
    return [cap_nodes(grid, e, radius), cap_nodes(grid, -e, radius)]


# exceptional sequence ------------------------------------------------------------------------

@dataclass
class ExceptionalReport:
    capacities: list
    radii: list
    norms: list
    partial_sums: list
    growth: list            # min over K of Re m_k at the deepest radii, per k
    slope: float            # min_k growth_k / k
    wolff_min: list

    @property
    def passed(self) -> bool:
        return (not self.growth) or (self.slope > 0 and all(np.diff(self.growth) > 0))

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {"passed": self.passed}


def exceptional_sequence(K, s: float, p: float, lam: float, grid: QuadratureGrid, levels: int = 4, *,
                         radii=None, base: float | None = None, sampler: TentSampler | None = None,
                         deep: int = 3, depths: np.ndarray | None = None):
    """Neighbourhoods G_k of K with capacity <= base 2^-k, their potentials F_k,
    and the partial sums m_k = F_1 + ... + F_k on the rays through K."""
    K = np.asarray(K, dtype=int)
    if K.size == 0:
        return [], ExceptionalReport([], [], [], [], [], math.inf, [])
    n = grid.n
    params = PotentialParams(n, s, p, lam)
    params.check(need_lambda=True, strict_u=p < 2)
    radii = sorted(radii if radii is not None else np.geomspace(1.5, 0.02, 40), reverse=True)
    if base is None:
        base = solve_capacity(CapacityProblem(s, p, np.arange(len(grid.weights)), grid)).value
    sampler = sampler or TentSampler(n)
    depths = radial_depths() if depths is None else depths
    etas = grid.nodes[K]
    F, caps, used, norms, wolff = [], [], [], [], []
    r_iter = iter(radii)
    for k in range(1, levels + 1):
        target = base * 2.0 ** -k
        for r in r_iter:
            G = np.unique(np.concatenate([K] + [cap_nodes(grid, grid.nodes[i], r) for i in K]))
            sol = solve_capacity(CapacityProblem(s, p, G, grid))
            if sol.value <= target:
                break
        else:
            raise RuntimeError("no neighbourhood small enough; refine the radius ladder or the grid")
        Fk = capacitary_potential(sol, lam)
        F.append(Fk)
        caps.append(sol.value)
        used.append(float(r))
        norms.append(sampler.triebel(Fk, p, 2.0, s))
        wolff.append(float(wolff_potential(sol.mu_star, s, p, etas).min()))
    partial = list(np.cumsum(norms))
    growth = []
    acc = np.zeros((len(K), len(depths)))
    for Fk in F:
        acc = acc + radial_values(Fk, etas, depths).real
        growth.append(float(acc[:, -deep:].min()))
    slope = min(gk / (k + 1) for k, gk in enumerate(growth))
    m = [Sum(F[:k + 1]) for k in range(len(F))]
    return m, ExceptionalReport(caps, used, norms, partial, growth, float(slope), wolff)
