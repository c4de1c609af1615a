"""Measures on the closed ball and the potentials built from them.

Measures are finite sums of atoms.  An atom may carry a cell area: it then
stands for mass spread uniformly over the nonisotropic cap of that area
centred at the atom (the discrete form of a measure with a density, or of a
mollified atom).  Cell atoms keep self-interactions finite.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln, hyp2f1, roots_legendre

from .quadrature import QuadratureGrid, cell_sphere_grid, cell_subsample, gauss_jacobi_01, sphere_grid

COINCIDE = 1e-12


# measures ---------------------------------------------------------------------

@dataclass(frozen=True)
class AtomicMeasure:
    points: np.ndarray               # (m, n) complex
    masses: np.ndarray               # (m,)
    areas: np.ndarray | None = None  # cell area of each atom, or None for point masses

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=complex))
        masses = np.asarray(self.masses, dtype=float).reshape(-1)
        if pts.shape[0] != masses.shape[0]:
            raise ValueError("points and masses differ in length")
        if np.any(masses < 0) or not np.all(np.isfinite(masses)):
            raise ValueError("masses must be finite and non-negative")
        if pts.size and np.any(np.linalg.norm(pts, axis=1) > 1 + 1e-12):
            raise ValueError("atoms must lie in the closed unit ball")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", masses)
        if self.areas is not None:
            areas = np.asarray(self.areas, dtype=float).reshape(-1)
            if areas.shape != masses.shape or np.any(areas <= 0):
                raise ValueError("areas must be positive, one per atom")
            object.__setattr__(self, "areas", areas)

    @classmethod
    def empty(cls, n: int) -> "AtomicMeasure":
        return cls(np.zeros((0, n), dtype=complex), np.zeros(0))

    @classmethod
    def single(cls, point, mass: float = 1.0) -> "AtomicMeasure":
        return cls(np.asarray(point, dtype=complex)[None, :], np.array([mass]))

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def __len__(self):
        return len(self.masses)

    def scaled(self, c: float) -> "AtomicMeasure":
        return AtomicMeasure(self.points, self.masses * c, self.areas)

    def support(self, tol: float = 0.0) -> "AtomicMeasure":
        keep = self.masses > tol
        return AtomicMeasure(self.points[keep], self.masses[keep], None if self.areas is None else self.areas[keep])

    def to_json(self) -> dict:
        atoms = []
        for i, (pt, m) in enumerate(zip(self.points, self.masses)):
            atom = {"point": [float(v) for z in pt for v in (z.real, z.imag)], "mass": float(m)}
            if self.areas is not None:
                atom["area"] = float(self.areas[i])
            atoms.append(atom)
        return {"atoms": atoms}

    @classmethod
    def from_json(cls, data, n: int | None = None) -> "AtomicMeasure":
        """Parse {"atoms": [{"point": [re, im, re, im, ...], "mass": m}, ...]}."""
        if isinstance(data, (str, bytes)):
            data = json.loads(data)
        if not isinstance(data, dict) or not isinstance(data.get("atoms"), list):
            raise ValueError("measure must be an object with an 'atoms' list")
        pts, masses, areas = [], [], []
        for atom in data["atoms"]:
            if not isinstance(atom, dict) or "point" not in atom or "mass" not in atom:
                raise ValueError("each atom needs 'point' and 'mass'")
            coords = atom["point"]
            if not isinstance(coords, list) or not coords or len(coords) % 2:
                raise ValueError("point must list real and imaginary parts")
            try:
                vals = [float(v) for v in coords]
                mass = float(atom["mass"])
            except (TypeError, ValueError) as exc:
                raise ValueError("non-numeric atom data") from exc
            if mass <= 0:
                raise ValueError("masses must be positive")
            pts.append([complex(vals[2 * j], vals[2 * j + 1]) for j in range(len(vals) // 2)])
            masses.append(mass)
            if "area" in atom:
                areas.append(float(atom["area"]))
        dims = {len(p) for p in pts}
        if len(dims) > 1 or (n is not None and dims and dims != {n}):
            raise ValueError("atoms have inconsistent dimensions")
        if not pts:
            if n is None:
                raise ValueError("empty measure needs an explicit dimension")
            return cls.empty(n)
        if areas and len(areas) != len(pts):
            raise ValueError("either every atom has an area or none does")
        return cls(np.array(pts), np.array(masses), np.array(areas) if areas else None)


def random_sphere_points(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    x = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def random_measure(rng: np.random.Generator, n: int, atoms: int, mass_range=(0.5, 1.5)) -> AtomicMeasure:
    pts = random_sphere_points(rng, n, atoms)
    return AtomicMeasure(pts, rng.uniform(*mass_range, size=atoms))


def grid_measure(grid: QuadratureGrid, density: np.ndarray) -> AtomicMeasure:
    """density * d(sigma) as cell atoms on the grid nodes."""
    density = np.asarray(density, dtype=float)
    keep = density > 0
    return AtomicMeasure(grid.nodes[keep], (density * grid.weights)[keep], grid.weights[keep])


def mollify(mu: AtomicMeasure, grid: QuadratureGrid, radius: float) -> AtomicMeasure:
    """Spread every atom uniformly (in sigma) over the grid nodes of B(eta, radius)."""
    masses = np.zeros(len(grid.weights))
    for eta, m in zip(mu.points, mu.masses):
        inside = koranyi_distance(grid.nodes, eta) < 2 * radius
        if not inside.any():
            inside = np.zeros(len(grid.weights), dtype=bool)
            inside[np.argmin(koranyi_distance(grid.nodes, eta))] = True
        w = grid.weights * inside
        masses += m * w / w.sum()
    keep = masses > 0
    return AtomicMeasure(grid.nodes[keep], masses[keep], grid.weights[keep])


# nonisotropic geometry ----------------------------------------------------------

def smear(mu: AtomicMeasure, grid: QuadratureGrid, m: int = 2) -> AtomicMeasure:
    """Spread node atoms uniformly over their cells with m^d Gauss sub-atoms each.

    Holomorphic potentials of point atoms blow up along the rays through the
    atoms; the smeared measure is the piecewise-constant density the cell
    model stands for, sampled at interior points of each cell.
    """
    if len(mu) == 0 or grid.kind != "cells":
        return mu
    idx = np.argmin(np.abs(1 - mu.points @ grid.nodes.conj().T), axis=1)
    pts, w = cell_subsample(grid, idx, m)
    return AtomicMeasure(pts.reshape(-1, grid.n), (mu.masses[:, None] * w[None, :]).ravel())


def koranyi_distance(z, eta) -> np.ndarray:
    """|1 - <z, eta>| for z of shape (..., n) against one point or pairwise."""
    z = np.asarray(z, dtype=complex)
    eta = np.asarray(eta, dtype=complex)
    if eta.ndim == 1:
        return np.abs(1 - z @ eta.conj())
    return np.abs(1 - z @ eta.conj().T)


def cap_area(n: int, rho) -> np.ndarray:
    """sigma{eta in sphere : |1 - <eta, zeta>| < rho}; the ball B(zeta, t) has rho = 2t."""
    rho = np.clip(np.asarray(rho, dtype=float), 0.0, 2.0)
    if n == 1:
        return 2 * np.arcsin(rho / 2) / np.pi
    if n == 2:
        ac = np.arccos(rho / 2)
        return (rho ** 2 * ac - rho * np.sqrt(np.clip(4 - rho ** 2, 0, None)) / 2 - 2 * ac + np.pi) / np.pi
    return np.vectorize(lambda r: _cap_integral(n, float(r), 0.0))(rho)


def _inner_angle_integral(n: int, r: float) -> float:
    """int_{cos th > r/2} (2 cos th - r)^(n-2) d th."""
    if r >= 2:
        return 0.0
    top = math.acos(r / 2)
    x, w = roots_legendre(24)
    th = top * (x + 1) / 2
    return float(np.sum(w * top / 2 * (2 * np.cos(th) - r) ** (n - 2)) * 2)


def _cap_integral(n: int, rho: float, power: float) -> float:
    """int_{|1-<eta,zeta>| < rho} |1 - <eta,zeta>|^(-power) d sigma(eta), power < n."""
    if rho <= 0:
        return 0.0
    rho = min(rho, 2.0)
    if n == 1:
        top = 2 * math.asin(rho / 2)
        val, _ = integrate.quad(lambda th: (2 * math.sin(th / 2)) ** (1 - power) / (2 * math.sin(th / 2)),
                                0, top, limit=200) if power < 1 else (math.inf, 0)
        return val / math.pi
    # density of lambda = <eta, zeta> is (n-1)/pi (1-|lambda|^2)^(n-2); polar around 1
    val, _ = integrate.quad(lambda r: _inner_angle_integral(n, r), 0, rho, weight="alg",
                            wvar=(n - 1 - power, 0), limit=200)
    return (n - 1) / math.pi * val


@lru_cache(maxsize=8192)
def _self_cell(n: int, area: float, power: float) -> tuple:
    """(rho*, average of |1-<eta,zeta>|^(-power) over the cap of the given area)."""
    area = min(area, 1.0)
    if area >= 1.0:
        rho = 2.0
    else:
        rho = optimize.brentq(lambda r: float(cap_area(n, r)) - area, 1e-16, 2.0, xtol=1e-15, rtol=1e-14)
    return rho, _cap_integral(n, rho, power) / area


def cap_average_kernel(n: int, area: float, power: float) -> float:
    return _self_cell(n, float(area), float(power))[1]


def sphere_riesz_constant(n: int, s: float) -> float:
    """I_s(1) on the sphere: Gamma(n) Gamma(s) / Gamma((n+s)/2)^2."""
    return math.exp(gammaln(n) + gammaln(s) - 2 * gammaln((n + s) / 2))


def ball_mass(mu: AtomicMeasure, zeta, r: float) -> float:
    """mu(B(zeta, r)) with B(zeta, r) = {|1 - <zeta, eta>| < 2r}.

    Cell atoms sitting at zeta contribute the fraction of their cap covered
    by the ball; all other atoms contribute by membership.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    if len(mu) == 0:
        return 0.0
    d = koranyi_distance(mu.points, np.asarray(zeta, dtype=complex))
    inside = d < 2 * r
    if mu.areas is None:
        return float(mu.masses[inside].sum())
    self_ = d < COINCIDE
    frac = np.where(self_, np.minimum(1.0, cap_area(mu.n, 2 * r) / mu.areas), inside.astype(float))
    return float(np.sum(mu.masses * frac))


# Riesz and Cauchy potentials --------------------------------------------------------

def riesz_potential(mu: AtomicMeasure, s: float, points) -> np.ndarray:
    """I_s(mu)(z) = sum m_i |1 - <z, eta_i>|^(-(n-s)); +inf at point atoms."""
    points = np.atleast_2d(np.asarray(points, dtype=complex))
    n = points.shape[1]
    if not 0 < s < n:
        raise ValueError("need 0 < s < n")
    out = np.zeros(len(points))
    if len(mu) == 0:
        return out
    power = n - s
    for start in range(0, len(points), 2048):
        chunk = points[start:start + 2048]
        d = koranyi_distance(chunk, mu.points)
        with np.errstate(divide="ignore"):
            ker = d ** (-power)
        hit = d < COINCIDE
        if hit.any():
            if mu.areas is None:
                ker[hit] = np.inf
            else:
                rows, cols = np.nonzero(hit)
                ker[rows, cols] = [cap_average_kernel(n, mu.areas[c], power) for c in cols]
        out[start:start + 2048] = ker @ mu.masses
    return out


def riesz_of_density(grid: QuadratureGrid, values: np.ndarray, s: float, points) -> np.ndarray:
    """I_s(phi d sigma) at the points, phi sampled on the grid nodes."""
    return riesz_potential(AtomicMeasure(grid.nodes, np.asarray(values) * grid.weights, grid.weights), s, points)


def cauchy_potential(mu: AtomicMeasure, s: float, points) -> np.ndarray:
    """C_s(mu)(z) = sum m_i (1 - <z, eta_i>)^(-(n-s)), principal branch."""
    points = np.atleast_2d(np.asarray(points, dtype=complex))
    n = points.shape[1]
    if not 0 < s < n:
        raise ValueError("need 0 < s < n")
    if len(mu) == 0:
        return np.zeros(len(points), dtype=complex)
    return KernelSum(n, n - s, mu.masses.astype(complex), mu.points).evaluate(points)


def cauchy_of_polynomial(h, s: float, points, order: int = 48) -> np.ndarray:
    """C_s(h d sigma) for polynomial boundary data h, by sphere quadrature."""
    grid = sphere_grid(h.n, order)
    mu_vals = h.evaluate(grid.nodes) * grid.weights
    return KernelSum(h.n, h.n - s, mu_vals, grid.nodes).evaluate(points)


# holomorphic kernel sums ----------------------------------------------------------------

class KernelSum:
    """F(z) = sum_i c_i (1 - <z, xi_i>)^(-lam), a holomorphic function on the ball.

    Radial derivatives use R[u^j (1-x)^(-lam)] = (j u^j + (lam+j) u^(j+1)) (1-x)^(-lam)
    with x = <z, xi> and u = x/(1-x).
    """

    def __init__(self, n: int, lam: float, coeffs, centers, chunk: int = 4_000_000):
        self.n = n
        self.lam = float(lam)
        self.coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
        self.centers = np.atleast_2d(np.asarray(centers, dtype=complex)).reshape(-1, n)
        keep = self.coeffs != 0
        self.coeffs, self.centers = self.coeffs[keep], self.centers[keep]
        self.chunk = chunk

    def __len__(self):
        return len(self.coeffs)

    def scaled(self, c) -> "KernelSum":
        return KernelSum(self.n, self.lam, self.coeffs * c, self.centers, self.chunk)

    def evaluate(self, points) -> np.ndarray:
        return self.radial_derivatives(points, 0)[0]

    __call__ = evaluate

    def radial_derivatives(self, points, kmax: int) -> list:
        points = np.asarray(points, dtype=complex)
        shape = points.shape[:-1]
        flat = points.reshape(-1, self.n)
        out = [np.zeros(len(flat), dtype=complex) for _ in range(kmax + 1)]
        if len(self.coeffs) == 0:
            return [o.reshape(shape) for o in out]
        # polynomial coefficients of P_j(u)
        polys = [[1.0]]
        for _ in range(kmax):
            prev = polys[-1]
            nxt = [0.0] * (len(prev) + 1)
            for i, c in enumerate(prev):
                nxt[i] += i * c
                nxt[i + 1] += (self.lam + i) * c
            polys.append(nxt)
        rows = max(1, self.chunk // max(len(self.coeffs), 1))
        for start in range(0, len(flat), rows):
            x = flat[start:start + rows] @ self.centers.conj().T
            one_minus = 1 - x
            base = np.exp(-self.lam * np.log(one_minus))
            u = x / one_minus
            upow = [np.ones_like(u)]
            for j in range(kmax):
                upow.append(upow[-1] * u)
            for j, poly in enumerate(polys):
                acc = np.zeros_like(u)
                for i, c in enumerate(poly):
                    if c:
                        acc = acc + c * upow[i]
                out[j][start:start + rows] = (base * acc) @ self.coeffs
        return [o.reshape(shape) for o in out]


def kernel_function(a, N: float) -> KernelSum:
    """f_a(z) = (1-|a|^2)^(n+N) / (1 - <z, a>)^(n+N)."""
    a = np.asarray(a, dtype=complex)
    n = len(a)
    scale = (1 - np.vdot(a, a).real) ** (n + N)
    return KernelSum(n, n + N, [scale], a[None, :])


def _stirling2(kmax: int) -> list:
    S = [[0] * (kmax + 1) for _ in range(kmax + 1)]
    S[0][0] = 1
    for j in range(1, kmax + 1):
        for i in range(1, j + 1):
            S[j][i] = i * S[j - 1][i] + S[j - 1][i - 1]
    return S


@dataclass(frozen=True)
class PotentialParams:
    n: int
    s: float
    p: float
    lam: float | None = None

    @property
    def p_prime(self) -> float:
        return self.p / (self.p - 1)

    def check(self, need_lambda: bool = False, strict_u: bool = False):
        if self.p <= 1:
            raise ValueError("need p > 1")
        if not 0 < self.s < self.n / self.p:
            raise ValueError(f"need 0 < s < n/p = {self.n / self.p}")
        if need_lambda:
            lo = self.n - self.s if strict_u else self.n - self.s * self.p
            if self.lam is None or not 0 < lo < self.lam < 1:
                raise ValueError(f"need 0 < {lo} < lambda < 1")


class VPotentialExact:
    """V_{s,2,lambda}(mu) = sum m_i h(<z, eta_i>), h(x) = 2F1(lam, 1; c+1; x)/c, c = lam+2s-n.

    For p = 2 the outer power is linear and the radial integral is an Euler
    integral of the Gauss hypergeometric function.
    """

    def __init__(self, mu: AtomicMeasure, params: PotentialParams):
        params.check(need_lambda=True)
        if params.p != 2:
            raise ValueError("closed form needs p = 2")
        self.n, self.mu, self.params = mu.n, mu, params
        self.c = params.lam + params.s * params.p - params.n

    def kernel_derivatives(self, x: np.ndarray, kmax: int) -> list:
        """[R^j h(x)] elementwise, using R^j h = sum_i S2(j, i) x^i h^(i)."""
        lam, c = self.params.lam, self.c
        S = _stirling2(kmax)
        derivs = []
        factor = 1.0
        for i in range(kmax + 1):
            if i:
                factor *= (lam + i - 1) * i / (c + i)
            derivs.append(factor / c * hyp2f1(lam + i, 1 + i, c + 1 + i, x))
        out = []
        for j in range(kmax + 1):
            acc = np.zeros_like(x)
            for i in range(j + 1):
                if S[j][i]:
                    acc = acc + S[j][i] * x ** i * derivs[i]
            out.append(acc)
        return out

    def radial_derivatives(self, points, kmax: int) -> list:
        points = np.asarray(points, dtype=complex)
        shape = points.shape[:-1]
        flat = points.reshape(-1, self.n)
        out = [np.zeros(len(flat), dtype=complex) for _ in range(kmax + 1)]
        if len(self.mu) == 0:
            return [o.reshape(shape) for o in out]
        for start in range(0, len(flat), 20000):
            x = flat[start:start + 20000] @ self.mu.points.conj().T
            for j, d in enumerate(self.kernel_derivatives(x, kmax)):
                out[j][start:start + 20000] = d @ self.mu.masses
        return [o.reshape(shape) for o in out]

    def evaluate(self, points):
        return self.radial_derivatives(points, 0)[0]

    __call__ = evaluate


class CellVPotential(VPotentialExact):
    """V_{s,2,lambda} of a node measure whose atoms stand for uniform cell masses.

    Far from an atom the cell acts as a point mass; for points within
    ``near`` grid spacings of a node direction the cell is replaced by m^d
    Gauss sub-atoms.
    """

    def __init__(self, mu: AtomicMeasure, params: PotentialParams, grid: QuadratureGrid, m: int = 2,
                 near: float = 3.0):
        super().__init__(mu, params)
        self.grid, self.m = grid, m
        self.radius = near * grid.meta["spacing"]
        idx = np.argmin(np.abs(1 - mu.points @ grid.nodes.conj().T), axis=1) if len(mu) else np.zeros(0, int)
        self.sub_points, self.sub_weights = cell_subsample(grid, idx, m) if len(mu) else (None, None)

    def radial_derivatives(self, points, kmax: int) -> list:
        out = super().radial_derivatives(points, kmax)
        if len(self.mu) == 0:
            return out
        points = np.asarray(points, dtype=complex)
        shape = points.shape[:-1]
        flat = points.reshape(-1, self.n)
        out = [o.reshape(-1).copy() for o in out]
        eu2 = (np.sum(np.abs(flat) ** 2, axis=1)[:, None] + 1
               - 2 * (flat @ self.mu.points.conj().T).real)
        pi, ai = np.nonzero(eu2 < self.radius ** 2)
        for st in range(0, len(pi), 4000):
            p_, a_ = pi[st:st + 4000], ai[st:st + 4000]
            x_point = np.einsum("pk,pk->p", flat[p_], self.mu.points[a_].conj())
            x_sub = np.einsum("pk,pqk->pq", flat[p_], self.sub_points[a_].conj())
            d_point = self.kernel_derivatives(x_point, kmax)
            d_sub = self.kernel_derivatives(x_sub, kmax)
            for j in range(kmax + 1):
                corr = self.mu.masses[a_] * (d_sub[j] @ self.sub_weights - d_point[j])
                np.add.at(out[j], p_, corr)
        return [o.reshape(shape) for o in out]


def radial_rule(exponent: float, panels: int = 24, q: int = 8):
    """Nodes/weights in t on (0, 1] for int_0^1 F(t) t^exponent dt, graded toward 0.

    The weight t^exponent is carried exactly on the first panel (Gauss-Jacobi);
    the remaining panels [2^-j-1, 2^-j] carry it in the weights.
    """
    lo = 2.0 ** -panels
    xj, wj = gauss_jacobi_01(q, 0.0, float(exponent))
    t = [lo * xj]
    w = [wj * lo ** (exponent + 1)]
    x, wl = roots_legendre(q)
    for j in range(panels):
        a, b = 2.0 ** -(j + 1), 2.0 ** -j
        tt = a + (b - a) * (x + 1) / 2
        t.append(tt)
        w.append(wl * (b - a) / 2 * tt ** exponent)
    return np.concatenate(t), np.concatenate(w)


class VPotential:
    """V_{s,p,lambda}(mu) for general p by radial quadrature of S(t,z)^(p'-1),
    S(t,z) = sum m_i t^c (1-(1-t)<z,eta_i>)^(-lam), c = lam+sp-n.

    Radial derivatives of S^a come from the power-series recurrence
    g_m = 1/(m s_0) sum_k (k a - m + k) s_k g_(m-k) on ordinary Taylor
    coefficients in the dilation variable.
    """

    def __init__(self, mu: AtomicMeasure, params: PotentialParams, panels: int = 24, q: int = 8):
        params.check(need_lambda=True)
        self.n, self.mu, self.params = mu.n, mu, params
        self.c = params.lam + params.s * params.p - params.n
        self.a = params.p_prime - 1
        self.t, self.w = radial_rule(self.c * self.a - 1, panels, q)
        self.branch_violation = False

    def radial_derivatives(self, points, kmax: int) -> list:
        points = np.asarray(points, dtype=complex)
        shape = points.shape[:-1]
        flat = points.reshape(-1, self.n)
        out = [np.zeros(len(flat), dtype=complex) for _ in range(kmax + 1)]
        if len(self.mu) == 0:
            return [o.reshape(shape) for o in out]
        lam, a = self.params.lam, self.a
        # S(t,z) / t^c as a kernel sum with centers (1-t) eta_i
        centers = ((1 - self.t)[:, None, None] * self.mu.points[None, :, :]).reshape(-1, self.n)
        coeffs = np.tile(self.mu.masses, len(self.t)).astype(complex)
        T, A = len(self.t), len(self.mu)
        for start in range(0, len(flat), 256):
            pts = flat[start:start + 256]
            # per-t sums: evaluate kernel columns grouped by t
            x = pts @ centers.conj().T                       # (P, T*A)
            one_minus = 1 - x
            base = np.exp(-lam * np.log(one_minus))
            u = x / one_minus
            polys = [[1.0]]
            for _ in range(kmax):
                prev = polys[-1]
                nxt = [0.0] * (len(prev) + 1)
                for i, cc in enumerate(prev):
                    nxt[i] += i * cc
                    nxt[i + 1] += (lam + i) * cc
                polys.append(nxt)
            s_coef = []
            for j, poly in enumerate(polys):
                acc = np.zeros_like(u)
                upow = np.ones_like(u)
                for i, cc in enumerate(poly):
                    if cc:
                        acc = acc + cc * upow
                    upow = upow * u
                vals = (base * acc * coeffs[None, :]).reshape(len(pts), T, A).sum(axis=2)
                s_coef.append(vals / math.factorial(j))
            s0 = s_coef[0]
            if np.any(s0.real <= 0):
                self.branch_violation = True
            g = [np.exp(a * np.log(s0))]
            for m in range(1, kmax + 1):
                acc = np.zeros_like(s0)
                for k in range(1, m + 1):
                    acc = acc + (k * a - m + k) * s_coef[k] * g[m - k]
                g.append(acc / (m * s0))
            for j in range(kmax + 1):
                out[j][start:start + 256] = (g[j] * math.factorial(j)) @ self.w
        return [o.reshape(shape) for o in out]

    def evaluate(self, points):
        return self.radial_derivatives(points, 0)[0]

    __call__ = evaluate


def holo_potential_V(mu: AtomicMeasure, params: PotentialParams, exact: bool | None = None, **kw):
    """V_{s,p,lambda}(mu); the hypergeometric closed form is used for p = 2 unless exact=False."""
    if exact is None:
        exact = params.p == 2
    return VPotentialExact(mu, params) if exact else VPotential(mu, params, **kw)


def holo_potential_U(mu: AtomicMeasure, params: PotentialParams, order: int = 12, panels: int = 20,
                     q: int = 6, strict: bool = False) -> KernelSum:
    """U_{s,p,lambda}(mu) as a kernel sum, by sphere-grid x radial product quadrature.

    U(z) = int_0^1 int (mu(B(zeta,t)) / t^(n-sp))^(p'-1) t^(lam-n) (1-(1-t)<z,zeta>)^(-lam) dsigma dt/t
    """
    params.check(need_lambda=True, strict_u=strict)
    n = mu.n
    if len(mu) == 0:
        return KernelSum(n, params.lam, [], np.zeros((0, n)))
    grid = sphere_grid(n, order)
    beta = (n - params.s * params.p) * (params.p_prime - 1)
    t, w = radial_rule(0.0, panels, q)
    masses = ball_mass_table(mu, grid.nodes, t)              # (nodes, T)
    dens = masses ** (params.p_prime - 1) * t[None, :] ** (-beta + params.lam - n - 1)
    coeffs = grid.weights[:, None] * dens * w[None, :]
    centers = (1 - t)[None, :, None] * grid.nodes[:, None, :]
    return KernelSum(n, params.lam, coeffs.reshape(-1), centers.reshape(-1, n))


def ball_mass_table(mu: AtomicMeasure, zetas: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """mu(B(zeta_j, t_k)) for all pairs (cell-aware)."""
    d = koranyi_distance(zetas, mu.points)               # (J, A)
    inside = (d[:, :, None] < 2 * radii[None, None, :]).astype(float)
    if mu.areas is not None:
        self_ = d < COINCIDE
        if self_.any():
            frac = np.minimum(1.0, cap_area(mu.n, 2 * radii)[None, :] / mu.areas[:, None])  # (A, T)
            rows, cols = np.nonzero(self_)
            inside[rows, cols, :] = frac[cols]
    return np.einsum("jak,a->jk", inside, mu.masses)


# Wolff potential and energies ------------------------------------------------------------

def _wolff_single(n, beta, a, d, masses, areas) -> float:
    """int_0^1 (mu(B(zeta,t)))^a t^(-beta-1) dt for one evaluation point.

    d: distances |1-<zeta, eta_i>|.  Point atoms at distance 0 give +inf.
    """
    self_ = d < COINCIDE
    if self_.any() and areas is None:
        return math.inf
    jumps = np.clip(d[~self_] / 2, 0, 1)
    step_m = masses[~self_]
    order = np.argsort(jumps)
    jumps, step_m = jumps[order], step_m[order]
    cum = np.concatenate([[0.0], np.cumsum(step_m)])
    self_m = masses[self_]
    self_a = areas[self_] if areas is not None else np.zeros(0)
    self_t = np.array([_self_cell(n, float(ar), 0.0)[0] / 2 for ar in self_a])

    def self_mass(t):
        if not len(self_m):
            return 0.0 * t
        return sum(m * np.minimum(1.0, cap_area(n, 2 * t) / ar) for m, ar in zip(self_m, self_a))

    breaks = np.unique(np.concatenate([[0.0, 1.0], jumps[jumps < 1], self_t[self_t < 1]]))
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi <= lo:
            continue
        const = cum[np.searchsorted(jumps, (lo + hi) / 2, side="right")]
        smooth = len(self_m) and lo < self_t.max()
        if not smooth:
            if const > 0:
                total += const ** a * (lo ** -beta - hi ** -beta) / beta if lo > 0 else math.inf
            continue
        if lo == 0:
            # mass ~ t^n near 0: carry t^(n a - beta - 1) in the weight
            # the rule samples t = 0, where the ratio has a finite limit
            floor = 1e-9 * hi
            f = lambda t: ((const + self_mass(max(t, floor))) / max(t, floor) ** n) ** a
            val, _ = integrate.quad(f, 0, hi, weight="alg", wvar=(n * a - beta - 1, 0), limit=200)
        else:
            val, _ = integrate.quad(lambda t: (const + self_mass(t)) ** a * t ** (-beta - 1), lo, hi, limit=200)
        total += val
    return total


def wolff_potential(mu: AtomicMeasure, s: float, p: float, points, weight: Callable | None = None,
                    weight_order: int = 24) -> np.ndarray:
    """W_{s,p}(mu)(zeta) = int_0^1 (mu(B(zeta,t)) / t^(n-sp))^(p'-1) dt/t.

    Exact piecewise power integrals for point atoms; cell atoms at zeta add
    a smooth part integrated by adaptive quadrature.  With a weight w the
    sphere average of w^-(p'-1) over B(zeta,t) multiplies the integrand.
    """
    points = np.atleast_2d(np.asarray(points, dtype=complex))
    n = points.shape[1]
    if not 0 < s < n / p:
        raise ValueError("need 0 < s < n/p")
    pp = p / (p - 1)
    a = pp - 1
    beta = (n - s * p) * a
    out = np.zeros(len(points))
    if len(mu) == 0:
        return out
    if weight is not None:
        return _weighted_wolff(mu, s, p, points, weight, weight_order)
    for i, z in enumerate(points):
        d = koranyi_distance(mu.points, z)
        out[i] = _wolff_single(n, beta, a, d, mu.masses, mu.areas)
    return out


def _weighted_wolff(mu, s, p, points, weight, order):
    n = points.shape[1]
    pp = p / (p - 1)
    a = pp - 1
    grid = sphere_grid(n, order)
    wv = np.asarray(weight(grid.nodes), dtype=float) ** (-a)
    t, tw = radial_rule(-(n - s * p) * a - 1, panels=30, q=8)
    out = np.zeros(len(points))
    for i, z in enumerate(points):
        masses = ball_mass_table(mu, z[None, :], t)[0]
        dist = koranyi_distance(grid.nodes, z)
        avg = np.empty(len(t))
        for k, tk in enumerate(t):
            inside = dist < 2 * tk
            avg[k] = np.sum(grid.weights * wv * inside) / np.sum(grid.weights * inside) if inside.any() \
                else wv[np.argmin(dist)]
        out[i] = np.sum(tw * masses ** a * avg)
    return out


def wolff_potential_quadrature(mu: AtomicMeasure, s: float, p: float, point, rtol: float = 1e-10) -> float:
    """W_{s,p}(mu) by adaptive quadrature of the raw integrand (no knowledge of the jumps)."""
    z = np.asarray(point, dtype=complex)
    n = len(z)
    a = p / (p - 1) - 1
    beta = (n - s * p) * a

    def integrand(x):
        t = math.exp(-x)       # x = -log t, dt/t = dx
        return ball_mass(mu, z, t) ** a * t ** (-beta)

    val, _ = integrate.quad(integrand, 0, 60, limit=2000, epsrel=rtol, epsabs=0)
    return val


def _near_pairs(targets: np.ndarray, nodes: np.ndarray, radius: float):
    """Index pairs (i, j) with |target_i - node_j| < radius (Euclidean), chunked."""
    rows, cols = [], []
    for st in range(0, len(targets), 1024):
        chunk = targets[st:st + 1024]
        eu2 = np.clip(2 - 2 * (chunk @ nodes.conj().T).real, 0, None)
        r, c = np.nonzero(eu2 < radius ** 2)
        rows.append(r + st)
        cols.append(c)
    return np.concatenate(rows), np.concatenate(cols)


def _fill_near_field(A, targets, grid, power, pairs, m):
    ii, jj = pairs
    if not len(ii):
        return
    sub, sw = cell_subsample(grid, np.arange(len(grid.weights)), m)
    for st in range(0, len(ii), 4096):
        a, b = ii[st:st + 4096], jj[st:st + 4096]
        d = np.abs(1 - np.einsum("pk,pqk->pq", targets[a], sub[b].conj()))
        A[a, b] = d ** (-power) @ sw


@lru_cache(maxsize=8)
def _node_matrix(kind: str, n: int, order: int, s: float) -> np.ndarray:
    grid = cell_sphere_grid(n, order) if kind == "cells" else sphere_grid(n, order)
    return _riesz_matrix(grid, s, None)


def _riesz_matrix(grid: QuadratureGrid, s: float, targets, near: float = 6.0, close: float = 2.5):
    n = grid.n
    power = n - s
    nodes = grid.nodes
    square = targets is None
    T = nodes if square else np.atleast_2d(np.asarray(targets, dtype=complex))
    with np.errstate(divide="ignore"):
        A = np.abs(1 - T @ nodes.conj().T) ** (-power)
    if grid.kind == "cells":
        h = grid.meta["spacing"]
        far_pairs = _near_pairs(T, nodes, near * h)
        close_pairs = _near_pairs(T, nodes, close * h)
        _fill_near_field(A, T, grid, power, far_pairs, 4)
        _fill_near_field(A, T, grid, power, close_pairs, 8)
        if square:
            np.fill_diagonal(A, 0.0)
            # the cell averages of a row integrate the kernel over the whole sphere
            diag = (sphere_riesz_constant(n, s) - A @ grid.weights) / grid.weights
            if np.any(diag <= 0):
                raise RuntimeError("near-field resolution too coarse for a positive diagonal")
            np.fill_diagonal(A, diag)
    elif square:
        np.fill_diagonal(A, [cap_average_kernel(n, a, power) for a in grid.weights])
    return A


def riesz_matrix(grid: QuadratureGrid, s: float, targets=None) -> np.ndarray:
    """A with I_s(sum_j m_j [cell j]/sigma_j)(target_i) = (A m)_i.

    Entries are kernel averages over cells: exact-centre values far away,
    Gauss sub-sampling of cell boxes nearby, and for node targets a diagonal
    fixed by the exact row integral I_s(1) (singularity subtraction).  On
    product grids without cell geometry the diagonal is the cap average.
    """
    if targets is None:
        return _node_matrix(grid.kind, grid.n, grid.order, float(s))
    return _riesz_matrix(grid, s, targets)


def node_masses(mu: AtomicMeasure, grid: QuadratureGrid) -> np.ndarray | None:
    """Masses of mu per grid node, or None when some atom is not a node."""
    out = np.zeros(len(grid.weights))
    if len(mu) == 0:
        return out
    d = np.abs(1 - mu.points @ grid.nodes.conj().T)
    idx = np.argmin(d, axis=1)
    if np.any(d[np.arange(len(mu)), idx] > COINCIDE):
        return None
    np.add.at(out, idx, mu.masses)
    return out


def riesz_on_grid(mu: AtomicMeasure, s: float, grid: QuadratureGrid) -> np.ndarray:
    """I_s(mu) at the grid nodes.

    For node-supported mu the value at node i is the potential of mu averaged
    over cell i, i.e. column i of the cell matrix.
    """
    m = node_masses(mu, grid)
    if m is not None:
        return riesz_matrix(grid, s).T @ m
    return riesz_potential(mu, s, grid.nodes)


def energy(mu: AtomicMeasure, s: float, p: float, grid: QuadratureGrid | None = None, order: int = 16,
           weight: Callable | None = None) -> float:
    """E_{s,p,w}(mu) = int (I_s mu)^p' w^-(p'-1) d sigma by sphere quadrature."""
    grid = sphere_grid(mu.n, order) if grid is None else grid
    if len(mu) == 0:
        return 0.0
    pp = p / (p - 1)
    vals = riesz_on_grid(mu, s, grid) ** pp
    if weight is not None:
        vals = vals * np.asarray(weight(grid.nodes), dtype=float) ** (-(pp - 1))
    return float(np.sum(grid.weights * vals))


def nonlinear_riesz(mu: AtomicMeasure, s: float, p: float, grid: QuadratureGrid, points=None) -> np.ndarray:
    """I_s[(I_s mu)^(p'-1)] at the points (default: the grid nodes)."""
    inner = riesz_on_grid(mu, s, grid) ** (p / (p - 1) - 1)
    return riesz_matrix(grid, s, points) @ (grid.weights * inner)


@dataclass
class ComparabilityReport:
    energy: float
    nonlinear: float
    wolff: float

    @property
    def ratios(self) -> dict:
        if self.energy == 0:
            return {"E/N": 1.0, "E/W": 1.0, "N/W": 1.0}
        return {"E/N": self.energy / self.nonlinear, "E/W": self.energy / self.wolff,
                "N/W": self.nonlinear / self.wolff}


def wolff_comparability(mu: AtomicMeasure, s: float, p: float, grid: QuadratureGrid) -> ComparabilityReport:
    """(E(mu), int I_s[(I_s mu)^(p'-1)] d mu, int W(mu) d mu) for a measure on the grid nodes."""
    if len(mu) == 0:
        return ComparabilityReport(0.0, 0.0, 0.0)
    m = node_masses(mu, grid)
    if m is None:
        raise ValueError("comparability needs a measure supported on the grid nodes")
    E = energy(mu, s, p, grid)
    N = float(m @ nonlinear_riesz(mu, s, p, grid))
    W = float(np.sum(mu.masses * wolff_potential(mu, s, p, mu.points)))
    return ComparabilityReport(E, N, W)


def pointwise_wolff_ratio(mu: AtomicMeasure, s: float, p: float, grid: QuadratureGrid, points) -> np.ndarray:
    """W(mu)(zeta) / I_s[(I_s mu)^(p'-1)](zeta) at the sample points."""
    W = wolff_potential(mu, s, p, points)
    N = nonlinear_riesz(mu, s, p, grid, points)
    return W / N


# radial behaviour ---------------------------------------------------------------------

def radial_depths(J: int = 12) -> np.ndarray:
    return 2.0 ** -np.arange(1, J + 1)


def radial_values(F, etas: np.ndarray, depths: np.ndarray) -> np.ndarray:
    """F((1-d) eta) for all directions and depths, shape (len(etas), len(depths))."""
    etas = np.atleast_2d(etas)
    pts = (1 - depths)[None, :, None] * etas[:, None, :]
    return np.asarray(F.evaluate(pts.reshape(-1, etas.shape[1]))).reshape(len(etas), len(depths))


def radial_maximal(F, eta, depths: np.ndarray | None = None) -> float:
    """max over the radial grid of |F(rho eta)|."""
    depths = radial_depths() if depths is None else depths
    return float(np.max(np.abs(radial_values(F, np.asarray(eta)[None, :], depths))))


@dataclass
class LiminfReport:
    min_real_ratio: float   # min over directions of Re F(rho eta)/W(eta) at the deep radii
    max_majorant_ratio: float
    directions: int

    @property
    def ok(self) -> bool:
        return self.directions == 0 or (self.min_real_ratio > 0 and np.isfinite(self.max_majorant_ratio))


def liminf_bound_check(mu: AtomicMeasure, params: PotentialParams, etas: np.ndarray, grid: QuadratureGrid,
                       depths: np.ndarray | None = None, potential=None, deep: int = 3) -> LiminfReport:
    """Positivity of Re F / W near the boundary and boundedness of M_rad F / majorant.

    F is U (p < 2) or V (p >= 2); the majorant is I_s[(I_s mu)^(p'-1)] for U and W for V.
    """
    if len(mu) == 0 or len(etas) == 0:
        return LiminfReport(math.inf, 0.0, 0)
    depths = radial_depths() if depths is None else depths
    if potential is None:
        potential = holo_potential_U(mu, params) if params.p < 2 else holo_potential_V(mu, params)
    vals = radial_values(potential, etas, depths)
    W = wolff_potential(mu, params.s, params.p, etas)
    major = nonlinear_riesz(mu, params.s, params.p, grid, etas) if params.p < 2 else W
    min_real = float(np.min(vals[:, -deep:].real.min(axis=1) / W))
    max_ratio = float(np.max(np.abs(vals).max(axis=1) / major))
    return LiminfReport(min_real, max_ratio, len(etas))


# A1 diagnostic ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightField:
    grid: QuadratureGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.weights.shape or np.any(vals <= 0) or not np.all(np.isfinite(vals)):
            raise ValueError("weight samples must be positive and finite, one per node")
        object.__setattr__(self, "values", vals)

    def scaled(self, c: float) -> "WeightField":
        return WeightField(self.grid, self.values * c)


def a1_ratio(w: WeightField, radii=(0.5, 0.25, 0.125, 0.0625), centers: int = 64, min_nodes: int = 3,
             seed: int = 0) -> float:
    """max over balls B(zeta, r) of (sigma-average of w) / (min of w) on the ball's nodes."""
    grid = w.grid
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(grid.weights), size=min(centers, len(grid.weights)), replace=False)
    best = 1.0
    for i in idx:
        d = koranyi_distance(grid.nodes, grid.nodes[i])
        for r in radii:
            inside = d < 2 * r
            if inside.sum() < min_nodes:
                continue
            avg = np.sum(grid.weights[inside] * w.values[inside]) / np.sum(grid.weights[inside])
            best = max(best, avg / w.values[inside].min())
    return float(best)
