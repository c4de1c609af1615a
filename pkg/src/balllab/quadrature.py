"""Quadrature on the sphere, the weighted ball, radial grids and tent regions.

Sphere rules use the torus parametrization zeta_j = sqrt(t_j) exp(i theta_j),
with t uniform on the simplex (collapsed Gauss-Jacobi) and equispaced angles.
Kernels that peak near a boundary point are integrated in coordinates rotated
so the peak sits at e_1, with panels graded geometrically toward it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import betaln, roots_jacobi, roots_legendre

from .spectral import c_N


@dataclass(frozen=True)
class QuadratureGrid:
    kind: str
    n: int
    nodes: np.ndarray
    weights: np.ndarray
    order: int
    exactness_degree: int
    meta: dict = field(default_factory=dict)

    def integrate(self, values_or_fn) -> complex | float:
        values = values_or_fn(self.nodes) if callable(values_or_fn) else np.asarray(values_or_fn)
        return np.sum(self.weights * values)

    def __len__(self):
        return len(self.weights)


class QuadratureDivergence(RuntimeError):
    """Raised when refinement does not settle within the node budget."""


@dataclass
class IntegralEstimate:
    value: float
    converged: bool
    nodes: int
    relative_change: float


# one-dimensional rules -------------------------------------------------------

@lru_cache(maxsize=512)
def gauss_jacobi_01(m: int, alpha: float, beta: float):
    """Nodes/weights on [0,1] for the weight (1-x)^alpha x^beta."""
    x, w = roots_jacobi(m, alpha, beta)
    return (x + 1) / 2, w / 2 ** (alpha + beta + 1)


@lru_cache(maxsize=512)
def gauss_legendre_01(m: int):
    x, w = roots_legendre(m)
    return (x + 1) / 2, w / 2


def composite_legendre(breaks, m: int):
    """Composite Gauss-Legendre nodes/weights over consecutive intervals."""
    x0, w0 = gauss_legendre_01(m)
    breaks = np.asarray(breaks, dtype=float)
    a, b = breaks[:-1, None], breaks[1:, None]
    return (a + (b - a) * x0).ravel(), ((b - a) * w0).ravel()


# sphere and ball grids ---------------------------------------------------------

def _simplex_rule(n: int, m: int):
    """Rule for the uniform probability measure on {t >= 0, sum t = 1} in R^n."""
    if n == 1:
        return np.ones((1, 1)), np.ones(1)
    rem = np.ones(1)
    t_cols = []
    weights = np.ones(1)
    for i in range(1, n):
        x, w = gauss_jacobi_01(m, float(n - 1 - i), 0.0)
        # outer product with existing tuples
        t_cols = [np.repeat(c, m) for c in t_cols]
        rem_rep = np.repeat(rem, m)
        xs = np.tile(x, len(rem))
        t_cols.append(rem_rep * xs)
        rem = rem_rep * (1 - xs)
        weights = np.repeat(weights, m) * np.tile(w, len(weights))
    t_cols.append(rem)
    t = np.stack(t_cols, axis=1)
    weights = weights * math.factorial(n - 1)
    return t, weights


@lru_cache(maxsize=64)
def _sphere_grid_cached(n: int, order: int):
    m = order // 4 + 1
    t, wt = _simplex_rule(n, m)
    K = order + 1
    theta = 2 * np.pi * np.arange(K) / K
    phases = np.exp(1j * theta)
    # all angle combinations
    grids = np.meshgrid(*([np.arange(K)] * n), indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=1)
    ang = phases[idx]  # (K^n, n)
    nodes = (np.sqrt(t)[:, None, :] * ang[None, :, :]).reshape(-1, n)
    weights = (wt[:, None] * np.full(len(ang), 1.0 / len(ang))[None, :]).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def sphere_grid(n: int, order: int) -> QuadratureGrid:
    """Product rule on S^{2n-1}; integrates zeta^a conj(zeta)^b exactly for |a|+|b| <= order."""
    if order < 1:
        raise ValueError("order must be >= 1")
    nodes, weights = _sphere_grid_cached(n, order)
    return QuadratureGrid("sphere", n, nodes, weights, order, order)


def ball_grid(n: int, N, order: int, normalized: bool = True) -> QuadratureGrid:
    """Gauss-Jacobi radial rule times the sphere rule for c_N (1-|w|^2)^(N-1) dnu.

    With ``normalized=False`` the weights integrate against
    (1-|w|^2)^(N-1) dnu without the constant c_N.
    """
    N = float(N)
    if N <= 0:
        raise ValueError("N must be positive")
    sph = sphere_grid(n, order)
    m = order // 2 + 1
    x, w = gauss_jacobi_01(m, N - 1.0, float(n - 1))
    w = w / w.sum()
    nodes = (np.sqrt(x)[:, None, None] * sph.nodes[None, :, :]).reshape(-1, n)
    weights = (w[:, None] * sph.weights[None, :]).ravel()
    if not normalized:
        weights = weights / float(c_N(n, _as_fraction(N)))
    return QuadratureGrid(f"ball({N:g})", n, nodes, weights, order, order, {"N": N})


@lru_cache(maxsize=16)
def _cell_boxes(n: int, order: int):
    if n == 1:
        K = max(order, 3)
        edges = 2 * np.pi * np.arange(K + 1) / K
        return np.stack([edges[:-1], edges[1:]], axis=1)
    M = max(order // 2, 1)
    step = np.pi / 2 / M
    boxes = []
    for k in range(M):
        a, b = k * step, (k + 1) * step
        mid = (a + b) / 2
        K1 = max(1, int(round(2 * np.pi * math.cos(mid) / step)))
        K2 = max(1, int(round(2 * np.pi * math.sin(mid) / step)))
        u0, u1 = math.sin(a) ** 2, math.sin(b) ** 2
        # stagger successive rings so cells do not line up
        c1 = 2 * np.pi * (np.arange(K1) + 0.5 * k) / K1
        c2 = 2 * np.pi * (np.arange(K2) + 0.5 * (k % 2)) / K2
        C1, C2 = np.meshgrid(c1, c2, indexing="ij")
        for x, y in zip(C1.ravel(), C2.ravel()):
            boxes.append((u0, u1, x - np.pi / K1, x + np.pi / K1, y - np.pi / K2, y + np.pi / K2))
    return np.array(boxes)


def cell_sphere_grid(n: int, order: int) -> QuadratureGrid:
    """Quasi-uniform partition of the sphere into cells, one node per cell.

    n = 1: equal arcs.  n = 2: with zeta = (sqrt(u) e^{i a}, sqrt(1-u) e^{i b})
    the normalized surface measure is du da db / (4 pi^2), so cells are boxes
    in (u, a, b): rings equally spaced in geodesic angle, each split into a
    number of angular pieces proportional to its circumference.  Weights are
    exact cell areas; ``meta['boxes']`` stores the cells.
    """
    if n not in (1, 2):
        raise NotImplementedError("cell grids are available for n = 1 and n = 2")
    B = _cell_boxes(n, order)
    if n == 1:
        mid = B.mean(axis=1)
        nodes = np.exp(1j * mid)[:, None]
        weights = (B[:, 1] - B[:, 0]) / (2 * np.pi)
    else:
        u = (B[:, 0] + B[:, 1]) / 2
        a = (B[:, 2] + B[:, 3]) / 2
        b = (B[:, 4] + B[:, 5]) / 2
        nodes = np.stack([np.sqrt(u) * np.exp(1j * a), np.sqrt(1 - u) * np.exp(1j * b)], axis=1)
        weights = (B[:, 1] - B[:, 0]) * (B[:, 3] - B[:, 2]) * (B[:, 5] - B[:, 4]) / (4 * np.pi ** 2)
    spacing = 2 * np.pi / len(B) if n == 1 else np.pi / 2 / max(order // 2, 1)
    return QuadratureGrid("cells", n, nodes, weights, order, 1, {"boxes": B, "spacing": spacing})


def cell_subsample(grid: QuadratureGrid, idx: np.ndarray, m: int):
    """Gauss points inside the given cells: (len(idx), m^d, n) nodes and weights summing to 1 per cell."""
    B = grid.meta["boxes"][np.asarray(idx)]
    x, w = gauss_legendre_01(m)
    if grid.n == 1:
        th = B[:, :1] + (B[:, 1:2] - B[:, :1]) * x[None, :]
        return np.exp(1j * th)[:, :, None], w
    u = B[:, 0:1] + (B[:, 1:2] - B[:, 0:1]) * x[None, :]
    a = B[:, 2:3] + (B[:, 3:4] - B[:, 2:3]) * x[None, :]
    b = B[:, 4:5] + (B[:, 5:6] - B[:, 4:5]) * x[None, :]
    z1 = np.sqrt(u)[:, :, None, None] * np.exp(1j * a)[:, None, :, None]
    z2 = np.sqrt(1 - u)[:, :, None, None] * np.exp(1j * b)[:, None, None, :]
    shape = (len(B), m, m, m)
    pts = np.stack([np.broadcast_to(z1, shape), np.broadcast_to(z2, shape)], axis=-1).reshape(len(B), m ** 3, 2)
    ww = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    return pts, ww


def _as_fraction(x: float):
    from fractions import Fraction
    f = Fraction(x).limit_denominator(10**6)
    return f if abs(float(f) - x) < 1e-14 else x


def radial_grid(depths: int = 12) -> np.ndarray:
    """Radii rho_j with 1 - rho_j = 2^-j, j = 1..depths."""
    return 1.0 - 2.0 ** -np.arange(1, depths + 1)


def random_directions(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    z = rng.normal(size=(count, n)) + 1j * rng.normal(size=(count, n))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def unitary_with_first_column(e: np.ndarray) -> np.ndarray:
    """Unitary U with U e_1 = e (e a unit vector)."""
    e = np.asarray(e, dtype=complex)
    n = len(e)
    A = np.eye(n, dtype=complex)
    j = int(np.argmax(np.abs(e)))
    cols = [e] + [A[:, i] for i in range(n) if i != j]
    Q, R = np.linalg.qr(np.stack(cols, axis=1))
    # fix phases so the first column equals e exactly
    d = np.diag(R)
    Q = Q * (d / np.abs(d))[None, :]
    return Q


# peaked ball integrals -----------------------------------------------------------

def _geometric_breaks(delta: float, top: float) -> np.ndarray:
    b = [0.0, delta / 2, delta]
    while b[-1] * 2 < top:
        b.append(b[-1] * 2)
    b.append(top)
    return np.array(sorted(set(b)))


def peaked_ball_nodes(n: int, direction: np.ndarray, delta: float, a: float, q: int):
    """Nodes and weights for  int_B g(u) (1-|u|^2)^a dnu(u)  concentrating near
    ``direction`` at scale ``delta`` (distance of the peak to the sphere)."""
    delta = float(min(max(delta, 1e-15), 1.0))
    U = unitary_with_first_column(direction)
    c = n - 1 + a
    # tau = 1 - |v_1|^2: first panel carries tau^c, others are smooth
    tb = _geometric_breaks(delta, 1.0)
    xj, wj = gauss_jacobi_01(q, 0.0, float(c))
    tau0 = tb[1] * xj
    wt0 = wj * tb[1] ** (c + 1)
    tau1, wt1 = composite_legendre(tb[1:], q)
    wt1 = wt1 * tau1 ** c
    tau = np.concatenate([tau0, tau1])
    wtau = np.concatenate([wt0, wt1])
    hb = _geometric_breaks(delta, np.pi)
    theta_pos, wth = composite_legendre(hb, q)
    theta = np.concatenate([-theta_pos[::-1], theta_pos])
    wtheta = np.concatenate([wth[::-1], wth])
    v1 = (np.sqrt(1 - tau)[:, None] * np.exp(1j * theta)[None, :]).ravel()
    w1 = (wtau[:, None] * wtheta[None, :]).ravel()
    tau_flat = np.repeat(tau, len(theta))
    if n == 1:
        pts = v1[:, None]
        weights = w1 / (2 * np.pi)
    else:
        qs = max(2, q // 2)
        s, ws = gauss_jacobi_01(qs, float(a), float(n - 2))
        xi = sphere_grid(n - 1, max(2, q - 1))
        y = tau_flat[:, None] * s[None, :]  # (P, qs)
        rest = np.sqrt(y)[:, :, None, None] * xi.nodes[None, None, :, :]
        P = len(v1)
        pts = np.concatenate([
            np.broadcast_to(v1[:, None, None, None], (P, qs, len(xi.weights), 1)),
            rest], axis=3).reshape(-1, n)
        weights = (w1[:, None, None] * ws[None, :, None] * xi.weights[None, None, :]).ravel()
        weights = weights * n * (n - 1) / (2 * np.pi)
    return pts @ U.T, weights


def integrate_peaked(func: Callable[[np.ndarray], np.ndarray], n: int, direction, delta: float, a: float,
                     rtol: float = 1e-8, q_start: int = 4, q_max: int = 24, max_nodes: int = 6_000_000,
                     raise_on_fail: bool = False) -> IntegralEstimate:
    """Refine the peaked rule (more points per panel) until successive values agree."""
    prev = None
    q = q_start
    change = np.inf
    nodes = 0
    while q <= q_max:
        pts, w = peaked_ball_nodes(n, direction, delta, a, q)
        nodes = len(w)
        if nodes > max_nodes:
            break
        val = float(np.sum(w * func(pts)).real)
        if prev is not None:
            change = abs(val - prev) / max(abs(val), 1e-300)
            if change < rtol:
                return IntegralEstimate(val, True, nodes, change)
        prev = val
        q = int(math.ceil(q * 1.5))
    if raise_on_fail:
        raise QuadratureDivergence(f"no convergence (last relative change {change:.2e})")
    return IntegralEstimate(prev if prev is not None else float("nan"), False, nodes, change)


def weighted_kernel_integral(weight_fn: Callable | None, n: int, z: np.ndarray, a: float, b: float,
                             rtol: float = 1e-6, **kw) -> IntegralEstimate:
    """int_B weight_fn(u) (1-|u|^2)^a / |1 - z.conj(u)|^b dnu(u)."""
    z = np.asarray(z, dtype=complex)
    r = float(np.linalg.norm(z))
    direction = z / r if r > 0 else np.eye(n, dtype=complex)[0]
    delta = max(1 - r, 1e-15)

    def integrand(u):
        ker = np.abs(1 - u @ z.conj()) ** (-b)
        return ker if weight_fn is None else ker * weight_fn(u)
    return integrate_peaked(integrand, n, direction, delta, a, rtol=rtol, **kw)


# weighted kernel integrals ----------------------------------------------------------

def kernel_integral_I(n: int, N: float, M: float, L: float, z, u, rtol: float = 1e-6, **kw) -> IntegralEstimate:
    """I^N_{M,L}(z,u) = int (1-|w|^2)^(N-1) / (|1-u.w|^(n+M) |1-z.w|^(n+L)) dnu(w).

    The integrand has two peaks.  A smooth partition of unity splits it into a
    piece that is only singular near z and one only singular near u; each piece
    is integrated with its own graded rule.
    """
    z = np.asarray(z, dtype=complex)
    u = np.asarray(u, dtype=complex)
    if N <= 0:
        raise ValueError("N must be positive")
    power = n + max(M, L, 0) + 2.0

    def parts(w, which):
        au = np.abs(1 - w @ u.conj())
        az = np.abs(1 - w @ z.conj())
        base = au ** (-(n + M)) * az ** (-(n + L))
        # log-domain partition weight avoids overflow for extreme ratios
        lr = power * (np.log(au) - np.log(az))
        chi_z = 0.5 * (1 + np.tanh(lr / 2))
        return base * (chi_z if which == "z" else 1 - chi_z)

    est = []
    for which, point in (("z", z), ("u", u)):
        r = float(np.linalg.norm(point))
        direction = point / r if r > 0 else np.eye(n, dtype=complex)[0]
        est.append(integrate_peaked(lambda w, which=which: parts(w, which), n, direction, max(1 - r, 1e-15),
                                    N - 1, rtol=rtol, **kw))
    value = est[0].value + est[1].value
    return IntegralEstimate(value, est[0].converged and est[1].converged, est[0].nodes + est[1].nodes,
                            max(est[0].relative_change, est[1].relative_change))


def kernel_regime(n: int, N: float, M: float, L: float) -> str:
    if np.isclose(N, n + M + L):
        return "log"
    if M > N > L:
        return "M>N>L"
    if L > N > M:
        return "L>N>M"
    if M > N and L > N:
        return "M,L>N"
    if M < N and L < N:
        return "M,L<N"
    return "boundary"


def estimate_bound_I(n: int, N: float, M: float, L: float, z, u) -> float:
    """Case-selected upper bound for I^N_{M,L}(z,u), constants omitted."""
    z = np.asarray(z, dtype=complex)
    u = np.asarray(u, dtype=complex)
    d = abs(1 - np.vdot(u, z))  # |1 - z.conj(u)|
    du = 1 - np.vdot(u, u).real
    dz = 1 - np.vdot(z, z).real
    regime = kernel_regime(n, N, M, L)
    if regime == "log":
        return math.log(math.e / d)
    if regime == "M>N>L":
        return du ** (N - M) / d ** (n + L)
    if regime == "L>N>M":
        return dz ** (N - L) / d ** (n + M)
    if regime == "M,L>N":
        return du ** (N - M) / d ** (n + L) + dz ** (N - L) / d ** (n + M)
    if regime == "M,L<N":
        return 1 + d ** (-(n + M + L - N))
    raise ValueError("parameters on a regime boundary; no bound is stated there")


def beta_integral_I0(n: int, N: float) -> float:
    """I^N_{M,L}(0,0) = n B(n, N)."""
    return n * math.exp(betaln(n, N))


# tent regions ----------------------------------------------------------------------

@dataclass(frozen=True)
class TentResolution:
    q_tau: int = 3
    q_psi: int = 6
    q_s: int = 2
    q_xi: int = 4
    depth: float = 30.0

    def doubled(self) -> "TentResolution":
        return TentResolution(self.q_tau * 2, self.q_psi * 2, self.q_s * 2, self.q_xi * 2, self.depth)


@lru_cache(maxsize=32)
def _tent_template(n: int, res: TentResolution):
    """Nodes in rotated coordinates (apex at e_1) and weights including the
    factor (1-|w|^2)^-(n+1) of the tent measure."""
    psi_max = math.acos(0.25)
    psi, wpsi = composite_legendre(np.linspace(-psi_max, psi_max, 3), res.q_psi)
    tau, wtau = composite_legendre(np.arange(0.0, res.depth + 1e-9, 1.0), res.q_tau)
    P, T = np.meshgrid(psi, tau, indexing="ij")
    WP, WT = np.meshgrid(wpsi, wtau, indexing="ij")
    Rmax = 2 * np.cos(P) - 0.5
    r = Rmax * np.exp(-T)
    v1 = 1 - r * np.exp(1j * P)
    one_minus_v1 = r * (2 * np.cos(P) - r)  # 1 - |v1|^2
    Y = r * (Rmax - r)
    base_w = WP * WT * r * r  # dr = r dtau
    if n == 1:
        pts = v1.reshape(-1, 1)
        weights = (base_w / np.pi / one_minus_v1 ** 2).ravel()
        return pts, weights
    s, ws = gauss_jacobi_01(res.q_s, 0.0, float(n - 2))
    xi = sphere_grid(n - 1, max(1, res.q_xi - 1))
    y = Y[..., None] * s  # (ψ, τ, s)
    dens = 1 - (one_minus_v1[..., None] - y)  # |w|^2
    lift = (one_minus_v1[..., None] - y)  # 1 - |w|^2
    rest = np.sqrt(y)[..., None, None] * xi.nodes  # (ψ, τ, s, ξ, n-1)
    shape = rest.shape[:-1]
    first = np.broadcast_to(v1[..., None, None, None], shape + (1,))
    pts = np.concatenate([first, rest], axis=-1).reshape(-1, n)
    w = (base_w[..., None] * Y[..., None] ** (n - 1) * ws / lift ** (n + 1))[..., None] * xi.weights
    weights = (w * n * (n - 1) / np.pi).reshape(-1)
    del dens
    return pts, weights


def tent_region_grid(zeta, n: int, res: TentResolution = TentResolution()) -> QuadratureGrid:
    """Rule for int_{Gamma(zeta)} g(w) dnu(w) / (1-|w|^2)^(n+1)."""
    zeta = np.asarray(zeta, dtype=complex)
    pts, w = _tent_template(n, res)
    U = unitary_with_first_column(zeta / np.linalg.norm(zeta))
    return QuadratureGrid("tent", n, pts @ U.T, w, res.q_tau, 0, {"zeta": zeta})


def in_tent(points, zeta) -> np.ndarray:
    points = np.asarray(points, dtype=complex)
    return np.abs(1 - points @ np.conj(zeta)) < 2 * (1 - np.sum(np.abs(points) ** 2, axis=-1))


def tent_norm(phi: Callable, p: float, q: float, n: int, density: Callable | None = None,
              outer_order: int = 6, res: TentResolution = TentResolution(), return_inner: bool = False):
    """||phi||_{T^{p,q}(mu)} with d mu = density dnu (density 1 when omitted).

    The inner aperture integrals are taken over Gamma(zeta) for every node of an
    outer sphere rule; the result is the p-th root of the outer integral.
    """
    outer = sphere_grid(n, outer_order)
    pts, w = _tent_template(n, res)
    inner = np.empty(len(outer.weights))
    tail = np.empty(len(outer.weights))
    # weights belonging to the deepest unit of tau, used as a divergence probe
    deep = _deep_mask(n, res)
    for i, zeta in enumerate(outer.nodes):
        U = unitary_with_first_column(zeta)
        x = pts @ U.T
        vals = np.abs(phi(x)) ** q
        if density is not None:
            vals = vals * density(x)
        inner[i] = np.sum(w * vals)
        tail[i] = np.sum((w * vals)[deep])
    total = np.sum(outer.weights * inner ** (p / q))
    norm = total ** (1 / p)
    diverging = bool(np.any(tail > 1e-3 * np.maximum(inner, 1e-300)))
    if return_inner:
        return norm, inner, diverging
    return norm


@lru_cache(maxsize=32)
def _deep_mask(n: int, res: TentResolution) -> np.ndarray:
    pts, _ = _tent_template(n, res)
    # points within the last unit of depth sit closest to the apex
    depth = -np.log(np.maximum(np.abs(1 - pts[:, 0]), 1e-300))
    return depth > res.depth - 1 - np.log(2.0)
