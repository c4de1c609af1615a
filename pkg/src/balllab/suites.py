"""Verification suites run by the command line: exact identities, potential
theory checks and capacity / multiplier certificates.

Each check returns a :class:`Check`; a suite passes when every check does.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import spectral as sp
from .identities import (intparts_moment_check, leibnitz_q_bound, leibnitz_special_case_residual,
                         master_coefficients_by_solve, master_decompose, taylor_error)
from .numbers import QI, is_zero
from .poly import Polynomial, random_polynomial, random_rational_point
from .quadrature import ball_grid


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_json(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "seconds": round(self.seconds, 3),
                "detail": self.detail}


def _timed(name, fn, *args, **kw) -> Check:
    t0 = time.perf_counter()
    try:
        passed, detail = fn(*args, **kw)
    except (ZeroDivisionError, ArithmeticError, RuntimeError) as exc:
        passed, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
    return Check(name, bool(passed), detail, time.perf_counter() - t0)


# exact layer -------------------------------------------------------------------------------

def check_reproducing(rng, trials: int = 100):
    bad = 0
    for _ in range(trials):
        n = int(rng.integers(1, 4))
        N = int(rng.integers(1, 6))
        f = random_polynomial(rng, n, 10)
        if sp.apply_diagonal(sp.bergman_operator(n, N, N), f) != f:
            bad += 1
    return bad == 0, {"trials": trials, "failures": bad}


def check_bijective(rng, n: int = 2, kmax: int = 30, trials: int = 5):
    bad = []
    for N in range(1, 6):
        for M in range(1, 6):
            P, T = sp.bergman_operator(n, N, M), sp.inverse_operator(n, N, M)
            if not all(P.compose(T).eigenvalue(k) == 1 and T.compose(P).eigenvalue(k) == 1
                       for k in range(kmax + 1)):
                bad.append(("compose", N, M))
                continue
            for _ in range(trials):
                f = random_polynomial(rng, n, 8)
                if T(P(f)) != f or P(T(f)) != f:
                    bad.append(("apply", N, M))
                    break
            l = max(0, -M) + 1 + int(N > M) * (N - M)
            expT = sp.expT_operator(n, N, M, l)
            if not all(expT.eigenvalue(k) == T.eigenvalue(k) for k in range(kmax + 1)):
                bad.append(("expT", N, M))
    return not bad, {"pairs": 25, "kmax": kmax, "failures": bad[:10]}


def check_semigroup(n: int = 2, kmax: int = 30):
    bad = []
    for N in range(1, 6):
        for M in range(1, 6):
            for L in range(1, 6):
                if not sp.all_zero(sp.semigroup_residuals(n, N, M, L, kmax)):
                    bad.append((N, M, L))
    return not bad, {"triples": 125, "kmax": kmax, "failures": bad[:10]}


def check_taylor(rng, trials: int = 50):
    bad = 0
    for _ in range(trials):
        n = int(rng.integers(1, 3))
        f = random_polynomial(rng, n, 5)
        w = random_rational_point(rng, n)
        k = int(rng.integers(0, 4))
        L = int(rng.integers(0, 3))
        l = int(rng.integers(0, 3))
        res = taylor_error(f, w, k, L, l)
        if not res.residual.is_exact() or not res.residual.is_zero():
            bad += 1
    return bad == 0, {"trials": trials, "failures": bad}


def check_leibnitz_special(rng, trials: int = 100):
    bad = 0
    for _ in range(trials):
        n = int(rng.integers(1, 4))
        f, g = random_polynomial(rng, n, 5), random_polynomial(rng, n, 5)
        if not leibnitz_special_case_residual(f, g).is_zero():
            bad += 1
    return bad == 0, {"trials": trials, "failures": bad}


def check_master(rng, trials: int = 100, params=(2, 1, 1, 4, 8)):
    n, N, M, k, J = params
    a = sp.master_expansion_coefficients(n, N, M, J)
    solved = master_coefficients_by_solve(n, N, M, J)
    coeff_ok = list(a) == list(solved)
    spectral_ok = all(
        is_zero(sum((c * sp.bergman_eigenvalue(n, N + J, M + i, m) for i, c in enumerate(a)), Fraction(0))
                - sp.bergman_eigenvalue(n, N, M, m))
        for m in range(31))
    bad = 0
    for _ in range(trials):
        f, g = random_polynomial(rng, n, 4), random_polynomial(rng, n, 4)
        dec = master_decompose(N, M, k, J, f, g)
        if not (dec.reconstruction_residual().is_zero() and dec.extra["consistency"].is_zero()
                and (dec.extra["q_from_pieces"] - dec.residual_Q).is_zero()):
            bad += 1
    return coeff_ok and spectral_ok and bad == 0, {
        "params": list(params), "coefficients_match_solve": coeff_ok, "spectral_identity_m<=30": spectral_ok,
        "trials": trials, "failures": bad}


def check_intparts(rng, trials: int = 10):
    bad = 0
    for _ in range(trials):
        n = 2
        N, M = int(rng.integers(2, 4)), int(rng.integers(1, 4))
        j = int(rng.integers(1, min(3, n + M)))
        alpha = (j, 0) if rng.random() < 0.5 else (0, j)
        ok, _, _ = intparts_moment_check(n, N, M, alpha, random_polynomial(rng, n, 3))
        bad += not ok
    return bad == 0, {"trials": trials, "failures": bad}


def exact_suite(seed: int = 0, scale: float = 1.0) -> list:
    rng = np.random.default_rng(seed)
    t = lambda x: max(1, int(round(x * scale)))
    return [
        _timed("1 reproducing P[N,N] f = f", check_reproducing, rng, t(100)),
        _timed("2 bijectivity T.P = P.T = I and expT route", check_bijective, rng),
        _timed("3 semigroup eigenvalues", check_semigroup),
        _timed("4 Taylor remainder: direct = kernel", check_taylor, rng, t(50)),
        _timed("5 Leibnitz special case", check_leibnitz_special, rng, t(100)),
        _timed("6 master decomposition", check_master, rng, t(100)),
        _timed("integration by parts moments", check_intparts, rng, t(10)),
    ]


# numerical analysis ------------------------------------------------------------------------

def check_q_bound(rng, instances: int = 10, max_depth: int = 12):
    constants, ok = [], True
    for _ in range(instances):
        f = random_polynomial(rng, 2, 3)
        g = random_polynomial(rng, 2, 3)
        rep = leibnitz_q_bound(3, 2, 1, f, g, rng=rng, directions=2, max_depth=max_depth)
        constants.append(rep.constant)
        ok &= rep.ok
    return ok, {"instances": instances, "constant": max(constants), "per_instance": constants}


def check_bergman_quadrature(n: int = 2, order: int = 48, tol: float = 1e-8):
    z = np.array([0.31 + 0.12j, -0.2 + 0.25j])[:n]
    worst = 0.0
    cases = []
    for N, M in [(1, 2), (2, 1), (3, 3), (2, 4)]:
        grid = ball_grid(n, N, order)
        kern = (1 - grid.nodes.conj() @ z) ** (-(n + M))
        for alpha in [(1, 0), (0, 2), (2, 1), (3, 2)]:
            mono = np.prod(grid.nodes ** np.array(alpha), axis=1)
            value = np.sum(grid.weights * mono * kern)
            lam = float(sp.bergman_eigenvalue(n, N, M, sum(alpha)))
            exact = lam * np.prod(z ** np.array(alpha))
            err = abs(value - exact) / abs(exact)
            worst = max(worst, err)
            cases.append({"N": N, "M": M, "alpha": alpha, "eigenvalue": lam, "rel_err": err})
    return worst <= tol, {"max_rel_err": worst, "tol": tol, "cases": cases[:4]}


def check_wolff_single(tol: float = 1e-6):
    from .potentials import AtomicMeasure, wolff_potential, wolff_potential_quadrature
    eta = np.array([1.0, 0.0], dtype=complex)
    zeta = np.array([0.0, 1.0], dtype=complex)          # |1 - <zeta, eta>| = 1
    mu = AtomicMeasure.single(eta)
    closed = float(wolff_potential(mu, 0.5, 2, zeta[None, :])[0])
    quad = wolff_potential_quadrature(mu, 0.5, 2, zeta)
    err = abs(quad - 1.0)
    return abs(closed - 1.0) < 1e-12 and err <= tol, {"closed_form": closed, "quadrature": quad, "rel_err": err}


def check_wolff_comparability(rng, measures: int = 20, samples: int = 200, order: int = 12):
    from .potentials import mollify, pointwise_wolff_ratio, random_measure, random_sphere_points, wolff_comparability
    from .quadrature import cell_sphere_grid
    grid = cell_sphere_grid(2, order)
    # smooth each atom over one cell spacing so the grid resolves it
    radius = grid.meta["spacing"]
    ratios = {"E/N": [], "E/W": [], "N/W": []}
    point_max = []
    for i in range(measures):
        mu = mollify(random_measure(rng, 2, 5), grid, radius)
        rep = wolff_comparability(mu, 0.5, 2, grid)
        for key, val in rep.ratios.items():
            ratios[key].append(val)
        if i < 2:
            pts = random_sphere_points(rng, 2, samples // 2)
            point_max.append(float(np.max(pointwise_wolff_ratio(mu, 0.5, 2, grid, pts))))
    spread = max(max(v) / min(v) for v in ratios.values())
    C = max(max(max(v), 1 / min(v)) for v in ratios.values())
    ok = spread <= 3 and all(np.isfinite(point_max))
    return ok, {"spread": spread, "C": C, "pointwise_W_over_N_max": max(point_max),
                "ranges": {k: [min(v), max(v)] for k, v in ratios.items()}}


def potentials_suite(seed: int = 0, scale: float = 1.0) -> list:
    rng = np.random.default_rng(seed)
    return [
        _timed("7 Q-bound ratios finite and non-increasing", check_q_bound, rng, max(1, int(10 * scale))),
        _timed("8 kernel quadrature matches eigenvalues", check_bergman_quadrature),
        _timed("9 single-atom Wolff closed form", check_wolff_single),
        _timed("10 Wolff comparability", check_wolff_comparability, rng, max(2, int(20 * scale))),
    ]


# capacity and multipliers -----------------------------------------------------------------

def check_capacity(order: int = 16, s: float = 0.5, p: float = 2.0):
    from .capacity import (CapacityProblem, cap_nodes, caps_union, default_grid, singleton_capacity,
                           solve_capacity, three_caps, verify_extremal)
    from .potentials import sphere_riesz_constant
    grid = default_grid(2, order)
    everything = np.arange(len(grid.weights))
    sphere = solve_capacity(CapacityProblem(s, p, everything, grid))
    K = sphere_riesz_constant(2, s)
    sphere_err = abs(sphere.value - K ** -p) / K ** -p
    node = len(grid.weights) // 3
    single = solve_capacity(CapacityProblem(s, p, [node], grid))
    single_err = abs(single.value - singleton_capacity(grid, s, p, node)) / single.value
    E = caps_union(grid, three_caps(), 0.5)
    sol = solve_capacity(CapacityProblem(s, p, E, grid))
    rep = verify_extremal(sol, levels=(0.75,))
    ok = (sphere_err <= 0.02 and single_err <= 0.01 and sol.duality_gap <= 1e-2
          and rep.mass_error <= 0.05 and rep.energy_error <= 0.05 and rep.min_wolff_on_E > 0)
    return ok, {"sphere_rel_err": sphere_err, "singleton_rel_err": single_err, "gap": sol.duality_gap,
                "three_caps": sol.value, "mass_err": rep.mass_error, "energy_err": rep.energy_error,
                "min_W_on_E": rep.min_wolff_on_E, "max_nonlinear": rep.max_nonlinear}


def check_capacity_monotone(rng, pairs: int = 10, order: int = 16, s: float = 0.5, p: float = 2.0,
                            tol: float = 1e-2):
    """Nested pairs must be monotone and disjoint pairs subadditive, up to the solver tolerance."""
    from .capacity import CapacityProblem, cap_nodes, default_grid, solve_capacity
    from .potentials import random_sphere_points
    grid = default_grid(2, order)

    def cap(E):
        return solve_capacity(CapacityProblem(s, p, E, grid)).value

    rows = []
    for i in range(pairs):
        c1, c2 = random_sphere_points(rng, 2, 2)
        r = rng.uniform(0.3, 0.6)
        if i % 2 == 0:
            A, B = cap_nodes(grid, c1, r), cap_nodes(grid, c1, 1.5 * r)
            cA, cB = cap(A), cap(B)
            rows.append({"kind": "nested", "inner": cA, "outer": cB, "ok": cA <= cB * (1 + tol)})
        else:
            A, B = cap_nodes(grid, c1, r), cap_nodes(grid, c2, r)
            cA, cB, cU = cap(A), cap(B), cap(np.union1d(A, B))
            ok = max(cA, cB) <= cU * (1 + tol) and cU <= (cA + cB) * (1 + tol)
            rows.append({"kind": "pair", "A": cA, "B": cB, "union": cU, "ok": ok})
    return all(r["ok"] for r in rows), {"cases": rows}


def check_multiplier(order: int = 12, refine: int = 16):
    from .capacity import caps_union, default_grid, three_caps
    from .multipliers import TentSampler, TestFamily, build_capacitary_multiplier
    grid = default_grid(2, order)
    E = caps_union(grid, three_caps(), 0.5)
    _, cert = build_capacitary_multiplier(E, 0.6, 2.0, 0.9, grid, refine_grid=default_grid(2, refine),
                                          family=TestFamily.default(2), sampler=TentSampler(2))
    return cert.passed, cert.to_json()


def check_corona(order: int = 12):
    from .capacity import default_grid
    from .multipliers import build_capacitary_multiplier, corona_solve, hemisphere_cover
    grid = default_grid(2, order)
    Vs = [build_capacitary_multiplier(E, 0.6, 2.0, 0.9, grid, certify=False)[0] for E in hemisphere_cover(grid)]
    _, rep = corona_solve(Vs)
    return rep.passed, rep.to_json()


def capacity_suite(seed: int = 0, scale: float = 1.0) -> list:
    return [
        _timed("11 capacity solver", check_capacity),
        _timed("11 capacity monotone and subadditive", check_capacity_monotone, np.random.default_rng(seed)),
        _timed("12 capacitary multiplier certificate", check_multiplier),
        _timed("13 corona positivity", check_corona),
    ]


# negative controls ---------------------------------------------------------------------------

def negative_controls(seed: int = 0) -> list:
    """Every exact check must fail under a 1e-6 corruption it can see."""
    out = []
    for kind in ("eigenvalue", "coefficient"):
        t0 = time.perf_counter()
        with sp.corrupted(kind):
            checks = exact_suite(seed, scale=0.2)
        failed = [c.name for c in checks if not c.passed]
        # coefficient corruption only reaches the expansion-based checks
        needed = [c.name for c in checks[:6]] if kind == "eigenvalue" else [checks[1].name, checks[5].name]
        ok = all(name in failed for name in needed)
        out.append(Check(f"14 negative control ({kind})", ok, {"failed": failed, "required": needed},
                         time.perf_counter() - t0))
    return out


SUITES = {
    "exact": exact_suite,
    "potentials": potentials_suite,
    "capacity": capacity_suite,
}


def run_suite(name: str, seed: int = 0, scale: float = 1.0) -> list:
    if name == "full":
        checks = []
        for fn in SUITES.values():
            checks.extend(fn(seed, scale))
        return checks + negative_controls(seed)
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name](seed, scale)
