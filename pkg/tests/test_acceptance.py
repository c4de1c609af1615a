"""Acceptance criteria 1-14, one test each, printing a PASS/FAIL line per criterion.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary lines are
printed even when output capture is on.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from balllab import identities as idt
from balllab import spectral as sp
from balllab.poly import random_polynomial, random_rational_point

SEED = 20240601


def report(capsys, number: int, passed: bool, detail: str):
    with capsys.disabled():
        print(f"\n[criterion {number:2d}] {'PASS' if passed else 'FAIL'}  {detail}")
    assert passed, detail


def test_01_reproducing_identity(capsys):
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(100):
        n, N = int(rng.integers(1, 4)), int(rng.integers(1, 6))
        f = random_polynomial(rng, n, 10)
        bad += sp.bergman_operator(n, N, N)(f) != f
    elapsed = time.perf_counter() - t0
    report(capsys, 1, bad == 0 and elapsed < 10, f"100 polynomials, {bad} mismatches, {elapsed:.2f}s (< 10s)")


def test_02_bijectivity(capsys):
    rng = np.random.default_rng(SEED)
    bad = []
    for N in range(1, 6):
        for M in range(1, 6):
            P, T = sp.bergman_operator(2, N, M), sp.inverse_operator(2, N, M)
            f = random_polynomial(rng, 2, 8)
            if T(P(f)) != f or P(T(f)) != f:
                bad.append(("compose", N, M))
            l = 1 + max(N - M, 0)
            expT = sp.expT_operator(2, N, M, l)
            if any(expT.eigenvalue(k) != Fraction(1) / P.eigenvalue(k) for k in range(31)):
                bad.append(("expT", N, M))
    report(capsys, 2, not bad, f"25 (N, M) pairs, exact; expT route k <= 30; failures {bad}")


def test_03_semigroup(capsys):
    bad = [(N, M, L) for N in range(1, 6) for M in range(1, 6) for L in range(1, 6)
           if any(sp.bergman_eigenvalue(2, N, M, k) * sp.bergman_eigenvalue(2, M, L, k)
                  != sp.bergman_eigenvalue(2, N, L, k) for k in range(31))]
    report(capsys, 3, not bad, f"125 triples, k <= 30, exact; failures {bad[:5]}")


def test_04_taylor_error(capsys):
    rng = np.random.default_rng(SEED)
    bad = 0
    for _ in range(50):
        n = int(rng.integers(1, 3))
        f = random_polynomial(rng, n, 5)
        res = idt.taylor_error(f, random_rational_point(rng, n), int(rng.integers(0, 4)),
                               int(rng.integers(0, 3)), int(rng.integers(0, 3)))
        bad += not (res.residual.is_exact() and res.residual.is_zero())
    report(capsys, 4, bad == 0, f"50 instances, {bad} nonzero residuals")


def test_05_leibnitz_special_case(capsys):
    rng = np.random.default_rng(SEED)
    bad = 0
    for _ in range(100):
        n = int(rng.integers(1, 4))
        bad += not idt.leibnitz_special_case_residual(random_polynomial(rng, n, 5),
                                                      random_polynomial(rng, n, 5)).is_zero()
    report(capsys, 5, bad == 0, f"100 pairs, {bad} nonzero residuals")


def test_06_master_decomposition(capsys):
    n, N, M, k, J = 2, 1, 1, 4, 8
    rng = np.random.default_rng(SEED)
    a = sp.master_expansion_coefficients(n, N, M, J)
    independent = idt.master_coefficients_by_solve(n, N, M, J)
    spectral_ok = all(sum(c * sp.bergman_eigenvalue(n, N + J, M + i, m) for i, c in enumerate(a))
                      == sp.bergman_eigenvalue(n, N, M, m) for m in range(31))
    bad = 0
    for _ in range(100):
        dec = idt.master_decompose(N, M, k, J, random_polynomial(rng, n, 4), random_polynomial(rng, n, 4))
        bad += not dec.reconstruction_residual().is_zero()
    ok = list(a) == list(independent) and spectral_ok and bad == 0
    report(capsys, 6, ok, f"a_i match independent solve: {list(a) == list(independent)}; "
                          f"spectral identity m <= 30: {spectral_ok}; {bad}/100 reconstruction failures")


def test_07_q_bound(capsys):
    rng = np.random.default_rng(SEED)
    constants, finite, trend = [], True, True
    for _ in range(10):
        f, g = random_polynomial(rng, 2, 3), random_polynomial(rng, 2, 3)
        rep = idt.leibnitz_q_bound(3, 2, 1, f, g, rng=rng, directions=2, max_depth=12)
        assert rep.depths[-1] == 2.0 ** -12
        finite &= bool(np.all(np.isfinite(rep.ratios)))
        trend &= rep.trend_ok
        constants.append(rep.constant)
    report(capsys, 7, finite and trend, f"10 instances to 1-|z| = 2^-12, finite={finite}, "
                                        f"non-increasing trend={trend}, constant={max(constants):.4g}")


def test_08_quadrature_matches_eigenvalues(capsys):
    from balllab.suites import check_bergman_quadrature
    assert sp.bergman_eigenvalue(2, 1, 2, 1) == Fraction(4, 3)
    _, detail = check_bergman_quadrature(n=2, order=48, tol=1e-8)
    report(capsys, 8, detail["max_rel_err"] <= 1e-8, f"max relative error {detail['max_rel_err']:.2e} (<= 1e-8)")


def test_09_single_atom_wolff(capsys):
    from balllab.potentials import AtomicMeasure, wolff_potential_quadrature
    mu = AtomicMeasure.single(np.array([1.0, 0.0], dtype=complex))
    W = wolff_potential_quadrature(mu, 0.5, 2, np.array([0.0, 1.0], dtype=complex))
    report(capsys, 9, abs(W - 1) <= 1e-6, f"W = {W:.12f}, relative error {abs(W - 1):.1e} (<= 1e-6)")


def test_10_wolff_comparability(capsys):
    from balllab.potentials import (mollify, pointwise_wolff_ratio, random_measure, random_sphere_points,
                                    wolff_comparability)
    from balllab.quadrature import cell_sphere_grid
    rng = np.random.default_rng(SEED)
    grid = cell_sphere_grid(2, 12)
    ratios = {"E/N": [], "E/W": [], "N/W": []}
    measures = []
    for _ in range(20):
        mu = mollify(random_measure(rng, 2, 5), grid, grid.meta["spacing"])
        measures.append(mu)
        for key, val in wolff_comparability(mu, 0.5, 2, grid).ratios.items():
            ratios[key].append(val)
    spread = max(max(v) / min(v) for v in ratios.values())
    C = max(max(max(v), 1 / min(v)) for v in ratios.values())
    # 200 pointwise samples, 10 per measure
    pointwise = max(float(np.max(pointwise_wolff_ratio(mu, 0.5, 2, grid, random_sphere_points(rng, 2, 10))))
                    for mu in measures)
    ok = spread <= 3 and pointwise <= C
    report(capsys, 10, ok, f"spread {spread:.3f} (<= 3), C = {C:.3f}, max pointwise W/N = {pointwise:.3f} (<= C)")


def test_11_capacity_solver(capsys):
    from balllab.suites import check_capacity, check_capacity_monotone
    t0 = time.perf_counter()
    _, d = check_capacity(order=16)
    elapsed = time.perf_counter() - t0
    mono_ok, mono = check_capacity_monotone(np.random.default_rng(SEED), pairs=10, order=16)
    ok = (d["sphere_rel_err"] <= 0.02 and d["singleton_rel_err"] <= 0.01 and d["gap"] <= 1e-2
          and d["mass_err"] <= 0.05 and d["energy_err"] <= 0.05 and d["min_W_on_E"] > 0
          and mono_ok and elapsed < 120)
    report(capsys, 11, ok, f"sphere {d['sphere_rel_err']:.1e} (<= 2%), singleton {d['singleton_rel_err']:.1e} "
                           f"(<= 1%), gap {d['gap']:.1e}, mass {d['mass_err']:.1e}, energy {d['energy_err']:.1e} "
                           f"(<= 5%), monotone/subadditive on 10 sets: {mono_ok}, {elapsed:.0f}s (< 120s)")


def test_12_capacitary_multiplier(capsys):
    from balllab.capacity import caps_union, default_grid, three_caps
    from balllab.multipliers import TentSampler, TestFamily, build_capacitary_multiplier
    grid = default_grid(2, 12)
    E = caps_union(grid, three_caps(), 0.5)
    _, cert = build_capacitary_multiplier(E, 0.6, 2.0, 0.9, grid, refine_grid=default_grid(2, 16),
                                          family=TestFamily.default(2), sampler=TentSampler(2))
    change = abs(cert.radial_sup_refined / cert.radial_sup - 1)
    ok = (np.isfinite(cert.radial_sup) and change <= 0.10 and cert.carleson.finite and cert.multiplier.finite)
    report(capsys, 12, ok, f"radial sup {cert.radial_sup:.3f} -> {cert.radial_sup_refined:.3f} under refinement "
                           f"({change:.1%} <= 10%), Carleson {cert.carleson.sup:.3f}, "
                           f"multiplier {cert.multiplier.sup:.3f} (finite)")


def test_13_corona(capsys):
    from balllab.capacity import default_grid
    from balllab.multipliers import build_capacitary_multiplier, corona_solve, hemisphere_cover
    grid = default_grid(2, 12)
    cover = hemisphere_cover(grid)
    assert len(np.union1d(*cover)) == len(grid.weights)
    Vs = [build_capacitary_multiplier(E, 0.6, 2.0, 0.9, grid, certify=False)[0] for E in cover]
    _, rep = corona_solve(Vs)
    ok = rep.margin > 0 and np.isfinite(rep.sup_inverse)
    report(capsys, 13, ok, f"min Re sum V_i = {rep.margin:.3f} (> 0), sup |1/sum V_i| = {rep.sup_inverse:.3f}")


@pytest.mark.parametrize("kind", ["eigenvalue", "coefficient"])
def test_14_negative_controls(kind, capsys):
    from balllab.cli import run
    from balllab.suites import exact_suite
    with sp.corrupted(kind):
        checks = exact_suite(SEED, scale=0.2)
    failed = {c.name.split()[0] for c in checks if not c.passed}
    # coefficient corruption can only reach the checks built on expansion coefficients
    required = {"1", "2", "3", "4", "5", "6"} if kind == "eigenvalue" else {"2", "6"}
    code = run(["--corrupt", kind, "suite", "exact", "--scale", "0.2", "--out", "/dev/null"])
    ok = required <= failed and code == 1
    report(capsys, 14, ok, f"{kind} corruption 1e-6: failed checks {sorted(failed)}, required {sorted(required)}, "
                           f"exit code {code}")
