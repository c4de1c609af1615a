"""Command-line entry point.

Exit codes: 0 success / PASS, 1 verification FAIL, 2 invalid input.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from fractions import Fraction


def _limit_threads():
    # must run before numpy loads its BLAS
    threads = os.environ.get("BALLLAB_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)


_limit_threads()

import numpy as np  # noqa: E402


class InputError(Exception):
    """Bad files or parameters; mapped to exit code 2."""


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (Fraction, complex)):
        return str(o)
    if isinstance(o, tuple):
        return list(o)
    return str(o)


def _emit(report: dict, out: str | None):
    text = json.dumps(report, indent=2, sort_keys=True, default=_default)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _checks_report(checks) -> tuple[dict, bool]:
    passed = all(c.passed for c in checks)
    return {"passed": passed, "checks": [c.to_json() for c in checks]}, passed


# commands ----------------------------------------------------------------------------------------

def cmd_ops_verify(args) -> int:
    from . import suites
    rng = np.random.default_rng(args.seed)
    table = {
        "reproducing": lambda: suites.check_reproducing(rng, args.trials),
        "bijective": lambda: suites.check_bijective(rng),
        "semigroup": lambda: suites.check_semigroup(),
    }
    names = list(table) if args.identity == "all" else [args.identity]
    checks = [suites._timed(name, table[name]) for name in names]
    report, ok = _checks_report(checks)
    _emit(report, args.out)
    return 0 if ok else 1


def cmd_identities(args) -> int:
    from . import suites
    rng = np.random.default_rng(args.seed)
    table = {
        "taylor": lambda: suites.check_taylor(rng, args.trials),
        "leibnitz": lambda: suites.check_leibnitz_special(rng, args.trials),
        "master": lambda: suites.check_master(rng, args.trials),
        "intparts": lambda: suites.check_intparts(rng, args.trials),
        "qbound": lambda: suites.check_q_bound(rng, args.trials),
    }
    checks = [suites._timed(args.which, table[args.which])]
    report, ok = _checks_report(checks)
    _emit(report, args.out)
    return 0 if ok else 1


def cmd_quad(args) -> int:
    from . import suites
    checks = [suites._timed("kernel quadrature", suites.check_bergman_quadrature, order=args.order)]
    report, ok = _checks_report(checks)
    _emit(report, args.out)
    return 0 if ok else 1


def _load_measure(path: str, n: int | None):
    from .potentials import AtomicMeasure
    try:
        return AtomicMeasure.from_json(_load_json(path), n)
    except ValueError as exc:
        raise InputError(f"malformed measure: {exc}") from exc


def _points_arg(text: str | None, n: int, rng) -> np.ndarray:
    from .potentials import random_sphere_points
    if text is None:
        return random_sphere_points(rng, n, 8)
    data = _load_json(text)
    try:
        arr = np.asarray(data, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 * n:
            raise ValueError
    except (TypeError, ValueError) as exc:
        raise InputError("points must be a list of [re, im, ...] rows of length 2n") from exc
    return arr[:, 0::2] + 1j * arr[:, 1::2]


def cmd_potentials(args) -> int:
    from . import potentials as pt
    from .quadrature import cell_sphere_grid
    _check_sp(args.s, args.p, args.n)
    rng = np.random.default_rng(args.seed)
    mu = _load_measure(args.measure, args.n)
    n = mu.n
    pts = _points_arg(args.points, n, rng)
    if args.what == "wolff":
        vals = pt.wolff_potential(mu, args.s, args.p, pts)
        report = {"points": pts, "wolff": vals}
    elif args.what == "riesz":
        report = {"points": pts, "riesz": pt.riesz_potential(mu, args.s, pts)}
    else:
        grid = cell_sphere_grid(n, args.order)
        mu = pt.mollify(mu, grid, args.radius)
        rep = pt.wolff_comparability(mu, args.s, args.p, grid)
        report = {"energy": rep.energy, "nonlinear": rep.nonlinear, "wolff": rep.wolff, "ratios": rep.ratios}
    _emit(report, args.out)
    return 0


def _check_sp(s, p, n):
    if n is not None and n < 1:
        raise InputError("n must be >= 1")
    if p is not None and p <= 1:
        raise InputError("need p > 1")
    if s is not None and s <= 0:
        raise InputError("need s > 0")


def _params_file(path: str | None, args):
    if path is None:
        return
    data = _load_json(path)
    if not isinstance(data, dict):
        raise InputError("params file must hold an object")
    for key in ("s", "p", "lam", "n"):
        if key in data:
            try:
                setattr(args, key, float(data[key]) if key != "n" else int(data[key]))
            except (TypeError, ValueError) as exc:
                raise InputError(f"bad value for {key}") from exc


def cmd_capacity_solve(args) -> int:
    from .capacity import CapacityProblem, default_grid, load_set, solve_capacity, verify_extremal
    _params_file(args.params, args)
    _check_sp(args.s, args.p, args.n)
    grid = default_grid(args.n, args.order)
    try:
        E = load_set(_load_json(args.set), grid)
        problem = CapacityProblem(args.s, args.p, E, grid, tol=args.tol, seed=args.seed)
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(str(exc)) from exc
    sol = solve_capacity(problem)
    report = sol.to_json()
    if args.verify:
        report["extremal"] = verify_extremal(sol).to_json()
    _emit(report, args.out)
    return 0 if sol.converged else 1


def cmd_capacity_verify(args) -> int:
    from .capacity import CapacityProblem, CapacitySolution, default_grid, verify_extremal
    data = _load_json(args.solution)
    try:
        prm = data["params"]
        grid = default_grid(int(prm["n"]), int(prm["order"]))
        problem = CapacityProblem(float(prm["s"]), float(prm["p"]), data["E"], grid, level=float(prm["level"]))
        nu = np.asarray(data["nu"], dtype=float)
        f = np.asarray(data["f_star"], dtype=float)
        if nu.shape != problem.E.shape or f.shape != grid.weights.shape:
            raise ValueError("solution arrays do not match the grid")
        sol = CapacitySolution(problem, float(data["value"]), f, nu, float(data["dual_value"]),
                               float(data["primal_value"]), float(data["duality_gap"]),
                               int(data["iterations"]), bool(data["converged"]), 0.0)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed solution: {exc}") from exc
    rep = verify_extremal(sol)
    ok = rep.mass_error <= 0.05 and rep.energy_error <= 0.05 and rep.min_wolff_on_E > 0
    _emit({"passed": ok, **rep.to_json()}, args.out)
    return 0 if ok else 1


def _load_g(path: str, n: int, args):
    """A polynomial {"n", "terms"} or a capacitary description {"potential": "V"|"U"|"C", "set": ..., ...}."""
    from .poly import Polynomial
    data = _load_json(path)
    if not isinstance(data, dict):
        raise InputError("g must be a JSON object")
    if "terms" in data:
        try:
            return Polynomial.from_json(data)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
    if "potential" in data:
        from .capacity import CapacityProblem, default_grid, load_set, solve_capacity
        from .multipliers import capacitary_potential
        grid = default_grid(n, int(data.get("order", 12)))
        try:
            E = load_set(data["set"], grid)
            sol = solve_capacity(CapacityProblem(args.s, args.p, E, grid))
            return capacitary_potential(sol, data.get("lam", args.lam), data["potential"])
        except (KeyError, ValueError) as exc:
            raise InputError(str(exc)) from exc
    raise InputError("g needs 'terms' (polynomial) or 'potential' (capacitary spec)")


def cmd_multiplier_certify(args) -> int:
    from .multipliers import TestFamily, carleson_ratio, multiplier_ratio
    _check_sp(args.s, args.p, args.n)
    g = _load_g(args.g, args.n, args)
    try:
        family = TestFamily.from_spec(args.family, g.n)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    mult = multiplier_ratio(g, family, args.space, args.p, args.s, args.q)
    report = {"multiplier": mult.to_json()}
    if args.carleson:
        report["carleson"] = carleson_ratio(g, args.p, args.q, args.s, family).to_json()
    ok = mult.finite and all(r.get("passed", True) for r in report.values())
    report["passed"] = ok
    _emit(report, args.out)
    return 0 if ok else 1


def cmd_multiplier_corona(args) -> int:
    from .capacity import default_grid, load_set
    from .multipliers import build_capacitary_multiplier, corona_solve
    data = _load_json(args.covers)
    if not isinstance(data, dict) or not isinstance(data.get("covers"), list):
        raise InputError("covers file needs a 'covers' list of set descriptions")
    grid = default_grid(args.n, args.order)
    try:
        sets = [load_set(c, grid) for c in data["covers"]]
    except (ValueError, KeyError) as exc:
        raise InputError(str(exc)) from exc
    Vs = [build_capacitary_multiplier(E, args.s, args.p, args.lam, grid, certify=False)[0]
          for E in sets if len(E)]
    _, rep = corona_solve(Vs, n=args.n)
    _emit(rep.to_json(), args.out)
    return 0 if rep.passed else 1


def cmd_multiplier_exceptional(args) -> int:
    from .capacity import default_grid, load_set
    from .multipliers import exceptional_sequence
    grid = default_grid(args.n, args.order)
    try:
        K = load_set(_load_json(args.K), grid)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    _, rep = exceptional_sequence(K, args.s, args.p, args.lam, grid, args.levels)
    _emit(rep.to_json(), args.out)
    return 0 if rep.passed else 1


def cmd_suite(args) -> int:
    from .suites import SUITES, run_suite
    if args.name not in (*SUITES, "full"):
        raise InputError(f"unknown suite {args.name!r}; choose from {sorted((*SUITES, 'full'))}")
    checks = run_suite(args.name, args.seed, args.scale)
    report, ok = _checks_report(checks)
    report["suite"] = args.name
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}", file=sys.stderr)
    _emit(report, args.out)
    return 0 if ok else 1


# parser ------------------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    def global_flags(suppress: bool) -> argparse.ArgumentParser:
        # subcommands repeat the flags with suppressed defaults so they don't clobber earlier values
        flags = argparse.ArgumentParser(add_help=False)
        dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        flags.add_argument("--seed", type=int, default=dflt(0))
        flags.add_argument("--out", default=dflt(None), help="write the JSON report here instead of stdout")
        flags.add_argument("--corrupt", choices=["eigenvalue", "coefficient"], default=dflt(None),
                           help="negative control: perturb eigenvalue tables or expansion coefficients by 1e-6")
        return flags

    common = global_flags(True)
    ap = argparse.ArgumentParser(prog="balllab", description=__doc__, parents=[global_flags(False)])
    sub = ap.add_subparsers(dest="command", required=True)

    ops = sub.add_parser("ops", parents=[common]).add_subparsers(dest="action", required=True)
    v = ops.add_parser("verify", parents=[common], help="exact spectral identities")
    v.add_argument("--identity", choices=["reproducing", "bijective", "semigroup", "all"], default="all")
    v.add_argument("--trials", type=int, default=100)
    v.set_defaults(func=cmd_ops_verify)

    idp = sub.add_parser("identities", parents=[common], help="Taylor / Leibnitz / master identities")
    idp.add_argument("which", choices=["taylor", "leibnitz", "master", "intparts", "qbound"])
    idp.add_argument("--trials", type=int, default=20)
    idp.set_defaults(func=cmd_identities)

    q = sub.add_parser("quad", parents=[common], help="kernel quadrature against eigenvalues")
    q.add_argument("--order", type=int, default=48)
    q.set_defaults(func=cmd_quad)

    pot = sub.add_parser("potentials", parents=[common], help="Riesz / Wolff potentials of a measure")
    pot.add_argument("what", choices=["wolff", "riesz", "comparability"])
    pot.add_argument("--measure", required=True)
    pot.add_argument("--points", help="JSON list of sample points")
    pot.add_argument("--s", type=float, default=0.5)
    pot.add_argument("--p", type=float, default=2.0)
    pot.add_argument("--n", type=int, default=None)
    pot.add_argument("--order", type=int, default=12)
    pot.add_argument("--radius", type=float, default=0.2)
    pot.set_defaults(func=cmd_potentials)

    cap = sub.add_parser("capacity", parents=[common]).add_subparsers(dest="action", required=True)
    cs = cap.add_parser("solve", parents=[common])
    cs.add_argument("--set", required=True, help="set description JSON")
    cs.add_argument("--params", help="JSON with s, p (and n)")
    cs.add_argument("--s", type=float, default=0.5)
    cs.add_argument("--p", type=float, default=2.0)
    cs.add_argument("--n", type=int, default=2)
    cs.add_argument("--order", type=int, default=16)
    cs.add_argument("--tol", type=float, default=1e-2)
    cs.add_argument("--verify", action="store_true")
    cs.set_defaults(func=cmd_capacity_solve)
    cv = cap.add_parser("verify", parents=[common])
    cv.add_argument("--solution", required=True)
    cv.set_defaults(func=cmd_capacity_verify)

    mp = sub.add_parser("multiplier", parents=[common]).add_subparsers(dest="action", required=True)
    mc = mp.add_parser("certify", parents=[common])
    mc.add_argument("--g", required=True, help="polynomial JSON or capacitary potential JSON")
    mc.add_argument("--space", choices=["Hps", "Bps", "Fpq"], default="Hps")
    mc.add_argument("--p", type=float, default=2.0)
    mc.add_argument("--s", type=float, default=0.5)
    mc.add_argument("--q", type=float, default=2.0)
    mc.add_argument("--lam", type=float, default=0.9)
    mc.add_argument("--n", type=int, default=2)
    mc.add_argument("--family", default="0:64")
    mc.add_argument("--carleson", action="store_true")
    mc.set_defaults(func=cmd_multiplier_certify)
    for name, fn, extra in (("corona", cmd_multiplier_corona, "--covers"),
                            ("exceptional", cmd_multiplier_exceptional, "--K")):
        m = mp.add_parser(name, parents=[common])
        m.add_argument(extra, required=True)
        m.add_argument("--s", type=float, default=0.6)
        m.add_argument("--p", type=float, default=2.0)
        m.add_argument("--lam", type=float, default=0.9)
        m.add_argument("--n", type=int, default=2)
        m.add_argument("--order", type=int, default=12)
        if name == "exceptional":
            m.add_argument("--levels", type=int, default=4)
        m.set_defaults(func=fn)

    st = sub.add_parser("suite", parents=[common], help="run an acceptance suite")
    st.add_argument("name", help="exact, potentials, capacity or full")
    st.add_argument("--scale", type=float, default=1.0, help="multiply trial counts")
    st.set_defaults(func=cmd_suite)
    return ap


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    from .spectral import corrupted
    guard = corrupted(args.corrupt) if args.corrupt else contextlib.nullcontext()
    try:
        with guard:
            return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
