"""Exact Taylor, integration-by-parts, Leibnitz and master-formula identities.

Residual functions Q are defined by exact subtraction; the independent
content of each check lies in routes computed by different means (kernel
moment expansions, spectral coefficients, linear solves).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .numbers import QI, as_param, is_exact, to_mp
from .poly import (Polynomial, alpha_factorial, monomial_moment_ball, monomial_moment_sphere,
                   multiply)
from .spectral import (_residual_ok, apply_diagonal, bergman_eigenvalue, bergman_operator, c_N,
                       master_expansion_coefficients, rkt_operator)


# Taylor formula ----------------------------------------------------------------------

def _point(w, n: int) -> list:
    w = [QI.coerce(x) if isinstance(x, (int, Fraction, QI)) else complex(x) for x in w]
    if len(w) != n:
        raise ValueError("point has wrong dimension")
    norm2 = sum(x.abs2() if isinstance(x, QI) else abs(x) ** 2 for x in w)
    if norm2 >= 1:
        raise ValueError("point must lie in the open unit ball")
    return w


def taylor_polynomial(f: Polynomial, w, k: int) -> Polynomial:
    """Degree-k Taylor polynomial of f at w, as a polynomial in z."""
    if k < 0:
        raise ValueError("k must be non-negative")
    w = _point(w, f.n)
    local = f.shift(w).truncate(k)
    return local.shift([-x for x in w])


def _taylor_kernel(n: int, w: list, k: int, L: int, top: int) -> Polynomial:
    """Kernel E^k_L(z, w, u) as a polynomial in (z, conj u), u-degree <= top.

    Expands ((z-w).u)^(k+1) / ((1-z.u)(1-w.u)^(k+1)) as a power series,
    then applies conj(R^{n+L-1}_1) in the conj(u) variables.
    """
    m = 2 * n
    x = Polynomial(m)
    y = Polynomial(m)
    for j in range(n):
        ubar = [0] * m
        ubar[n + j] = 1
        zu = list(ubar)
        zu[j] = 1
        x = x + Polynomial.monomial(m, zu)
        y = y + Polynomial.monomial(m, ubar, w[j])

    def ubar_degree(alpha):
        return sum(alpha[n:])

    def cut(p: Polynomial) -> Polynomial:
        return Polynomial._trusted(m, {a: c for a, c in p.terms.items() if ubar_degree(a) <= top})

    if top < k + 1:
        return Polynomial(m)
    head = (x - y) ** (k + 1)
    span = top - k - 1
    x_pows = [Polynomial.constant(m, 1)]
    y_pows = [Polynomial.constant(m, 1)]
    for _ in range(span):
        x_pows.append(cut(x_pows[-1] * x))
        y_pows.append(cut(y_pows[-1] * y))
    series = Polynomial(m)
    for a in range(span + 1):
        for b in range(span + 1 - a):
            series = series + (x_pows[a] * y_pows[b]).scale(math.comb(b + k, k))
    kernel = cut(head * series)
    op = rkt_operator(n + L - 1, 1)
    out = {}
    for alpha, c in kernel.terms.items():
        lam = op.eigenvalue(ubar_degree(alpha))
        out[alpha] = c * lam if is_exact(c) and is_exact(lam) else to_mp(c) * to_mp(lam)
    return Polynomial(m, out)


@dataclass
class TaylorError:
    direct: Polynomial
    kernel: Polynomial

    @property
    def residual(self) -> Polynomial:
        return self.direct - self.kernel

    @property
    def ok(self) -> bool:
        return _residual_ok(self.residual)


def taylor_error(f: Polynomial, w, k: int, L: int, l: int) -> TaylorError:
    """Taylor remainder by subtraction and by the reproducing-kernel route.

    The kernel route integrates R^l_{n+L} f against E^k_L term by term: the
    moment rule pairs u^beta with conj(u)^gamma only when beta == gamma.
    """
    if L < 0 or l < 0 or k < 0:
        raise ValueError("k, L, l must be non-negative integers")
    n = f.n
    w = _point(w, n)
    direct = f - taylor_polynomial(f, w, k)
    phi = apply_diagonal(rkt_operator(l, n + L), f) if n + L > 0 else f
    kernel = _taylor_kernel(n, w, k, L, max(f.degree, 0))
    weight = L + l
    norm = c_N(n, weight)
    out = {}
    for alpha, c in kernel.terms.items():
        zpart, upart = alpha[:n], alpha[n:]
        coef = phi.coefficient(upart)
        if not coef:
            continue
        moment = monomial_moment_ball(upart, weight) if weight > 0 else monomial_moment_sphere(upart)
        term = c * coef * (norm * moment) if is_exact(c) and is_exact(coef) else to_mp(c) * to_mp(coef) * to_mp(norm * moment)
        out[zpart] = out[zpart] + term if zpart in out else term
    return TaylorError(direct, Polynomial(n, out))


# integration by parts ------------------------------------------------------------------

def cNM_alpha(n: int, N, M, j: int):
    """(N-M)(N-M+1)...(N-M+j-1) / ((n+M-1)(n+M-2)...(n+M-j)); equals 1 for j = 0."""
    N, M = as_param(N), as_param(M)
    if j < 0 or j >= n + M:
        raise ValueError(f"need 0 <= j < n+M = {n + M}, got {j}")
    num = Fraction(1) if isinstance(N, Fraction) and isinstance(M, Fraction) else to_mp(1)
    den = num
    for i in range(j):
        num = num * (N - M + i)
        den = den * (n + M - 1 - i)
    return num / den


def _kernel_coefficient(c, gamma) -> Fraction:
    """Coefficient of z^gamma conj(w)^gamma in (1 - z.conj(w))^(-c)."""
    d = sum(gamma)
    rising = Fraction(1)
    for i in range(d):
        rising *= c + i
    return rising / alpha_factorial(gamma)


def _moment_side(g: Polynomial, shift: dict, c, N) -> Polynomial:
    """int g(w) (sum_beta s_beta z^{a-beta} w^beta) (1-|w|^2)^(N-1) / (1-z.conj w)^c dnu
    for shift = {beta: (s_beta, z-exponent)}."""
    n = g.n
    out = {}
    for beta, (s, zexp) in shift.items():
        for delta, gc in g.terms.items():
            gamma = tuple(a + b for a, b in zip(delta, beta))
            val = gc * (s * _kernel_coefficient(c, gamma) * monomial_moment_ball(gamma, N))
            key = tuple(a + b for a, b in zip(gamma, zexp))
            out[key] = out[key] + val if key in out else val
    return Polynomial(n, out)


def intparts_moment_check(n: int, N, M, alpha, g: Polynomial):
    """Both sides of the c_{N,M,|alpha|} integration-by-parts identity as exact
    polynomials in z; returns (ok, left, right)."""
    N, M = Fraction(N), Fraction(M)
    alpha = tuple(alpha)
    j = sum(alpha)
    if N <= 1 or not 1 <= j < n + M:
        raise ValueError("need N > 1 and 1 <= |alpha| < n+M")
    # (z-w)^alpha = sum_beta prod C(alpha_i, beta_i) z^{alpha-beta} (-w)^beta
    left_shift = {}
    for beta in np.ndindex(*(a + 1 for a in alpha)):
        beta = tuple(int(b) for b in beta)
        s = Fraction(math.prod(math.comb(a, b) for a, b in zip(alpha, beta)) * (-1) ** sum(beta))
        left_shift[beta] = (s, tuple(a - b for a, b in zip(alpha, beta)))
    left = _moment_side(g, left_shift, n + M, N)
    right = _moment_side(g, {alpha: (Fraction(1), (0,) * n)}, n + M - j, N).scale(cNM_alpha(n, N, M, j))
    return (left - right).is_zero(), left, right


# Leibnitz and master decompositions -------------------------------------------------------

@dataclass
class LeibnitzDecomposition:
    main_terms: list            # (coefficient, operator tag, Polynomial)
    residual_Q: Polynomial
    params: tuple
    target: Polynomial          # f * P(g)
    extra: dict = field(default_factory=dict)

    def total(self) -> Polynomial:
        out = self.residual_Q
        for c, _, p in self.main_terms:
            out = out + p.scale(c)
        return out

    def reconstruction_residual(self) -> Polynomial:
        return self.total() - self.target


def _check_leibnitz(n, Nt, Mt, k, t):
    if not Nt > 1:
        raise ValueError("need N~ > 1")
    if not Mt > 1 - n:
        raise ValueError("need M~ > 1-n")
    if not 0 <= k < min(Nt - t, n + Mt - 1):
        raise ValueError(f"need 0 <= k < min(N~-t, n+M~-1) = {min(Nt - t, n + Mt - 1)}")


def leibnitz_terms(n: int, Nt, Mt, k: int, f: Polynomial, g: Polynomial) -> list:
    out = []
    for j in range(k + 1):
        dj = f.differential_form(j)
        if dj.is_zero():
            continue
        coef = cNM_alpha(n, Nt, Mt, j) / math.factorial(j)
        inner = multiply(g, dj)
        out.append((coef, f"P[{Nt},{Mt - j}](g d^{j}f)", apply_diagonal(bergman_operator(n, Nt, Mt - j), inner)))
    return out


def leibnitz_decompose(Nt, Mt, k: int, f: Polynomial, g: Polynomial, t=Fraction(1, 2)) -> LeibnitzDecomposition:
    """f P^{N~,M~} g = sum_j c_{N~,M~,j}/j! P^{N~,M~-j}(g d^j f) + Q~ with Q~ by subtraction."""
    n = f.n
    Nt, Mt, t = as_param(Nt), as_param(Mt), as_param(t)
    _check_leibnitz(n, Nt, Mt, k, t)
    target = multiply(f, apply_diagonal(bergman_operator(n, Nt, Mt), g))
    terms = leibnitz_terms(n, Nt, Mt, k, f, g)
    Q = target
    for c, _, p in terms:
        Q = Q - p.scale(c)
    return LeibnitzDecomposition(terms, Q, (Nt, Mt, k), target)


def leibnitz_special_case_residual(f: Polynomial, g: Polynomial) -> Polynomial:
    """f R^1_{n+2} g - R^1_{n+2}(fg) + g R f / (n+2), which vanishes identically."""
    n = f.n
    op = rkt_operator(1, n + 2)
    return (multiply(f, apply_diagonal(op, g)) - apply_diagonal(op, multiply(f, g))
            + multiply(g, f.radial_derivative()).scale(Fraction(1, n + 2)))


def master_coefficients_by_solve(n: int, N, M, J: int) -> list:
    """Solve sum_i a_i lambda^{N+J,M+i}_m = lambda^{N,M}_m for m = 0..J exactly."""
    N, M = Fraction(N), Fraction(M)
    size = J + 1
    rows = []
    for m in range(size):
        row = [bergman_eigenvalue(n, N + J, M + i, m) for i in range(size)]
        row.append(bergman_eigenvalue(n, N, M, m))
        rows.append([Fraction(x) for x in row])
    for col in range(size):
        pivot = next(r for r in range(col, size) if rows[r][col] != 0)
        rows[col], rows[pivot] = rows[pivot], rows[col]
        inv = 1 / rows[col][col]
        rows[col] = [x * inv for x in rows[col]]
        for r in range(size):
            if r != col and rows[r][col] != 0:
                factor = rows[r][col]
                rows[r] = [x - factor * y for x, y in zip(rows[r], rows[col])]
    return [rows[i][size] for i in range(size)]


def master_spectral_residuals(n: int, N, M, J: int, coeffs: list | None = None, mmax: int = 30) -> list:
    a = master_expansion_coefficients(n, N, M, J) if coeffs is None else coeffs
    out = []
    for m in range(mmax + 1):
        total = sum((c * bergman_eigenvalue(n, N + J, M + i, m) for i, c in enumerate(a)), Fraction(0))
        out.append(total - bergman_eigenvalue(n, N, M, m))
    return out


def master_decompose(N, M, k: int, J: int, f: Polynomial, g: Polynomial, t=Fraction(1, 2)) -> LeibnitzDecomposition:
    """Master formula: f P^{N,M} g as a_i-weighted direct terms for small i,
    Leibnitz main terms for the rest, and a residual Q.

    ``extra['consistency']`` is f (P^{N,M} g - sum_i a_i P^{N+J,M+i} g), which
    only vanishes when the a_i are right; ``extra['q_pieces']`` holds the
    per-i Leibnitz residuals whose a_i-weighted sum equals Q.
    """
    n = f.n
    N, M, t = as_param(N), as_param(M), as_param(t)
    if not k > M + n - 1:
        raise ValueError("need k > M+n-1")
    if not J > k + n + N:
        raise ValueError("need J > k+n+N")
    if not 0 < t < n + N:
        raise ValueError("need 0 < t < n+N")
    a = master_expansion_coefficients(n, N, M, J)
    target = multiply(f, apply_diagonal(bergman_operator(n, N, M), g))
    expansion = Polynomial(n)
    for i, ai in enumerate(a):
        expansion = expansion + apply_diagonal(bergman_operator(n, N + J, M + i), g).scale(ai)
    consistency = multiply(f, apply_diagonal(bergman_operator(n, N, M), g) - expansion)

    terms = []
    pieces = {}
    for i, ai in enumerate(a):
        if i <= k + 1 - n - M:
            direct = multiply(f, apply_diagonal(bergman_operator(n, N + J, M + i), g))
            terms.append((ai, f"f P[{N + J},{M + i}](g)", direct))
        else:
            dec = leibnitz_decompose(N + J, M + i, k, f, g, t)
            for c, tag, p in dec.main_terms:
                terms.append((ai * c, tag, p))
            pieces[i] = dec.residual_Q
    Q = target
    for c, _, p in terms:
        Q = Q - p.scale(c)
    weighted = Polynomial(n)
    for i, piece in pieces.items():
        weighted = weighted + piece.scale(a[i])
    return LeibnitzDecomposition(terms, Q, (N, M, k, J), target,
                                 extra={"coefficients": a, "consistency": consistency, "q_pieces": pieces,
                                        "q_from_pieces": weighted})


# bound check -------------------------------------------------------------------------

def Omega(r, x):
    """1 + x^r for r != 0 and log(2/x) for r == 0, on 0 < x <= 1."""
    x = np.asarray(x, dtype=float)
    if np.any((x <= 0) | (x > 1)):
        raise ValueError("Omega is defined on 0 < x <= 1")
    if r == 0:
        return np.log(2 / x)
    return 1 + x ** float(r)


@dataclass
class BoundReport:
    ratios: np.ndarray            # (directions, depths)
    depths: np.ndarray            # 1 - |z|
    constant: float
    trend_ok: bool
    converged: bool

    @property
    def ok(self) -> bool:
        return bool(np.all(np.isfinite(self.ratios)) and self.trend_ok)


def _ray_directions(n: int, rng: np.random.Generator, directions: int) -> np.ndarray:
    e = rng.standard_normal((directions, n)) + 1j * rng.standard_normal((directions, n))
    e /= np.linalg.norm(e, axis=1, keepdims=True)
    return e


def q_bound_check(Q: Polynomial, f: Polynomial, g_sup_norm: float, *, first_weight: float, first_power: float,
                  L: int, l: int, k: int, m: int, omega_r: float, rng: np.random.Generator,
                  directions: int = 8, max_depth: int = 12, rtol: float = 1e-4,
                  trend_slack: float = 1.5) -> BoundReport:
    """Ratio |(1+R)^m Q(z)| / RHS(z) along rays z = rho e with 1 - rho = 2^-j.

    RHS(z) = ||g|| (I_1(z) + (1-|z|^2)^(k+1-m) Omega_r(1-|z|^2) I_2(z)) with
      I_1 = int |phi| (1-|u|^2)^first_weight / |1-z.u|^first_power
      I_2 = int |phi| (1-|u|^2)^(L+l-1)      / |1-z.u|^(n+L+k+1)
    and phi = R^l_{n+L} f.  "Trend" means the ratio at the deepest point does
    not exceed ``trend_slack`` times its maximum over the shallower half.
    """
    from .norms import one_plus_R_power
    n = f.n
    phi = apply_diagonal(rkt_operator(l, n + L), f)
    depths = 2.0 ** -np.arange(1, max_depth + 1)
    dirs = _ray_directions(n, rng, directions)
    ratios = np.zeros((directions, len(depths)))
    converged = True
    weight_fn = (lambda u: np.abs(phi.evaluate(u)))
    for a, e in enumerate(dirs):
        for b, d in enumerate(depths):
            z = (1 - d) * e
            lhs = abs(one_plus_R_power(Q, z[None, :], m)[0])
            if lhs == 0:
                continue
            i1 = weighted_kernel_integral_cached(weight_fn, n, z, first_weight, first_power, rtol)
            i2 = weighted_kernel_integral_cached(weight_fn, n, z, L + l - 1, n + L + k + 1, rtol)
            converged &= i1.converged and i2.converged
            x = 1 - abs(1 - d) ** 2
            rhs = g_sup_norm * (i1.value + x ** (k + 1 - m) * float(Omega(omega_r, x)) * i2.value)
            ratios[a, b] = lhs / rhs
    shallow = ratios[:, : len(depths) // 2].max()
    deep = ratios[:, -1].max()
    trend_ok = bool(deep <= trend_slack * max(shallow, 1e-300)) or shallow == 0
    return BoundReport(ratios, depths, float(ratios.max()), trend_ok, converged)


def weighted_kernel_integral_cached(weight_fn, n, z, a, b, rtol):
    from .quadrature import weighted_kernel_integral
    return weighted_kernel_integral(weight_fn, n, z, a, b, rtol=rtol, q_max=40)


def leibnitz_q_bound(Nt, Mt, k: int, f: Polynomial, g: Polynomial, *, t=Fraction(1, 2), L: int | None = None,
                     l: int = 0, m: int | None = None, rng=None, **kw) -> BoundReport:
    """Empirical bound check for the Leibnitz residual Q~ with the smallest admissible L and m."""
    from .norms import besov_infty_norm
    dec = leibnitz_decompose(Nt, Mt, k, f, g, t)
    Nt_f, Mt_f, t_f = float(Nt), float(Mt), float(t)
    if L is None:
        L = math.floor(Nt_f - t_f) + 1
    if m is None:
        m = max(math.floor(Nt_f - t_f - Mt_f + k + 1) + 1, 1)
    if not Nt_f - t_f < L:
        raise ValueError("need N~ - t < L")
    if not 0 < Nt_f - t_f - Mt_f + k + 1 < m:
        raise ValueError("need 0 < N~-t-M~+k+1 < m")
    gnorm = besov_infty_norm(g, -t_f, 0)
    rng = np.random.default_rng(0) if rng is None else rng
    return q_bound_check(dec.residual_Q, f, gnorm, first_weight=Nt_f - t_f - k + l - 1,
                         first_power=f.n + Mt_f - k + m, L=L, l=l, k=k, m=m, omega_r=Nt_f - t_f - Mt_f,
                         rng=rng, **kw)


def master_q_bound(N, M, k: int, J: int, f: Polynomial, g: Polynomial, *, t=Fraction(1, 2), L: int | None = None,
                   l: int = 0, m: int | None = None, rng=None, **kw) -> BoundReport:
    """Empirical bound check for the master residual Q with the smallest admissible L and m."""
    from .norms import besov_infty_norm
    dec = master_decompose(N, M, k, J, f, g, t)
    N_f, M_f, t_f = float(N), float(M), float(t)
    if L is None:
        L = math.floor(N_f + J) + 1
    if m is None:
        m = math.floor(N_f - t_f + f.n + J) + 1
    if not (L > N_f + J and m > N_f - t_f + f.n + J):
        raise ValueError("need L > N+J and m > N-t+n+J")
    gnorm = besov_infty_norm(g, -t_f, 0)
    rng = np.random.default_rng(0) if rng is None else rng
    return q_bound_check(dec.residual_Q, f, gnorm, first_weight=N_f - t_f - k + J + l - 1,
                         first_power=f.n + M_f - k + J + m, L=L, l=l, k=k, m=m, omega_r=N_f - t_f - M_f,
                         rng=rng, **kw)
