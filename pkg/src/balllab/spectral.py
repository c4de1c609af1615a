"""Operators that act diagonally on homogeneous expansions.

Every operator here multiplies the degree-k homogeneous part of a
polynomial by a scalar eigenvalue.  With rational parameters the
eigenvalues are exact rationals; float parameters switch to 60-digit
mpmath arithmetic.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .numbers import MP, MP_TOL, as_param, is_exact, is_zero, pochhammer, to_mp
from .poly import Polynomial

# Negative-control hooks.  When set, eigenvalues and expansion coefficients
# are perturbed so that the verification suites can prove they notice.
_CORRUPTION: dict = {}


@contextlib.contextmanager
def corrupted(kind: str = "eigenvalue", eps=Fraction(1, 10**6)):
    """Temporarily perturb eigenvalue tables ("eigenvalue") or expansion
    coefficients ("coefficient") by a relative amount of order ``eps``."""
    if kind not in ("eigenvalue", "coefficient"):
        raise ValueError(f"unknown corruption kind {kind!r}")
    previous = dict(_CORRUPTION)
    _CORRUPTION[kind] = as_param(eps)
    try:
        yield
    finally:
        _CORRUPTION.clear()
        _CORRUPTION.update(previous)


def _perturb_eigenvalue(value, params: tuple, k: int):
    eps = _CORRUPTION.get("eigenvalue")
    if eps is None or k == 0:
        return value
    # a weight in [1, 2) that differs between degrees and parameter sets, so
    # that corrupted tables cannot cancel in products or ratios
    phase = (k + 1) * 0.6180339887 + sum((i + 1) * float(p) * 0.4142135624 for i, p in enumerate(params))
    weight = Fraction(1) + Fraction(round((phase % 1) * 1000), 1000)
    factor = 1 + eps * weight
    if is_exact(value) and is_exact(factor):
        return value * factor
    return to_mp(value) * to_mp(factor)


def _perturb_coefficients(coeffs: list) -> list:
    eps = _CORRUPTION.get("coefficient")
    if eps is None or not coeffs:
        return coeffs
    # perturb every nonzero coefficient; several expansions start with zeros
    out = []
    for i, c in enumerate(coeffs):
        factor = 1 + eps * (i + 1)
        out.append(c * factor if is_exact(c) and is_exact(factor) else to_mp(c) * to_mp(factor))
    return out


@dataclass(frozen=True)
class DiagonalOperator:
    """Operator f = sum f_k  ->  sum eigenvalue(k) f_k."""

    label: str
    params: tuple
    _eigen: Callable[[int], object] = field(repr=False, compare=False)

    def eigenvalue(self, k: int):
        if k < 0:
            raise ValueError("degree must be non-negative")
        value = self._eigen(k)
        if self.params is None:
            # derived operators inherit whatever their factors report
            return value
        return _perturb_eigenvalue(value, _numeric_params(self.params), k)

    def table(self, kmax: int) -> list:
        return [self.eigenvalue(k) for k in range(kmax + 1)]

    def __call__(self, f: Polynomial) -> Polynomial:
        return apply_diagonal(self, f)

    def compose(self, other: "DiagonalOperator") -> "DiagonalOperator":
        """self after other."""
        return DiagonalOperator(f"{self.label}*{other.label}", None, lambda k: _mul(self.eigenvalue(k), other.eigenvalue(k)))

    def inverse(self) -> "DiagonalOperator":
        def eig(k):
            v = self.eigenvalue(k)
            if is_zero(v, tol=0):
                raise ZeroDivisionError(f"{self.label} has a zero eigenvalue at degree {k}")
            return 1 / v if is_exact(v) else 1 / to_mp(v)
        return DiagonalOperator(f"inv({self.label})", None, eig)


def _numeric_params(params):
    out = []
    for p in params:
        try:
            out.append(float(p))
        except (TypeError, ValueError):
            pass
    return tuple(out)


def _mul(a, b):
    if is_exact(a) and is_exact(b):
        return a * b
    return to_mp(a) * to_mp(b)


def _div(a, b):
    if is_exact(a) and is_exact(b):
        return Fraction(a) / Fraction(b)
    return to_mp(a) / to_mp(b)


def apply_diagonal(op: DiagonalOperator, f: Polynomial) -> Polynomial:
    return f.map_degrees(op.eigenvalue)


# normalization and Bergman-type operators --------------------------------

def c_N(n: int, N):
    """Normalizing constant of the probability measure c_N (1-|z|^2)^(N-1) dnu.

    Equals Gamma(n+N)/(n! Gamma(N)) = (N)_n / n!, which is rational for
    rational N.  N = 0 denotes surface measure and returns 1.
    """
    N = as_param(N)
    if N < 0:
        raise ValueError("N must be non-negative")
    if N == 0:
        return Fraction(1)
    return pochhammer(N, n) / math.factorial(n) if isinstance(N, Fraction) else MP.rf(N, n) / math.factorial(n)


def c_N_recursive(n: int, N: int) -> Fraction:
    """c_N from the recursion c_1 = 1, c_{N+1} = (n+N)/N c_N (integer N only)."""
    if N < 1 or int(N) != N:
        raise ValueError("recursion is defined for integer N >= 1")
    c = Fraction(1)
    for j in range(1, int(N)):
        c = c * Fraction(n + j, j)
    return c


def _check_bergman(n: int, N, M):
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if N < 0:
        raise ValueError(f"N must be >= 0, got {N}")
    if M <= -n:
        raise ValueError(f"M must exceed -n = {-n}, got {M}")


def bergman_eigenvalue(n: int, N, M, k: int):
    """Eigenvalue of P^{N,M} on homogeneous polynomials of degree k.

    (n+M)_k / (n+N)_k; for N = 0 this is the surface-measure operator whose
    moments (n-1)! a! / (n-1+|a|)! give the same Pochhammer ratio.
    """
    N, M = as_param(N), as_param(M)
    _check_bergman(n, N, M)
    return _perturb_eigenvalue(_div(pochhammer(n + M, k), pochhammer(n + N, k)), _numeric_params((N, M)), k)


def bergman_operator(n: int, N, M) -> DiagonalOperator:
    N, M = as_param(N), as_param(M)
    _check_bergman(n, N, M)
    return DiagonalOperator(f"P[{N},{M}]", (N, M), lambda k: _div(pochhammer(n + M, k), pochhammer(n + N, k)))


def inverse_operator(n: int, N, M) -> DiagonalOperator:
    """T^{N,M}: reciprocal eigenvalues of P^{N,M}."""
    N, M = as_param(N), as_param(M)
    _check_bergman(n, N, M)
    return DiagonalOperator(f"T[{N},{M}]", (M, N), lambda k: _div(pochhammer(n + N, k), pochhammer(n + M, k)))


def rkt_eigenvalue(k: int, t, m: int):
    """Eigenvalue of R^k_t on degree m: prod_{i<k} (t+i+m)/(t+i)."""
    t = as_param(t)
    if t <= 0:
        raise ValueError("t must be positive")
    return _div(pochhammer(t + m, k), pochhammer(t, k))


def rkt_operator(k: int, t) -> DiagonalOperator:
    t = as_param(t)
    if t <= 0:
        raise ValueError("t must be positive")
    if k < 0:
        raise ValueError("k must be non-negative")
    return DiagonalOperator(f"R^{k}_{t}", (k, t), lambda m: _div(pochhammer(t + m, k), pochhammer(t, k)))


def radial_power(s) -> DiagonalOperator:
    """(1+R)^s."""
    s = as_param(s)

    def eig(k):
        if isinstance(s, Fraction) and s.denominator == 1:
            return Fraction(1 + k) ** int(s)
        return MP.power(1 + k, to_mp(s))
    return DiagonalOperator(f"(1+R)^{s}", (s,), eig)


def radial_operator() -> DiagonalOperator:
    return DiagonalOperator("R", (), lambda k: Fraction(k))


# kernel-shift expansions ---------------------------------------------------

def shift_expansion(l: int, t, a) -> list:
    """Coefficients b_j with R^l_t (1-z.w)^(-a) = sum_j b_j (1-z.w)^(-(a+j)).

    Each factor (1 + R/(t+i)) acts on (1-x)^(-c) as
    (1 - c/(t+i)) (1-x)^(-c) + c/(t+i) (1-x)^(-(c+1)), since
    R (1-x)^(-c) = c ((1-x)^(-(c+1)) - (1-x)^(-c)).
    """
    t, a = as_param(t), as_param(a)
    exact = isinstance(t, Fraction) and isinstance(a, Fraction)
    one = Fraction(1) if exact else MP.mpf(1)
    coeffs = [one]
    for i in range(l):
        nxt = [0 * one] * (len(coeffs) + 1)
        for j, b in enumerate(coeffs):
            c = a + j
            r = c / (t + i) if exact else to_mp(c) / to_mp(t + i)
            nxt[j] = nxt[j] + b * (1 - r)
            nxt[j + 1] = nxt[j + 1] + b * r
        coeffs = nxt
    return coeffs


def expT_coefficients(n: int, N, M, l: int) -> list:
    """a_0..a_l with T^{N,M} = R^l_{n+M} P^{M+l,N} = sum_j a_j P^{M+l,N+j}."""
    N, M = as_param(N), as_param(M)
    _check_bergman(n, N, M)
    if l <= max(0, -M) or int(l) != l:
        raise ValueError(f"l must be an integer > max(0, -M) = {max(0, -M)}")
    return _perturb_coefficients(shift_expansion(int(l), n + M, n + N))


def expT_operator(n: int, N, M, l: int) -> DiagonalOperator:
    """T^{N,M} assembled from the expT coefficients (independent of the reciprocal route)."""
    a = expT_coefficients(n, N, M, l)
    N, M = as_param(N), as_param(M)

    def eig(k):
        total = 0
        for j, aj in enumerate(a):
            term = _mul(aj, bergman_eigenvalue(n, M + l, N + j, k))
            total = total + term if is_exact(total) and is_exact(term) else to_mp(total) + to_mp(term)
        return total
    return DiagonalOperator(f"expT[{N},{M};{l}]", None, eig)


def master_expansion_coefficients(n: int, N, M, J: int) -> list:
    """a_0..a_J with P^{N,M} = sum_i a_i P^{N+J,M+i} (expand R^J_{n+N} on the kernel)."""
    N, M = as_param(N), as_param(M)
    _check_bergman(n, N, M)
    return _perturb_coefficients(shift_expansion(int(J), n + N, n + M))


# identity checks ------------------------------------------------------------

def _residual_ok(residual: Polynomial) -> bool:
    if residual.is_exact():
        return residual.is_zero()
    return residual.max_abs() <= MP_TOL


def intpartsP_check(n: int, N, M, k: int, m: int, f: Polynomial):
    """P^{N,M} f == R^m_{n+N+k} P^{N+k+m,M} R^k_{n+N} f; returns (ok, residual)."""
    N, M = as_param(N), as_param(M)
    left = apply_diagonal(bergman_operator(n, N, M), f)
    inner = apply_diagonal(rkt_operator(k, n + N), f)
    mid = apply_diagonal(bergman_operator(n, N + k + m, M), inner)
    right = apply_diagonal(rkt_operator(m, n + N + k), mid)
    residual = left - right
    return _residual_ok(residual), residual


def rkvpn_coefficients(n: int, N, M, m: int) -> list:
    """a_1..a_{m+1} with h = sum_{j<=m} a_j P^{N+j,N}(R^1_M h) + a_{m+1} P^{N+m,N}(h).

    Built by repeatedly splitting P^{N+j,N}(h) into
    M/(n+N+j) P^{N+j+1,N}(R^1_M h) + (n+N+j-M)/(n+N+j) P^{N+j+1,N}(h).
    """
    N, M = as_param(N), as_param(M)
    if N <= 0 or M <= 0 or m < 1:
        raise ValueError("need N > 0, M > 0, m >= 1")
    coeffs = []
    carry = Fraction(1) if isinstance(N, Fraction) and isinstance(M, Fraction) else MP.mpf(1)
    for j in range(m):
        coeffs.append(carry * M / (n + N + j))
        carry = carry * (n + N + j - M) / (n + N + j)
    coeffs.append(carry)
    return _perturb_coefficients(coeffs)


def rkvpn_check(n: int, N, M, m: int, h: Polynomial):
    N, M = as_param(N), as_param(M)
    a = rkvpn_coefficients(n, N, M, m)
    rh = apply_diagonal(rkt_operator(1, M), h)
    total = Polynomial(h.n)
    for j in range(1, m + 1):
        total = total + apply_diagonal(bergman_operator(n, N + j, N), rh).scale(a[j - 1])
    total = total + apply_diagonal(bergman_operator(n, N + m, N), h).scale(a[m])
    residual = h - total
    return _residual_ok(residual), residual


def semigroup_residuals(n: int, N, M, L, kmax: int = 30) -> list:
    """lambda^{N,M}_k lambda^{M,L}_k - lambda^{N,L}_k for k = 0..kmax."""
    P_NM, P_ML, P_NL = bergman_operator(n, N, M), bergman_operator(n, M, L), bergman_operator(n, N, L)
    out = []
    for k in range(kmax + 1):
        a = _mul(P_NM.eigenvalue(k), P_ML.eigenvalue(k))
        b = P_NL.eigenvalue(k)
        out.append(a - b if is_exact(a) and is_exact(b) else to_mp(a) - to_mp(b))
    return out


def expansion_residuals(n: int, N, M, coeffs: list, base, shifted, kmax: int = 30) -> list:
    """sum_j coeffs[j] lambda^{shifted(j)}_k - lambda^{base}_k for k <= kmax.

    ``base`` is an (N, M) pair and ``shifted(j)`` returns the pair of the j-th
    term, so the same helper verifies the expT and master expansions.
    """
    out = []
    for k in range(kmax + 1):
        total = 0
        for j, c in enumerate(coeffs):
            term = _mul(c, bergman_eigenvalue(n, *shifted(j), k))
            total = total + term if is_exact(total) and is_exact(term) else to_mp(total) + to_mp(term)
        target = bergman_operator(n, *base).eigenvalue(k)
        out.append(total - target if is_exact(total) and is_exact(target) else to_mp(total) - to_mp(target))
    return out


def kernel_shift_residuals(n: int, M, k: int, mmax: int = 20) -> list:
    """Coefficient form of R^k_{n+M} (1-zw)^{-(n+M)} = (1-zw)^{-(n+M+k)}.

    The degree-m coefficient of (1-x)^{-c} is (c)_m/m!, so the identity reads
    (n+M)_m/m! * eig(R^k_{n+M}, m) = (n+M+k)_m/m!.
    """
    M = as_param(M)
    op = rkt_operator(k, n + M)
    out = []
    for m in range(mmax + 1):
        left = _mul(_div(pochhammer(n + M, m), math.factorial(m)), op.eigenvalue(m))
        right = _div(pochhammer(n + M + k, m), math.factorial(m))
        out.append(left - right if is_exact(left) and is_exact(right) else to_mp(left) - to_mp(right))
    return out


def all_zero(values) -> bool:
    return all(is_zero(v) for v in values)
