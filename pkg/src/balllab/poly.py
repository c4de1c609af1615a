"""Holomorphic polynomials on C^n with exact Gaussian-rational coefficients.

A polynomial is a map from multi-indices (tuples of non-negative ints) to
coefficients.  Coefficients are :class:`~balllab.numbers.QI` whenever
possible; operations involving irrational scalars promote the affected
coefficients to high-precision mpmath complex numbers.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

import numpy as np

from .numbers import MP, MP_TOL, QI, add, as_param, is_exact, is_zero, mul, pochhammer, to_mp

MultiIndex = tuple


def degree_of(alpha: MultiIndex) -> int:
    return sum(alpha)


def alpha_factorial(alpha: MultiIndex) -> int:
    return math.prod(math.factorial(a) for a in alpha)


def graded_lex_key(alpha: MultiIndex):
    # total degree first, then larger exponents of earlier variables first
    return (sum(alpha), tuple(-a for a in alpha))


def multi_indices(n: int, degree: int) -> Iterator[MultiIndex]:
    """All multi-indices of length n and total degree ``degree``, graded-lex order."""
    if n == 1:
        yield (degree,)
        return
    for first in range(degree, -1, -1):
        for rest in multi_indices(n - 1, degree - first):
            yield (first,) + rest


def k_s(s) -> int:
    """Derivative order convention k_s = max(floor(s), 0) + 1."""
    return max(math.floor(s), 0) + 1


def _coerce_coefficient(c):
    if isinstance(c, QI):
        return c
    if is_exact(c):
        return QI.coerce(c)
    if isinstance(c, (complex, float)):
        return MP.mpc(c)
    return to_mp(c)


class Polynomial:
    """Immutable polynomial in z_1..z_n."""

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[MultiIndex, object] | None = None):
        if n < 1:
            raise ValueError("dimension must be >= 1")
        self.n = n
        clean = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != n or any(a < 0 for a in alpha):
                raise ValueError(f"bad multi-index {alpha} for n={n}")
            c = _coerce_coefficient(c)
            if not is_zero(c, tol=0):
                clean[alpha] = c
        self._terms = clean

    # constructors -------------------------------------------------------
    @classmethod
    def zero(cls, n: int) -> "Polynomial":
        return cls(n)

    @classmethod
    def constant(cls, n: int, c=1) -> "Polynomial":
        return cls(n, {(0,) * n: c})

    @classmethod
    def monomial(cls, n: int, alpha: Iterable[int], c=1) -> "Polynomial":
        return cls(n, {tuple(alpha): c})

    @classmethod
    def variable(cls, n: int, j: int) -> "Polynomial":
        alpha = [0] * n
        alpha[j] = 1
        return cls(n, {tuple(alpha): 1})

    @classmethod
    def _trusted(cls, n: int, terms: dict) -> "Polynomial":
        obj = object.__new__(cls)
        obj.n = n
        obj._terms = terms
        return obj

    # basic protocol ------------------------------------------------------
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return sorted(self._terms.items(), key=lambda kv: graded_lex_key(kv[0]))

    def coefficient(self, alpha: MultiIndex):
        return self._terms.get(tuple(alpha), QI(0))

    def __len__(self):
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_exact(self) -> bool:
        return all(isinstance(c, QI) for c in self._terms.values())

    @property
    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(a) for a in self._terms), default=-1)

    def _check(self, other: "Polynomial"):
        if self.n != other.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.n, other)
        self._check(other)
        out = dict(self._terms)
        for alpha, c in other._terms.items():
            if alpha in out:
                s = add(out[alpha], c)
                if is_zero(s, tol=0):
                    del out[alpha]
                else:
                    out[alpha] = s
            else:
                out[alpha] = c
        return Polynomial._trusted(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._trusted(self.n, {a: -c for a, c in self._terms.items()})

    def __sub__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(self.n, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "Polynomial":
        if is_zero(c, tol=0):
            return Polynomial(self.n)
        return Polynomial._trusted(self.n, {a: _coerce_coefficient(mul(v, c)) for a, v in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            return multiply(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __pow__(self, k: int):
        out = Polynomial.constant(self.n, 1)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            if self.n != other.n:
                return False
            if self.is_exact() and other.is_exact():
                return self._terms == other._terms
            return (self - other).max_abs() <= MP_TOL
        return NotImplemented

    __hash__ = None

    def max_abs(self):
        """Largest coefficient modulus (exact rational bound when exact)."""
        best = 0
        for c in self._terms.values():
            if isinstance(c, QI):
                v = max(abs(c.re), abs(c.im))
            else:
                v = abs(c)
            if v > best:
                best = v
        return best

    def allclose(self, other: "Polynomial", tol=1e-12) -> bool:
        return float((self - other).max_abs()) <= tol

    # structure -----------------------------------------------------------
    def homogeneous_parts(self) -> list:
        buckets: dict[int, dict] = {}
        for alpha, c in self._terms.items():
            buckets.setdefault(sum(alpha), {})[alpha] = c
        return [(k, Polynomial._trusted(self.n, buckets[k])) for k in sorted(buckets)]

    def homogeneous_part(self, k: int) -> "Polynomial":
        return Polynomial._trusted(self.n, {a: c for a, c in self._terms.items() if sum(a) == k})

    def map_degrees(self, eigenvalue) -> "Polynomial":
        """Scale the degree-k part by ``eigenvalue(k)``."""
        cache = {}
        out = {}
        for alpha, c in self._terms.items():
            k = sum(alpha)
            if k not in cache:
                cache[k] = eigenvalue(k)
            v = mul(c, cache[k])
            if not is_zero(v, tol=0):
                out[alpha] = _coerce_coefficient(v)
        return Polynomial._trusted(self.n, out)

    def radial_derivative(self) -> "Polynomial":
        return self.map_degrees(lambda k: k)

    def partial(self, alpha: MultiIndex) -> "Polynomial":
        alpha = tuple(alpha)
        out = {}
        for beta, c in self._terms.items():
            if all(b >= a for a, b in zip(alpha, beta)):
                factor = math.prod(math.perm(b, a) for a, b in zip(alpha, beta))
                out[tuple(b - a for a, b in zip(alpha, beta))] = mul(c, factor)
        return Polynomial(self.n, out)

    def differential_form(self, j: int) -> "Polynomial":
        """d^j f(R,...,R)(w) = sum_{|a|=j} (j!/a!) w^a d^a f(w)."""
        if j < 0:
            raise ValueError("j must be non-negative")
        if j == 0:
            return self
        total = Polynomial(self.n)
        jf = math.factorial(j)
        for alpha in multi_indices(self.n, j):
            d = self.partial(alpha)
            if d.is_zero():
                continue
            total = total + multiply(Polynomial.monomial(self.n, alpha, Fraction(jf, alpha_factorial(alpha))), d)
        return total

    def shift(self, w) -> "Polynomial":
        """The polynomial z -> f(z + w)."""
        w = [_coerce_coefficient(x) for x in w]
        if len(w) != self.n:
            raise ValueError("shift point has wrong dimension")
        out = Polynomial(self.n)
        for alpha, c in self._terms.items():
            piece = Polynomial.constant(self.n, c)
            for j, a in enumerate(alpha):
                if a:
                    lin = Polynomial.variable(self.n, j) + Polynomial.constant(self.n, w[j])
                    piece = piece * (lin ** a)
            out = out + piece
        return out

    def truncate(self, max_degree: int) -> "Polynomial":
        return Polynomial._trusted(self.n, {a: c for a, c in self._terms.items() if sum(a) <= max_degree})

    # numerics ------------------------------------------------------------
    def evaluate(self, points) -> np.ndarray:
        """Evaluate at complex points of shape (..., n) in double precision."""
        z = np.asarray(points, dtype=complex)
        if z.shape[-1] != self.n:
            raise ValueError("points have wrong trailing dimension")
        out = np.zeros(z.shape[:-1], dtype=complex)
        if not self._terms:
            return out
        top = max(max(a) for a in self._terms)
        powers = [np.ones_like(z)]
        for _ in range(top):
            powers.append(powers[-1] * z)
        # powers[e][..., j] = z_j**e
        for alpha, c in self._terms.items():
            term = np.full(z.shape[:-1], complex(c), dtype=complex)
            for j, a in enumerate(alpha):
                if a:
                    term = term * powers[a][..., j]
            out += term
        return out

    def __call__(self, points):
        return self.evaluate(points)

    def radial_derivatives(self, points, kmax: int) -> list:
        """[R^j f(points) for j = 0..kmax], evaluated numerically."""
        out = [self.evaluate(points)]
        g = self
        for _ in range(kmax):
            g = g.radial_derivative()
            out.append(g.evaluate(points))
        return out

    # serialization -------------------------------------------------------
    def to_json(self) -> dict:
        terms = []
        for alpha, c in self.items():
            if not isinstance(c, QI):
                raise ValueError("only exact polynomials serialize to the canonical format")
            terms.append({"alpha": list(alpha), "re": _frac_text(c.re), "im": _frac_text(c.im)})
        return {"n": self.n, "terms": terms}

    @classmethod
    def from_json(cls, data: dict) -> "Polynomial":
        try:
            n = int(data["n"])
            terms = {}
            for t in data["terms"]:
                alpha = tuple(int(a) for a in t["alpha"])
                c = QI(Fraction(str(t.get("re", "0"))), Fraction(str(t.get("im", "0"))))
                terms[alpha] = terms.get(alpha, QI(0)) + c
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"malformed polynomial JSON: {exc}") from exc
        return cls(n, terms)

    def __repr__(self):
        if not self._terms:
            return f"Polynomial(n={self.n}, 0)"
        parts = []
        for alpha, c in self.items():
            mono = "*".join(f"z{j + 1}" + (f"^{a}" if a > 1 else "") for j, a in enumerate(alpha) if a)
            parts.append(f"({c!r})" + ("*" + mono if mono else ""))
        return f"Polynomial(n={self.n}, " + " + ".join(parts) + ")"


def _frac_text(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


# functional interface ----------------------------------------------------

def multiply(f: Polynomial, g: Polynomial) -> Polynomial:
    f._check(g)
    out: dict = {}
    for a, c in f._terms.items():
        for b, d in g._terms.items():
            key = tuple(x + y for x, y in zip(a, b))
            v = mul(c, d)
            out[key] = add(out[key], v) if key in out else v
    return Polynomial(f.n, out)


def homogeneous_parts(f: Polynomial) -> list:
    return f.homogeneous_parts()


def radial_derivative(f: Polynomial) -> Polynomial:
    return f.radial_derivative()


def partial_derivative(f: Polynomial, alpha: MultiIndex) -> Polynomial:
    return f.partial(alpha)


def differential_form(f: Polynomial, j: int) -> Polynomial:
    return f.differential_form(j)


def monomial_moment_sphere(alpha: MultiIndex) -> Fraction:
    """Integral of |zeta^alpha|^2 against normalized surface measure."""
    n = len(alpha)
    d = sum(alpha)
    return Fraction(math.factorial(n - 1) * alpha_factorial(alpha), math.factorial(n - 1 + d))


def monomial_moment_ball(alpha: MultiIndex, N):
    """Integral of |w^alpha|^2 (1-|w|^2)^(N-1) against normalized volume (no c_N)."""
    N = as_param(N)
    if N <= 0:
        raise ValueError("N must be positive")
    n = len(alpha)
    d = sum(alpha)
    radial_num = n * math.factorial(n + d - 1)
    if isinstance(N, Fraction):
        return Fraction(radial_num) / pochhammer(N, n + d) * monomial_moment_sphere(alpha)
    return MP.mpf(radial_num) / MP.rf(N, n + d) * to_mp(monomial_moment_sphere(alpha))


def random_polynomial(rng: np.random.Generator, n: int, max_degree: int, *, terms: int | None = None,
                      height: int = 9, real: bool = False) -> Polynomial:
    """Random polynomial with small Gaussian-rational coefficients."""
    pool = [a for d in range(max_degree + 1) for a in multi_indices(n, d)]
    count = terms if terms is not None else int(rng.integers(1, min(len(pool), 8) + 1))
    count = min(count, len(pool))
    picks = rng.choice(len(pool), size=count, replace=False)
    out = {}
    for i in picks:
        re = Fraction(int(rng.integers(-height, height + 1)), int(rng.integers(1, height + 1)))
        im = Fraction(0) if real else Fraction(int(rng.integers(-height, height + 1)), int(rng.integers(1, height + 1)))
        if re == 0 and im == 0:
            re = Fraction(1)
        out[pool[i]] = QI(re, im)
    return Polynomial(n, out)


def random_rational_point(rng: np.random.Generator, n: int, radius: Fraction = Fraction(3, 4), denom: int = 8) -> list:
    """Random point with Gaussian-rational coordinates and |w| < radius."""
    while True:
        coords = [QI(Fraction(int(rng.integers(-denom, denom + 1)), denom * 2),
                     Fraction(int(rng.integers(-denom, denom + 1)), denom * 2)) for _ in range(n)]
        if sum(c.abs2() for c in coords) < radius * radius:
            return coords
