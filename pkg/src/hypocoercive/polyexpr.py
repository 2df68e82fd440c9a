"""Sparse multivariate polynomials with exact rational coefficients.

A :class:`Polynomial` maps exponent tuples to coefficients.  Exact
coefficients are stored as ``gmpy2.mpq`` (arbitrary precision rationals, far
cheaper than ``fractions.Fraction`` in the inner product loop); floats are
accepted and propagate (used by the numerical semigroup, where matrix
exponentials are inexact).  Mixing the two degrades to floats.  The term map
is always canonical: no zero coefficients are stored, so structural equality
is mathematical equality.
"""
from __future__ import annotations

import itertools
import operator
import re
from fractions import Fraction
from numbers import Rational, Real
from typing import Iterable, Mapping, Sequence

import numpy as np
from gmpy2 import mpq

__all__ = [
    "Polynomial",
    "PolynomialSyntaxError",
    "DimensionMismatch",
    "poly_add",
    "poly_mul",
    "poly_diff",
    "poly_eval",
    "parse_poly",
    "format_poly",
    "default_names",
    "kinetic_names",
    "random_polynomial",
]


class DimensionMismatch(ValueError):
    pass


class PolynomialSyntaxError(ValueError):
    pass


_MPQ = type(mpq(0))


def _as_scalar(c):
    if isinstance(c, _MPQ):
        return c
    if isinstance(c, (bool, np.bool_)):
        return mpq(int(c))
    if isinstance(c, (int, np.integer)):
        return mpq(int(c))
    if isinstance(c, Fraction):
        return mpq(c.numerator, c.denominator)
    if isinstance(c, Rational):
        return mpq(int(c.numerator), int(c.denominator))
    if isinstance(c, (float, np.floating)):
        return float(c)
    if isinstance(c, Real):
        return float(c)
    raise TypeError(f"unsupported coefficient type {type(c).__name__}")


class Polynomial:
    """Immutable polynomial in ``dim`` variables.

    >>> x, v = Polynomial.variables(2)
    >>> (x + v) ** 2 == x**2 + 2 * x * v + v**2
    True
    """

    __slots__ = ("dim", "_terms", "_hash", "_exact")

    def __init__(self, dim: int, terms: Mapping[tuple, object] | None = None):
        if dim < 0:
            raise ValueError("dim must be non-negative")
        self.dim = int(dim)
        clean = {}
        items = [(a, _as_scalar(c)) for a, c in (terms or {}).items()]
        if not all(isinstance(c, _MPQ) for _, c in items):
            items = [(a, float(c)) for a, c in items]
        for alpha, c in items:
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != dim or any(a < 0 for a in alpha):
                raise ValueError(f"bad exponent {alpha} for dim {dim}")
            if c != 0:
                clean[alpha] = clean.get(alpha, 0) + c
                if clean[alpha] == 0:
                    del clean[alpha]
        self._terms = clean
        self._hash = None
        self._exact = all(isinstance(c, _MPQ) for c in clean.values())

    # construction helpers

    @classmethod
    def zero(cls, dim: int) -> "Polynomial":
        return cls(dim)

    @classmethod
    def const(cls, dim: int, c) -> "Polynomial":
        return cls(dim, {(0,) * dim: c})

    @classmethod
    def var(cls, dim: int, i: int) -> "Polynomial":
        if not 0 <= i < dim:
            raise IndexError(f"variable {i} out of range for dim {dim}")
        alpha = [0] * dim
        alpha[i] = 1
        return cls(dim, {tuple(alpha): 1})

    @classmethod
    def monomial(cls, alpha: Sequence[int], c=1) -> "Polynomial":
        return cls(len(alpha), {tuple(alpha): c})

    @classmethod
    def variables(cls, dim: int) -> list["Polynomial"]:
        return [cls.var(dim, i) for i in range(dim)]

    @classmethod
    def _raw(cls, dim, terms, exact) -> "Polynomial":
        # terms already canonical and homogeneous in scalar type
        p = object.__new__(cls)
        p.dim = dim
        p._terms = terms
        p._hash = None
        p._exact = exact
        return p

    # basic queries

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self) -> bool:
        return bool(self._terms)

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(a) for a in self._terms), default=-1)

    def coeff(self, alpha: Sequence[int]):
        return self._terms.get(tuple(alpha), mpq(0))

    def constant_term(self):
        return self.coeff((0,) * self.dim)

    def is_constant(self) -> bool:
        return all(sum(a) == 0 for a in self._terms)

    def is_exact(self) -> bool:
        return self._exact

    def depends_on(self, i: int) -> bool:
        return any(a[i] for a in self._terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return self.dim == other.dim and self._terms == other._terms
        if isinstance(other, (int, float, Fraction, _MPQ)):
            return self.is_constant() and self.constant_term() == other
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.dim, frozenset(self._terms.items())))
        return self._hash

    # arithmetic

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.dim != self.dim:
                raise DimensionMismatch(f"dimension mismatch: {self.dim} vs {other.dim}")
            return other
        return Polynomial.const(self.dim, other)

    def _unify(self, other: "Polynomial"):
        if self._exact == other._exact:
            return self, other
        return self.to_float(), other.to_float()

    def __add__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        a, b = self._unify(other)
        if len(a._terms) < len(b._terms):
            a, b = b, a
        out = dict(a._terms)
        for k, c in b._terms.items():
            s = out.get(k, 0) + c
            if s == 0:
                out.pop(k, None)
            else:
                out[k] = s
        return Polynomial._raw(self.dim, out, a._exact)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw(self.dim, {a: -c for a, c in self._terms.items()}, self._exact)

    def __sub__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            try:
                c = _as_scalar(other)
            except TypeError:
                return NotImplemented
            if c == 0:
                return Polynomial(self.dim)
            base = self
            if not isinstance(c, _MPQ) and self._exact:
                base = self.to_float()
            elif isinstance(c, _MPQ) and not self._exact:
                c = float(c)
            return Polynomial._raw(self.dim, {a: k * c for a, k in base._terms.items()}, base._exact)
        other = self._coerce(other)
        p, q = self._unify(other)
        out: dict = {}
        add = operator.add
        get = out.get
        for a, c in p._terms.items():
            for b, k in q._terms.items():
                e = tuple(map(add, a, b))
                out[e] = get(e, 0) + c * k
        return Polynomial._raw(self.dim, {e: c for e, c in out.items() if c != 0}, p._exact)

    __rmul__ = __mul__

    def __truediv__(self, other):
        c = _as_scalar(other)
        if c == 0:
            raise ZeroDivisionError("polynomial division by zero")
        if isinstance(c, _MPQ):
            return self * (1 / c)
        return self * (1.0 / c)

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        result = Polynomial.const(self.dim, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    # calculus

    def diff(self, i: int) -> "Polynomial":
        if not 0 <= i < self.dim:
            raise IndexError(f"variable {i} out of range for dim {self.dim}")
        out = {}
        for a, c in self._terms.items():
            if a[i]:
                b = a[:i] + (a[i] - 1,) + a[i + 1:]
                out[b] = c * a[i]
        return Polynomial._raw(self.dim, out, self._exact)

    def gradient(self) -> list["Polynomial"]:
        return [self.diff(i) for i in range(self.dim)]

    # evaluation

    def __call__(self, *point):
        if len(point) == 1 and not isinstance(point[0], (int, float, Fraction, _MPQ)):
            point = point[0]
        return self.eval(point)

    def eval(self, point: Sequence) -> float:
        """Evaluate at a point, in floating point."""
        point = [float(p) for p in point]
        if len(point) != self.dim:
            raise DimensionMismatch(f"point has length {len(point)}, expected {self.dim}")
        if not self._terms:
            return 0.0
        powers = self._powers(point)
        total = 0.0
        for a, c in self._terms.items():
            m = float(c)
            for j, e in enumerate(a):
                if e:
                    m *= powers[j][e]
            total += m
        return total

    def eval_exact(self, point: Sequence):
        """Evaluate exactly at a rational point."""
        point = [_as_scalar(p) for p in point]
        if len(point) != self.dim:
            raise DimensionMismatch(f"point has length {len(point)}, expected {self.dim}")
        if any(not isinstance(p, _MPQ) for p in point):
            raise TypeError("eval_exact requires rational coordinates")
        total = mpq(0)
        for a, c in self._terms.items():
            m = c
            for p, e in zip(point, a):
                if e:
                    m *= p**e
            total += m
        return total

    def _powers(self, point):
        top = [0] * self.dim
        for a in self._terms:
            for j, e in enumerate(a):
                if e > top[j]:
                    top[j] = e
        powers = []
        for p, k in zip(point, top):
            row = [1.0]
            for _ in range(k):
                row.append(row[-1] * p)
            powers.append(row)
        return powers

    def eval_array(self, points) -> np.ndarray:
        """Vectorized evaluation; ``points`` has shape ``(..., dim)``."""
        points = np.asarray(points, dtype=float)
        if points.shape[-1] != self.dim:
            raise DimensionMismatch(f"points have trailing size {points.shape[-1]}, expected {self.dim}")
        out = np.zeros(points.shape[:-1])
        if not self._terms:
            return out
        cols = [points[..., j] for j in range(self.dim)]
        cache: dict = {}

        def power(j, e):
            key = (j, e)
            if key not in cache:
                cache[key] = cols[j] if e == 1 else power(j, e - 1) * cols[j]
            return cache[key]

        for a, c in self._terms.items():
            m = np.full(points.shape[:-1], float(c))
            for j, e in enumerate(a):
                if e:
                    m = m * power(j, e)
            out += m
        return out

    # structural maps

    def map_coeffs(self, fn) -> "Polynomial":
        return Polynomial(self.dim, {a: fn(c) for a, c in self._terms.items()})

    def to_float(self) -> "Polynomial":
        return self.map_coeffs(float)

    def embed(self, dim: int, offset: int = 0) -> "Polynomial":
        """Re-index into ``dim`` variables, placing ours at ``offset``."""
        if offset + self.dim > dim:
            raise DimensionMismatch("embedding does not fit")
        pad_l, pad_r = (0,) * offset, (0,) * (dim - offset - self.dim)
        return Polynomial._raw(dim, {pad_l + a + pad_r: c for a, c in self._terms.items()}, self._exact)

    def substitute(self, images: Sequence["Polynomial"]) -> "Polynomial":
        """Replace variable ``j`` by ``images[j]`` (all of a common dim)."""
        if len(images) != self.dim:
            raise DimensionMismatch("need one image per variable")
        if not images:
            return self
        target = images[0].dim
        cache: dict = {}

        def power(j, e):
            key = (j, e)
            if key not in cache:
                cache[key] = images[j] if e == 1 else power(j, e - 1) * images[j]
            return cache[key]

        out = Polynomial(target)
        for a, c in self._terms.items():
            m = Polynomial.const(target, c)
            for j, e in enumerate(a):
                if e:
                    m = m * power(j, e)
            out = out + m
        return out

    def max_abs_coeff(self) -> float:
        return max((abs(float(c)) for c in self._terms.values()), default=0.0)

    def sorted_terms(self) -> list[tuple[tuple, object]]:
        """Terms in graded lexicographic order, highest first."""
        return sorted(self._terms.items(), key=lambda t: (sum(t[0]), t[0]), reverse=True)

    def __repr__(self) -> str:
        return f"Polynomial({format_poly(self)!r}, dim={self.dim})"

    def __str__(self) -> str:
        return format_poly(self)


# functional aliases


def poly_add(a: Polynomial, b: Polynomial) -> Polynomial:
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimension mismatch: {a.dim} vs {b.dim}")
    return a + b


def poly_mul(a: Polynomial, b: Polynomial) -> Polynomial:
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimension mismatch: {a.dim} vs {b.dim}")
    return a * b


def poly_diff(p: Polynomial, var: int) -> Polynomial:
    return p.diff(var)


def poly_eval(p: Polynomial, point: Sequence) -> float:
    return p.eval(point)


# variable naming


def default_names(dim: int) -> tuple[str, ...]:
    return tuple(f"z{i + 1}" for i in range(dim))


def kinetic_names(n: int) -> tuple[str, ...]:
    return tuple(f"x{i + 1}" for i in range(n)) + tuple(f"v{i + 1}" for i in range(n))


# text syntax


def _format_coeff(c) -> str:
    if isinstance(c, _MPQ):
        return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    return repr(float(c))


def _format_monomial(alpha, names) -> str:
    parts = []
    for name, e in zip(names, alpha):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return "*".join(parts)


def format_poly(p: Polynomial, names: Sequence[str] | None = None) -> str:
    """Render ``p`` as text, e.g. ``3/2*x1^2*v1 - v1 + 1``."""
    names = tuple(names) if names is not None else default_names(p.dim)
    if len(names) != p.dim:
        raise DimensionMismatch("wrong number of variable names")
    if p.is_zero():
        return "0"
    chunks = []
    for alpha, c in p.sorted_terms():
        negative = c < 0
        mag = -c if negative else c
        mono = _format_monomial(alpha, names)
        exact_one = isinstance(mag, _MPQ) and mag == 1
        if not mono:
            body = _format_coeff(mag)
        elif exact_one:
            body = mono
        else:
            body = f"{_format_coeff(mag)}*{mono}"
        if not chunks:
            chunks.append(f"-{body}" if negative else body)
        else:
            chunks.append(f"{'-' if negative else '+'} {body}")
    return " ".join(chunks)


_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<deriv>d/d(?P<dname>[A-Za-z_][A-Za-z_0-9]*))"
    r"|(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)


def _tokenize(text: str):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise PolynomialSyntaxError(f"unexpected character at {pos}: {text[pos:pos + 10]!r}")
        pos = m.end()
        if m.group("deriv"):
            out.append(("deriv", m.group("dname")))
        elif m.group("num"):
            s = m.group("num")
            out.append(("num", float(s) if any(ch in s for ch in ".eE") else mpq(int(s))))
        elif m.group("name"):
            out.append(("name", m.group("name")))
        else:
            out.append(("op", m.group("op")))
    return out


class _Parser:
    """Recursive-descent parser shared by polynomials and vector fields.

    Values are either ``Polynomial`` or ``dict[int, Polynomial]`` (a vector
    field as derivative index -> coefficient).
    """

    def __init__(self, text, names, allow_fields):
        self.toks = _tokenize(text)
        self.i = 0
        self.names = {n: k for k, n in enumerate(names)}
        self.dim = len(names)
        self.allow_fields = allow_fields

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def parse(self):
        if not self.toks:
            raise PolynomialSyntaxError("empty expression")
        val = self.expr()
        if self.i != len(self.toks):
            raise PolynomialSyntaxError(f"trailing input near token {self.peek()}")
        return val

    def expr(self):
        val = None
        sign = 1
        kind, tok = self.peek()
        if kind == "op" and tok in "+-":
            self.take()
            sign = -1 if tok == "-" else 1
        val = self._scale(self.term(), sign)
        while True:
            kind, tok = self.peek()
            if kind == "op" and tok in "+-":
                self.take()
                rhs = self._scale(self.term(), -1 if tok == "-" else 1)
                val = self._add(val, rhs)
            else:
                return val

    def term(self):
        val = self.power()
        while True:
            kind, tok = self.peek()
            if kind == "op" and tok == "*":
                self.take()
                val = self._mul(val, self.power())
            elif kind == "op" and tok == "/":
                self.take()
                k2, num = self.take()
                if k2 != "num":
                    raise PolynomialSyntaxError("division only by a numeric literal")
                if num == 0:
                    raise PolynomialSyntaxError("division by zero")
                val = self._scale(val, (1 / num) if isinstance(num, _MPQ) else 1.0 / num)
            else:
                return val

    def power(self):
        base = self.atom()
        kind, tok = self.peek()
        if kind == "op" and tok == "^":
            self.take()
            k2, e = self.take()
            if k2 != "num" or not isinstance(e, _MPQ) or e.denominator != 1 or e < 0:
                raise PolynomialSyntaxError("exponent must be a non-negative integer")
            if isinstance(base, dict):
                raise PolynomialSyntaxError("cannot raise a derivation to a power")
            return base ** int(e)
        return base

    def atom(self):
        kind, tok = self.take()
        if kind == "num":
            return Polynomial.const(self.dim, tok)
        if kind == "name":
            if tok not in self.names:
                raise PolynomialSyntaxError(f"unknown variable {tok!r}")
            return Polynomial.var(self.dim, self.names[tok])
        if kind == "deriv":
            if not self.allow_fields:
                raise PolynomialSyntaxError("derivation not allowed in a polynomial")
            if tok not in self.names:
                raise PolynomialSyntaxError(f"unknown variable {tok!r} in d/d{tok}")
            return {self.names[tok]: Polynomial.const(self.dim, 1)}
        if kind == "op" and tok == "(":
            val = self.expr()
            k2, t2 = self.take()
            if (k2, t2) != ("op", ")"):
                raise PolynomialSyntaxError("missing ')'")
            return val
        if kind == "op" and tok == "-":
            return self._scale(self.power(), -1)
        raise PolynomialSyntaxError(f"unexpected token {tok!r}")

    def _scale(self, val, c):
        if isinstance(val, dict):
            return {k: p * c for k, p in val.items()}
        return val * c

    def _add(self, a, b):
        if isinstance(a, dict) != isinstance(b, dict):
            if isinstance(a, Polynomial) and a.is_zero():
                return b
            if isinstance(b, Polynomial) and b.is_zero():
                return a
            raise PolynomialSyntaxError("cannot add a function and a vector field")
        if isinstance(a, dict):
            out = dict(a)
            for k, p in b.items():
                out[k] = out.get(k, Polynomial(self.dim)) + p
            return out
        return a + b

    def _mul(self, a, b):
        if isinstance(a, dict) and isinstance(b, dict):
            raise PolynomialSyntaxError("product of two derivations is not a vector field")
        if isinstance(a, dict):
            return {k: p * b for k, p in a.items()}
        if isinstance(b, dict):
            return {k: a * p for k, p in b.items()}
        return a * b


def parse_poly(text: str, names: Sequence[str]) -> Polynomial:
    """Parse the textual syntax produced by :func:`format_poly`.

    Accepts sums of products of rationals (``3/2``), decimals, variables and
    integer powers; parentheses are allowed for convenience.
    """
    val = _Parser(text, tuple(names), allow_fields=False).parse()
    return val


def random_polynomial(dim: int, degree: int, rng, coeff_range: int = 3, density: float = 1.0) -> Polynomial:
    """Random polynomial with integer coefficients in ``[-coeff_range, coeff_range]``.

    ``rng`` is a ``numpy.random.Generator``.
    """
    terms = {}
    for total in range(degree + 1):
        for alpha in _exponents_of_degree(dim, total):
            if density < 1.0 and rng.random() > density:
                continue
            terms[alpha] = int(rng.integers(-coeff_range, coeff_range + 1))
    return Polynomial(dim, terms)


def _exponents_of_degree(dim: int, total: int) -> Iterable[tuple]:
    for combo in itertools.combinations_with_replacement(range(dim), total):
        alpha = [0] * dim
        for j in combo:
            alpha[j] += 1
        yield tuple(alpha)


def exponents_up_to(dim: int, degree: int, start: int = 0) -> list[tuple]:
    out = []
    for total in range(start, degree + 1):
        out.extend(_exponents_of_degree(dim, total))
    return out
