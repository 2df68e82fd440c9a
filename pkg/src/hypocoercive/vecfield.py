"""Polynomial vector fields, Lie brackets and operators ``L = sum X_i^2 + X0 + Y``."""
from __future__ import annotations

from dataclasses import dataclass, field
from gmpy2 import mpq
from typing import Sequence

from .polyexpr import (
    DimensionMismatch,
    Polynomial,
    PolynomialSyntaxError,
    _Parser,
    default_names,
    exponents_up_to,
    format_poly,
    kinetic_names,
    parse_poly,
)

__all__ = [
    "VectorField",
    "OperatorSpec",
    "Decomposition",
    "vf_apply",
    "lie_bracket",
    "generator_apply",
    "relative_decompose",
    "kinetic_spec",
    "parse_field",
    "format_field",
    "solve_exact",
]


@dataclass(frozen=True)
class VectorField:
    """``sum_j coeffs[j] * d/dz_j``."""

    coeffs: tuple[Polynomial, ...]

    def __post_init__(self):
        coeffs = tuple(self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        dims = {c.dim for c in coeffs}
        if dims and dims != {len(coeffs)}:
            raise DimensionMismatch("each coefficient must live in dim == number of coefficients")

    @property
    def dim(self) -> int:
        return len(self.coeffs)

    @classmethod
    def zero(cls, dim: int) -> "VectorField":
        return cls(tuple(Polynomial(dim) for _ in range(dim)))

    @classmethod
    def coordinate(cls, dim: int, j: int, c=1) -> "VectorField":
        return cls(tuple(Polynomial.const(dim, c) if k == j else Polynomial(dim) for k in range(dim)))

    def __call__(self, f: Polynomial) -> Polynomial:
        return vf_apply(self, f)

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coeffs)

    def is_constant(self) -> bool:
        return all(c.is_constant() for c in self.coeffs)

    def is_exact(self) -> bool:
        return all(c.is_exact() for c in self.coeffs)

    def __add__(self, other: "VectorField") -> "VectorField":
        _check_dims(self, other)
        return VectorField(tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "VectorField") -> "VectorField":
        _check_dims(self, other)
        return VectorField(tuple(a - b for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> "VectorField":
        return VectorField(tuple(-a for a in self.coeffs))

    def __mul__(self, c) -> "VectorField":
        # function or scalar multiple
        return VectorField(tuple(a * c for a in self.coeffs))

    __rmul__ = __mul__

    def bracket(self, other: "VectorField") -> "VectorField":
        return lie_bracket(self, other)

    def at(self, point) -> list[float]:
        return [c.eval(point) for c in self.coeffs]

    def to_text(self, names: Sequence[str] | None = None) -> str:
        return format_field(self, names)

    def __str__(self) -> str:
        return format_field(self)


def _check_dims(*fields):
    dims = {f.dim for f in fields}
    if len(dims) > 1:
        raise DimensionMismatch(f"vector fields of different dimensions: {sorted(dims)}")


def vf_apply(vf: VectorField, f: Polynomial) -> Polynomial:
    if vf.dim != f.dim:
        raise DimensionMismatch(f"field dim {vf.dim} vs function dim {f.dim}")
    out = Polynomial(f.dim)
    for j, c in enumerate(vf.coeffs):
        if c.is_zero():
            continue
        d = f.diff(j)
        if not d.is_zero():
            out = out + c * d
    return out


def lie_bracket(A: VectorField, B: VectorField) -> VectorField:
    """``[A, B] f = A(B f) - B(A f)``, componentwise ``A(b_j) - B(a_j)``."""
    _check_dims(A, B)
    return VectorField(tuple(vf_apply(A, b) - vf_apply(B, a) for a, b in zip(A.coeffs, B.coeffs)))


@dataclass(frozen=True)
class OperatorSpec:
    """Diffusion operator ``L = sum_i X_i^2 + X0 + Y`` with a vertical frame ``Z``.

    ``X0`` is optional; when omitted, ``Y`` is the whole first-order part.
    ``potential`` is recorded for kinetic instances only.
    """

    dim: int
    X: tuple[VectorField, ...]
    Y: VectorField
    Z: tuple[VectorField, ...] = ()
    X0: VectorField | None = None
    names: tuple[str, ...] = ()
    potential: Polynomial | None = field(default=None, compare=False)
    n_kinetic: int | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "X", tuple(self.X))
        object.__setattr__(self, "Z", tuple(self.Z))
        names = tuple(self.names) or default_names(self.dim)
        object.__setattr__(self, "names", names)
        members = list(self.X) + [self.Y] + list(self.Z) + ([self.X0] if self.X0 is not None else [])
        for m in members:
            if m.dim != self.dim:
                raise DimensionMismatch(f"member field of dim {m.dim} in operator of dim {self.dim}")
        if len(names) != self.dim:
            raise DimensionMismatch("one variable name per coordinate required")

    @property
    def drift(self) -> VectorField:
        """Full first-order part ``X0 + Y``."""
        return self.Y if self.X0 is None else self.X0 + self.Y

    @property
    def n(self) -> int:
        return len(self.X)

    @property
    def m(self) -> int:
        return len(self.Z)

    def with_Z(self, Z: Sequence[VectorField]) -> "OperatorSpec":
        return OperatorSpec(self.dim, self.X, self.Y, tuple(Z), self.X0, self.names,
                            self.potential, self.n_kinetic)

    def L(self, f: Polynomial) -> Polynomial:
        return generator_apply(self, f)

    def parse(self, text: str) -> Polynomial:
        return parse_poly(text, self.names)

    def fmt(self, p: Polynomial) -> str:
        return format_poly(p, self.names)


def generator_apply(L: OperatorSpec, f: Polynomial) -> Polynomial:
    if f.dim != L.dim:
        raise DimensionMismatch(f"operator dim {L.dim} vs function dim {f.dim}")
    out = vf_apply(L.drift, f)
    for X in L.X:
        out = out + vf_apply(X, vf_apply(X, f))
    return out


def kinetic_spec(V: Polynomial | str, n: int) -> OperatorSpec:
    """Kinetic Fokker-Planck operator ``Δ_v − v·∇_v + ∇V·∇_v − v·∇_x``.

    Coordinates are ordered ``(x1..xn, v1..vn)``.  ``X_i = d/dv_i``,
    ``X0 = −v·∇_v``, ``Y = ∇V·∇_v − v·∇_x`` and ``Z_i = 2 d/dx_i + d/dv_i``.
    """
    d = 2 * n
    names = kinetic_names(n)
    if isinstance(V, str):
        V = parse_poly(V, names)
    if V.dim == n:
        V = V.embed(d)
    if V.dim != d:
        raise DimensionMismatch(f"potential must have dim {n} or {d}")
    if any(V.depends_on(n + i) for i in range(n)):
        raise ValueError("potential must depend on the x variables only")
    zero = Polynomial(d)
    xs = Polynomial.variables(d)
    X = tuple(VectorField.coordinate(d, n + i) for i in range(n))
    X0 = VectorField(tuple([zero] * n + [-xs[n + i] for i in range(n)]))
    Y = VectorField(tuple([-xs[n + i] for i in range(n)] + [V.diff(i) for i in range(n)]))
    Z = tuple(VectorField.coordinate(d, i, 2) + VectorField.coordinate(d, n + i) for i in range(n))
    return OperatorSpec(d, X, Y, Z, X0, names, potential=V, n_kinetic=n)


# textual vector fields


def parse_field(text: str, names: Sequence[str]) -> VectorField:
    """Parse e.g. ``"x1*d/dv1 - v1*d/dx1"``."""
    names = tuple(names)
    val = _Parser(text, names, allow_fields=True).parse()
    d = len(names)
    if isinstance(val, Polynomial):
        if val.is_zero():
            return VectorField.zero(d)
        raise PolynomialSyntaxError(f"{text!r} is a function, not a vector field")
    return VectorField(tuple(val.get(j, Polynomial(d)) for j in range(d)))


def format_field(vf: VectorField, names: Sequence[str] | None = None) -> str:
    names = tuple(names) if names is not None else default_names(vf.dim)
    chunks = []
    for j, c in enumerate(vf.coeffs):
        if c.is_zero():
            continue
        d = f"d/d{names[j]}"
        terms = c.sorted_terms()
        if len(terms) == 1:
            text = format_poly(c, names)
            negative = text.startswith("-")
            body = text[1:] if negative else text
            body = d if body == "1" else f"{body}*{d}"
        else:
            negative = False
            body = f"({format_poly(c, names)})*{d}"
        if not chunks:
            chunks.append(f"-{body}" if negative else body)
        else:
            chunks.append(f"{'-' if negative else '+'} {body}")
    return " ".join(chunks) if chunks else "0"


# relative boundedness


@dataclass(frozen=True)
class Decomposition:
    """``target == sum_j coeffs[j] * frame[j]`` unless ``residual``."""

    coeffs: tuple[Polynomial, ...]
    residual: bool = False
    unbounded: bool = False  # some coefficient is non-constant

    def reconstruct(self, frame: Sequence[VectorField]) -> VectorField:
        out = VectorField.zero(frame[0].dim)
        for a, U in zip(self.coeffs, frame):
            out = out + U * a
        return out


def solve_exact(rows: list[list], rhs: list) -> list | None:
    """Solve ``rows @ x == rhs`` over the rationals.

    Returns the solution with free variables set to zero (pivots taken on the
    lowest column index available), or ``None`` when inconsistent.
    """
    ncols = len(rows[0]) if rows else 0
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(aug)) if aug[i][c] != 0), None)
        if piv is None:
            continue
        aug[r], aug[piv] = aug[piv], aug[r]
        inv = 1 / aug[r][c]
        aug[r] = [v * inv for v in aug[r]]
        for i in range(len(aug)):
            if i != r and aug[i][c] != 0:
                k = aug[i][c]
                aug[i] = [a - k * b for a, b in zip(aug[i], aug[r])]
        pivots.append(c)
        r += 1
        if r == len(aug):
            break
    for i in range(r, len(aug)):
        if aug[i][-1] != 0:
            return None
    x = [mpq(0)] * ncols
    for i, c in enumerate(pivots):
        x[c] = aug[i][-1]
    return x


def _decompose_one(T: VectorField, frame: Sequence[VectorField], degree: int) -> Decomposition | None:
    d = T.dim
    basis = exponents_up_to(d, degree)
    unknowns = [(j, beta) for j in range(len(frame)) for beta in basis]
    # equations indexed by (component k, monomial gamma)
    eqs: dict = {}

    def row(key):
        if key not in eqs:
            eqs[key] = [mpq(0)] * len(unknowns)
        return eqs[key]

    for u, (j, beta) in enumerate(unknowns):
        mono = Polynomial.monomial(beta)
        for k, c in enumerate(frame[j].coeffs):
            for gamma, val in (mono * c).items():
                row((k, gamma))[u] += mpq(val)
    rhs_terms = {}
    for k, c in enumerate(T.coeffs):
        for gamma, val in c.items():
            row((k, gamma))
            rhs_terms[(k, gamma)] = mpq(val)
    keys = sorted(eqs)
    sol = solve_exact([eqs[key] for key in keys], [rhs_terms.get(key, mpq(0)) for key in keys])
    if sol is None:
        return None
    coeffs = [Polynomial(d) for _ in frame]
    for (j, beta), val in zip(unknowns, sol):
        if val:
            coeffs[j] = coeffs[j] + Polynomial.monomial(beta, val)
    return Decomposition(tuple(coeffs), residual=False,
                         unbounded=any(not c.is_constant() for c in coeffs))


def relative_decompose(targets: Sequence[VectorField], frame: Sequence[VectorField],
                       max_degree: int = 0) -> list[Decomposition]:
    """Express each target over ``frame`` with polynomial coefficients.

    Coefficient degrees are tried from 0 up to ``max_degree``; the first
    feasible degree wins.  Infeasible targets come back with ``residual=True``.
    """
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    if not frame:
        raise ValueError("empty frame")
    _check_dims(*targets, *frame)
    for T in (*targets, *frame):
        if not T.is_exact():
            raise TypeError("relative_decompose needs exact (rational) coefficients")
    out = []
    for T in targets:
        found = None
        for deg in range(max_degree + 1):
            found = _decompose_one(T, frame, deg)
            if found is not None:
                break
        if found is None:
            found = Decomposition(tuple(Polynomial(T.dim) for _ in frame), residual=True)
        out.append(found)
    return out
