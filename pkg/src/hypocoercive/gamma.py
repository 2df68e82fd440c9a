"""Carré du champ calculus: Γ, Γ₂, Γ^Z, Γ₂^Z and their pointwise jet forms.

Everything here is computed from the defining formulas with exact polynomial
arithmetic.  The kinetic closed forms are provided only as verification
targets.
"""
from __future__ import annotations

from dataclasses import dataclass
from gmpy2 import mpq
from functools import lru_cache
from math import factorial
from typing import Callable, Sequence

import numpy as np

from .polyexpr import DimensionMismatch, Polynomial, exponents_up_to, random_polynomial
from .reports import CheckResult, VerificationReport
from .vecfield import OperatorSpec, generator_apply, kinetic_spec, vf_apply

HALF = mpq(1, 2)


class EmptyVerticalFrame(ValueError):
    pass


def _check(spec: OperatorSpec, *polys: Polynomial) -> None:
    for p in polys:
        if p.dim != spec.dim:
            raise DimensionMismatch(f"operator dim {spec.dim} vs function dim {p.dim}")


def gamma(spec: OperatorSpec, f: Polynomial, g: Polynomial | None = None) -> Polynomial:
    """Γ(f,g) = ½(L(fg) − f Lg − g Lf)."""
    g = f if g is None else g
    _check(spec, f, g)
    L = spec.L
    return (L(f * g) - f * L(g) - g * L(f)) * HALF


def gamma_frame(spec: OperatorSpec, f: Polynomial, g: Polynomial | None = None) -> Polynomial:
    """Σ_i X_i f · X_i g, the closed form of Γ for a sum-of-squares operator."""
    g = f if g is None else g
    _check(spec, f, g)
    out = Polynomial(spec.dim)
    for X in spec.X:
        out = out + vf_apply(X, f) * vf_apply(X, g)
    return out


def gammaZ(spec: OperatorSpec, f: Polynomial, g: Polynomial | None = None) -> Polynomial:
    """Γ^Z(f,g) = Σ_k Z_k f · Z_k g."""
    if not spec.Z:
        raise EmptyVerticalFrame("operator has no vertical frame Z")
    g = f if g is None else g
    _check(spec, f, g)
    out = Polynomial(spec.dim)
    for Z in spec.Z:
        out = out + vf_apply(Z, f) * vf_apply(Z, g)
    return out


def _iterate(spec, form, f, g):
    L = spec.L
    return (L(form(spec, f, g)) - form(spec, f, L(g)) - form(spec, g, L(f))) * HALF


def gamma2(spec: OperatorSpec, f: Polynomial, g: Polynomial | None = None) -> Polynomial:
    """Γ₂(f,g) = ½(LΓ(f,g) − Γ(f,Lg) − Γ(g,Lf))."""
    g = f if g is None else g
    _check(spec, f, g)
    return _iterate(spec, gamma, f, g)


def gamma2Z(spec: OperatorSpec, f: Polynomial, g: Polynomial | None = None) -> Polynomial:
    """Γ₂^Z(f,g) = ½(LΓ^Z(f,g) − Γ^Z(f,Lg) − Γ^Z(g,Lf))."""
    if not spec.Z:
        raise EmptyVerticalFrame("operator has no vertical frame Z")
    g = f if g is None else g
    _check(spec, f, g)
    return _iterate(spec, gammaZ, f, g)


# kinetic closed forms (verification targets only)


def _kinetic_parts(spec: OperatorSpec):
    n = spec.n_kinetic
    if n is None:
        raise ValueError("closed forms need a kinetic operator")
    return n, spec.potential


def kinetic_gamma2_closed(spec: OperatorSpec, f: Polynomial) -> Polynomial:
    """‖∇_v² f‖² + Γ(f) + ∇_x f · ∇_v f."""
    n, _ = _kinetic_parts(spec)
    out = Polynomial(spec.dim)
    fv = [f.diff(n + i) for i in range(n)]
    for i in range(n):
        for j in range(n):
            out = out + fv[i].diff(n + j) ** 2
        out = out + fv[i] ** 2 + f.diff(i) * fv[i]
    return out


def kinetic_gamma2Z_closed(spec: OperatorSpec, f: Polynomial) -> Polynomial:
    """‖∇_v Z f‖² + ½Γ^Z(f) + ½∇_v f·Zf − 2∇²V(∇_v f, Zf)."""
    n, V = _kinetic_parts(spec)
    out = Polynomial(spec.dim)
    fv = [f.diff(n + i) for i in range(n)]
    Zf = [vf_apply(Z, f) for Z in spec.Z]
    for i in range(n):
        for j in range(n):
            out = out + Zf[j].diff(n + i) ** 2
            Vij = V.diff(i).diff(j)
            if not Vij.is_zero():
                out = out - 2 * Vij * fv[i] * Zf[j]
        out = out + HALF * Zf[i] ** 2 + HALF * fv[i] * Zf[i]
    return out


def verify_kinetic_closed_forms(V: Polynomial | str, n: int, trials: int = 20, degree: int = 4,
                                seed: int = 0, scenario: str = "") -> VerificationReport:
    """Compare definitional Γ₂, Γ₂^Z with the kinetic closed forms on random f."""
    spec = kinetic_spec(V, n)
    report = VerificationReport()
    if trials <= 0:
        report.warnings.append("no trials requested; closed-form check skipped")
        return report
    names = ("gamma2 closed form", gamma2, kinetic_gamma2_closed), \
            ("gamma2Z closed form", gamma2Z, kinetic_gamma2Z_closed)
    for label, definitional, closed in names:
        bad = None
        for t in range(trials):
            f = random_polynomial(spec.dim, degree, np.random.default_rng([seed, t]))
            diff = definitional(spec, f) - closed(spec, f)
            if not diff.is_zero():
                bad = (f, diff)
                break
        if bad is None:
            report.add(CheckResult(label, True, scenario, detail=f"{trials} trials, degree {degree}, exact"))
        else:
            f, diff = bad
            report.add(CheckResult(label, False, scenario, counterexample=spec.fmt(f),
                                   detail=f"difference {spec.fmt(diff)}"))
    return report


def intertwining_defect(spec: OperatorSpec, f: Polynomial) -> Polynomial:
    """Γ(f, Γ^Z(f)) − Γ^Z(f, Γ(f))."""
    return gamma(spec, f, gammaZ(spec, f)) - gammaZ(spec, f, gamma(spec, f))


def verify_intertwining(spec: OperatorSpec, trials: int = 10, seed: int = 0, degree: int = 3,
                        scenario: str = "") -> VerificationReport:
    if not spec.Z:
        raise EmptyVerticalFrame("operator has no vertical frame Z")
    report = VerificationReport()
    if trials <= 0:
        report.warnings.append("no trials requested; intertwining check skipped")
        return report
    for t in range(trials):
        f = random_polynomial(spec.dim, degree, np.random.default_rng([seed, 7919, t]))
        defect = intertwining_defect(spec, f)
        if not defect.is_zero():
            report.add(CheckResult("intertwining", False, scenario, counterexample=spec.fmt(f),
                                   detail=f"defect {spec.fmt(defect)}"))
            return report
    report.add(CheckResult("intertwining", True, scenario, detail=f"{trials} trials, degree {degree}, exact"))
    return report


# jet forms


def jet_basis(dim: int) -> list[tuple[int, ...]]:
    """First-order exponents, then second-order ones (i <= j)."""
    return exponents_up_to(dim, 2, start=1)


def jet(f: Polynomial, point: Sequence[float]) -> np.ndarray:
    """Taylor coefficients ∂^α f(p)/α! over :func:`jet_basis`."""
    out = []
    for alpha in jet_basis(f.dim):
        d = f
        for j, e in enumerate(alpha):
            for _ in range(e):
                d = d.diff(j)
        denom = 1
        for e in alpha:
            denom *= factorial(e)
        out.append(d.eval(point) / denom)
    return np.array(out)


@dataclass
class JetForm:
    point: np.ndarray
    basis: list[tuple[int, ...]]
    matrix: np.ndarray

    def value(self, jet_vector) -> float:
        c = np.asarray(jet_vector, dtype=float)
        return float(c @ self.matrix @ c)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix)[0])

    def labels(self, names: Sequence[str]) -> list[str]:
        out = []
        for alpha in self.basis:
            parts = [n if e == 1 else f"{n}^{e}" for n, e in zip(names, alpha) if e]
            out.append("d" + "".join(parts) if sum(alpha) == 1 else "d(" + "*".join(parts) + ")")
        return out


def jetform_eval(form: JetForm, jet_vector) -> float:
    return form.value(jet_vector)


@dataclass(frozen=True)
class _JetTables:
    basis: tuple
    gamma2: tuple
    gamma2Z: tuple
    gamma: tuple
    gammaZ: tuple


def _bilinear_table(spec, form, monos):
    k = len(monos)
    table = [[None] * k for _ in range(k)]
    for a in range(k):
        for b in range(a, k):
            table[a][b] = table[b][a] = form(spec, monos[a], monos[b])
    return tuple(tuple(r) for r in table)


@lru_cache(maxsize=64)
def _jet_tables(spec: OperatorSpec) -> _JetTables:
    basis = tuple(jet_basis(spec.dim))
    monos = [Polynomial.monomial(alpha) for alpha in basis]
    zero = tuple(tuple(Polynomial(spec.dim) for _ in monos) for _ in monos)
    has_z = bool(spec.Z)
    return _JetTables(
        basis,
        _bilinear_table(spec, gamma2, monos),
        _bilinear_table(spec, gamma2Z, monos) if has_z else zero,
        _bilinear_table(spec, gamma, monos),
        _bilinear_table(spec, gammaZ, monos) if has_z else zero,
    )


def _centering(basis, point) -> np.ndarray:
    """Rows express (z − p)^α over the uncentered monomials (constants dropped)."""
    index = {alpha: i for i, alpha in enumerate(basis)}
    T = np.zeros((len(basis), len(basis)))
    for r, alpha in enumerate(basis):
        T[r, r] = 1.0
        if sum(alpha) == 2:
            idx = [j for j, e in enumerate(alpha) for _ in range(e)]
            i, j = idx
            ei = tuple(1 if k == i else 0 for k in range(len(alpha)))
            ej = tuple(1 if k == j else 0 for k in range(len(alpha)))
            T[r, index[ej]] -= point[i]
            T[r, index[ei]] -= point[j]
    return T


def _eval_table(table, point) -> np.ndarray:
    k = len(table)
    out = np.empty((k, k))
    for a in range(k):
        for b in range(a, k):
            out[a, b] = out[b, a] = table[a][b].eval(point)
    return out


@dataclass
class JetComponents:
    """Jet matrices of Γ₂, Γ₂^Z, Γ, Γ^Z at one point (Taylor-coefficient basis)."""

    point: np.ndarray
    basis: list[tuple[int, ...]]
    gamma2: np.ndarray
    gamma2Z: np.ndarray
    gamma: np.ndarray
    gammaZ: np.ndarray

    def form(self, K: float, eta: float) -> np.ndarray:
        M = self.gamma2 + self.gamma2Z + K * self.gamma - eta * self.gammaZ
        return 0.5 * (M + M.T)


def jet_components(spec: OperatorSpec, point: Sequence[float]) -> JetComponents:
    point = np.asarray(point, dtype=float)
    if point.shape != (spec.dim,):
        raise DimensionMismatch(f"point must have length {spec.dim}")
    tables = _jet_tables(spec)
    T = _centering(tables.basis, point)
    mats = [T @ _eval_table(tab, point) @ T.T
            for tab in (tables.gamma2, tables.gamma2Z, tables.gamma, tables.gammaZ)]
    return JetComponents(point, list(tables.basis), *mats)


def jet_form_extract(spec: OperatorSpec, K: float, eta: float, point: Sequence[float]) -> JetForm:
    """Matrix of Q(f) = Γ₂(f) + Γ₂^Z(f) + KΓ(f) − ηΓ^Z(f) on the 2-jet at ``point``."""
    comp = jet_components(spec, point)
    return JetForm(comp.point, comp.basis, comp.form(K, eta))


def quadratic_form_matrix(functional: Callable[[Polynomial], Polynomial], dim: int,
                          point: Sequence[float]) -> np.ndarray:
    """Polarize a quadratic functional over centered monomials (z − p)^α.

    B(e_a, e_b) = ½(Q(e_a + e_b) − Q(e_a) − Q(e_b)).  Independent of the
    table-based path in :func:`jet_components`; kept as its oracle.
    """
    point = [float(p) for p in point]
    basis = jet_basis(dim)
    shifted = [Polynomial.var(dim, j) - point[j] for j in range(dim)]
    elems = []
    for alpha in basis:
        e = Polynomial.const(dim, 1)
        for j, k in enumerate(alpha):
            if k:
                e = e * shifted[j] ** k
        elems.append(e)
    diag = [functional(e).eval(point) for e in elems]
    k = len(basis)
    B = np.empty((k, k))
    for a in range(k):
        B[a, a] = diag[a]
        for b in range(a + 1, k):
            B[a, b] = B[b, a] = 0.5 * (functional(elems[a] + elems[b]).eval(point) - diag[a] - diag[b])
    return B
