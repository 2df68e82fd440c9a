"""Exact semigroup of the kinetic operator with a quadratic potential.

With V(x) = ½xᵀQx the generator is that of the linear SDE dz = Az dt + noise
with diffusion matrix diag(0, 2·Id), so P_t maps polynomials to polynomials
and every expectation reduces to Gaussian moments.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg

from ..polyexpr import DimensionMismatch, Polynomial
from ..vecfield import OperatorSpec, kinetic_spec


def matrix_exp(A, t: float = 1.0) -> np.ndarray:
    """e^{At} (scipy's scaling-and-squaring Padé)."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix_exp needs a square matrix, got shape {A.shape}")
    if t < 0:
        raise ValueError("t must be non-negative")
    return scipy.linalg.expm(A * t)


@dataclass(frozen=True)
class GaussianModel:
    n: int
    Q: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.shape != (self.n, self.n):
            raise DimensionMismatch(f"Q must be {self.n}x{self.n}")
        if not np.allclose(Q, Q.T, atol=0, rtol=1e-14):
            raise ValueError("Q must be symmetric")
        if np.linalg.eigvalsh(Q)[0] <= 0:
            raise ValueError("Q must be positive definite")
        object.__setattr__(self, "Q", Q)

    @classmethod
    def from_potential(cls, V: Polynomial, n: int) -> "GaussianModel":
        """Model for a homogeneous quadratic potential on (x1..xn) or (x, v)."""
        if V.dim not in (n, 2 * n):
            raise DimensionMismatch("potential must have dim n or 2n")
        if any(sum(a) != 2 for a, _ in V.items()):
            raise ValueError("exact semigroup needs V homogeneous quadratic")
        Q = np.array([[float(V.diff(i).diff(j).constant_term()) for j in range(n)] for i in range(n)])
        return cls(n, Q)

    @property
    def d(self) -> int:
        return 2 * self.n

    @cached_property
    def A(self) -> np.ndarray:
        n, I = self.n, np.eye(self.n)
        return np.block([[np.zeros((n, n)), -I], [self.Q, -I]])

    @cached_property
    def SigmaDiff(self) -> np.ndarray:
        n = self.n
        return np.block([[np.zeros((n, n)), np.zeros((n, n))], [np.zeros((n, n)), 2 * np.eye(n)]])

    @cached_property
    def mu_cov(self) -> np.ndarray:
        n = self.n
        return np.block([[np.linalg.inv(self.Q), np.zeros((n, n))], [np.zeros((n, n)), np.eye(n)]])

    @property
    def mu_mean(self) -> np.ndarray:
        return np.zeros(self.d)

    def potential(self) -> Polynomial:
        """½xᵀQx with coefficients taken exactly from the stored floats."""
        xs = Polynomial.variables(self.n)
        V = Polynomial(self.n)
        for i in range(self.n):
            for j in range(self.n):
                V = V + xs[i] * xs[j] * (Fraction(float(self.Q[i, j])) / 2)
        return V

    @cached_property
    def spec(self) -> OperatorSpec:
        return kinetic_spec(self.potential(), self.n)

    def stationarity_residual(self) -> float:
        R = self.A @ self.mu_cov + self.mu_cov @ self.A.T + self.SigmaDiff
        return float(np.abs(R).max())


def transition_cov(model: GaussianModel, t: float) -> np.ndarray:
    """∫₀ᵗ e^{As} Σ e^{Aᵀs} ds via the Van Loan block exponential."""
    if t < 0:
        raise ValueError("t must be non-negative")
    d = model.d
    H = np.block([[model.A, model.SigmaDiff], [np.zeros((d, d)), -model.A.T]])
    E = matrix_exp(H, t)
    C = E[:d, d:] @ E[:d, :d].T
    return 0.5 * (C + C.T)


class MomentTable:
    """Central moments E[ξ^β] of ξ ~ Normal(0, cov) by the Isserlis recursion."""

    def __init__(self, cov):
        self.cov = np.asarray(cov, dtype=float)
        self._cache: dict = {}

    def __call__(self, beta: Sequence[int]) -> float:
        beta = tuple(beta)
        total = sum(beta)
        if total == 0:
            return 1.0
        if total % 2:
            return 0.0
        hit = self._cache.get(beta)
        if hit is not None:
            return hit
        i = next(k for k, b in enumerate(beta) if b)
        rest = list(beta)
        rest[i] -= 1
        acc = 0.0
        for j, bj in enumerate(rest):
            if bj and self.cov[i, j] != 0:
                lower = list(rest)
                lower[j] -= 1
                acc += self.cov[i, j] * bj * self(lower)
        self._cache[beta] = acc
        return acc


def gaussian_expectation(p: Polynomial, mean, cov) -> float:
    """E[p(ξ)] for ξ ~ Normal(mean, cov)."""
    mean = np.asarray(mean, dtype=float).reshape(-1)
    cov = np.asarray(cov, dtype=float)
    if mean.shape != (p.dim,) or cov.shape != (p.dim, p.dim):
        raise DimensionMismatch("mean/cov do not match polynomial dimension")
    if np.any(mean):
        xs = Polynomial.variables(p.dim)
        p = p.substitute([x + float(m) for x, m in zip(xs, mean)])
    moments = MomentTable(cov)
    return float(sum(float(c) * moments(a) for a, c in p.items()))


def push_forward(f: Polynomial, E: np.ndarray, C: np.ndarray) -> Polynomial:
    """z ↦ E[f(Ez + ξ)], ξ ~ Normal(0, C), as a float polynomial."""
    d = f.dim
    D = 2 * d
    zs = Polynomial.variables(D)
    images = []
    for j in range(d):
        img = zs[d + j]
        for k in range(d):
            if E[j, k] != 0:
                img = img + zs[k] * float(E[j, k])
        images.append(img.to_float())
    g = f.substitute(images)
    moments = MomentTable(C)
    out: dict = {}
    for a, c in g.items():
        m = moments(a[d:])
        if m:
            key = a[:d]
            out[key] = out.get(key, 0.0) + float(c) * m
    return Polynomial(d, out)


def exact_Pt(model: GaussianModel, f: Polynomial, t: float) -> Polynomial:
    """The exact semigroup P_t f."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if f.dim != model.d:
        raise DimensionMismatch(f"f has dim {f.dim}, model has dim {model.d}")
    return push_forward(f, matrix_exp(model.A, t), transition_cov(model, t))


def coeff_distance(p: Polynomial, q: Polynomial) -> float:
    """Max coefficientwise absolute difference."""
    return (p.to_float() - q.to_float()).max_abs_coeff()


def law_at(model: GaussianModel, mean, cov, t: float):
    """Mean and covariance at time t started from Normal(mean, cov)."""
    E = matrix_exp(model.A, t)
    m = E @ np.asarray(mean, dtype=float)
    C = E @ np.asarray(cov, dtype=float) @ E.T + transition_cov(model, t)
    return m, 0.5 * (C + C.T)


def em_moments(model: GaussianModel, mean, cov, dt: float, steps: int):
    """Exact mean and covariance of the Euler–Maruyama chain after ``steps`` steps."""
    B = np.eye(model.d) + model.A * dt
    m = np.asarray(mean, dtype=float).copy()
    C = np.asarray(cov, dtype=float).copy()
    for _ in range(steps):
        m = B @ m
        C = B @ C @ B.T + dt * model.SigmaDiff
    return m, C
