"""Curvature certificates, structure constants and convergence rates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from gmpy2 import mpq

from .gamma import jet_components
from .polyexpr import Polynomial
from .reports import CheckResult, VerificationReport
from .vecfield import OperatorSpec, VectorField, lie_bracket, relative_decompose, vf_apply

PSD_TOL = 1e-9
K_CAP = 1e6
# bisection target; stricter than PSD_TOL so K lands on the exact boundary
BISECT_TOL = 1e-12


class StructureError(ValueError):
    """A bracket that does not decompose over the frame."""


class InfeasibleCertificate(ValueError):
    pass


# regions


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(a) for a in self.lo))
        object.__setattr__(self, "hi", tuple(float(b) for b in self.hi))
        if len(self.lo) != len(self.hi) or not self.lo:
            raise ValueError("box bounds must be nonempty and of equal length")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError("box lower bound exceeds upper bound")

    @classmethod
    def cube(cls, dim: int, half_width: float) -> "Box":
        return cls((-half_width,) * dim, (half_width,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def grid_points(self, grid: int) -> np.ndarray:
        axes = [np.linspace(a, b, grid) if grid > 1 else np.array([(a + b) / 2])
                for a, b in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def random_points(self, count: int, rng: np.random.Generator) -> np.ndarray:
        lo, hi = np.array(self.lo), np.array(self.hi)
        return lo + (hi - lo) * rng.random((count, self.dim))


# structure constants


@dataclass
class StructureConstants:
    """Bracket coefficients in the frame (X_1..X_n, Z_1..Z_m).

    Index layout: ``omega[i][j][k]`` and ``gamma_c[i][j][k]`` for
    ``[X_i, X_j]``; ``alpha[i][j][k]`` and ``beta[i][j][k]`` for
    ``[X_i, Z_j]``; ``sigma[i][j]`` and ``lambda_c[i][j]`` for ``[Y, Z_i]``.
    """

    omega: list
    gamma_c: list
    alpha: list
    beta: list
    sigma: list
    lambda_c: list
    X: tuple = field(default=(), repr=False)
    unbounded: bool = False

    @property
    def n(self) -> int:
        return len(self.omega)

    @property
    def m(self) -> int:
        return len(self.lambda_c)


def _split(coeffs, n):
    return list(coeffs[:n]), list(coeffs[n:])


def extract_structure_constants(spec: OperatorSpec, max_degree: int = 2,
                                include_x0: bool = True) -> StructureConstants:
    """Decompose all frame brackets over ``X ∪ Z``.

    With ``include_x0`` the drift is the full first-order part ``X0 + Y``;
    otherwise only ``Y`` is bracketed with ``Z``.
    """
    X, Z = list(spec.X), list(spec.Z)
    if not Z:
        raise StructureError("operator has no vertical frame Z")
    n, m = len(X), len(Z)
    frame = X + Z
    drift = spec.drift if include_x0 else spec.Y

    targets, labels = [], []
    for i in range(n):
        for j in range(n):
            targets.append(lie_bracket(X[i], X[j]))
            labels.append(f"[X{i + 1},X{j + 1}]")
    for i in range(n):
        for j in range(m):
            targets.append(lie_bracket(X[i], Z[j]))
            labels.append(f"[X{i + 1},Z{j + 1}]")
    for i in range(m):
        targets.append(lie_bracket(drift, Z[i]))
        labels.append(f"[Y,Z{i + 1}]")

    decs = relative_decompose(targets, frame, max_degree)
    for dec, label in zip(decs, labels):
        if dec.residual:
            raise StructureError(f"bracket {label} is not in span(X, Z) with degree <= {max_degree}")
    it = iter(decs)
    omega = [[None] * n for _ in range(n)]
    gamma_c = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            omega[i][j], gamma_c[i][j] = _split(next(it).coeffs, n)
    alpha = [[None] * m for _ in range(n)]
    beta = [[None] * m for _ in range(n)]
    for i in range(n):
        for j in range(m):
            alpha[i][j], beta[i][j] = _split(next(it).coeffs, n)
    sigma, lambda_c = [], []
    for i in range(m):
        s, lam = _split(next(it).coeffs, n)
        sigma.append(s)
        lambda_c.append(lam)
    return StructureConstants(omega, gamma_c, alpha, beta, sigma, lambda_c, tuple(X),
                              unbounded=any(d.unbounded for d in decs))


def _combine(coeffs, fields, dim):
    out = VectorField.zero(dim)
    for c, F in zip(coeffs, fields):
        out = out + F * c
    return out


def check_reconstruction(spec: OperatorSpec, sc: StructureConstants, include_x0: bool = True,
                         scenario: str = "") -> VerificationReport:
    """Re-expand every bracket from the tensors and compare exactly."""
    X, Z, d = list(spec.X), list(spec.Z), spec.dim
    drift = spec.drift if include_x0 else spec.Y
    report = VerificationReport()
    bad = []
    for i in range(sc.n):
        for j in range(sc.n):
            rhs = _combine(sc.omega[i][j], X, d) + _combine(sc.gamma_c[i][j], Z, d)
            if lie_bracket(X[i], X[j]) != rhs:
                bad.append(f"[X{i + 1},X{j + 1}]")
            if sc.omega[i][j] != [-c for c in sc.omega[j][i]] or sc.gamma_c[i][j] != [-c for c in sc.gamma_c[j][i]]:
                bad.append(f"antisymmetry ({i + 1},{j + 1})")
        for j in range(sc.m):
            rhs = _combine(sc.alpha[i][j], X, d) + _combine(sc.beta[i][j], Z, d)
            if lie_bracket(X[i], Z[j]) != rhs:
                bad.append(f"[X{i + 1},Z{j + 1}]")
    for i in range(sc.m):
        rhs = _combine(sc.sigma[i], X, d) + _combine(sc.lambda_c[i], Z, d)
        if lie_bracket(drift, Z[i]) != rhs:
            bad.append(f"[Y,Z{i + 1}]")
    report.add(CheckResult("structure constant reconstruction", not bad, scenario,
                           counterexample=", ".join(bad) or None,
                           detail=f"n={sc.n}, m={sc.m}"))
    if sc.unbounded:
        report.warnings.append("unbounded-coefficients: some structure functions are non-constant")
    return report


def cd_matrix(sc: StructureConstants, point: Sequence[float]) -> np.ndarray:
    """Symmetrized Z-block coefficient matrix of the CD condition at ``point``."""
    n, m = sc.n, sc.m
    point = [float(p) for p in point]

    def ev(p: Polynomial) -> float:
        return p.eval(point)

    M = np.zeros((m, m))
    for j in range(m):
        for k in range(m):
            acc = ev(sc.lambda_c[j][k])
            for i in range(n):
                for l in range(n):
                    acc += (ev(sc.alpha[i][k][l]) + ev(sc.gamma_c[l][i][k])) * ev(sc.gamma_c[l][i][j])
                    acc -= ev(sc.alpha[i][k][l]) * ev(sc.alpha[i][j][l])
                if sc.X:
                    acc += ev(vf_apply(sc.X[i], sc.beta[i][k][j]))
                for l in range(m):
                    acc += ev(sc.beta[i][k][l]) * (ev(sc.beta[i][l][j]) - ev(sc.beta[i][j][l]))
            M[j, k] = acc
    return 0.5 * (M + M.T)


def cd_rho(sc: StructureConstants, region: Box, grid: int = 5) -> float:
    """Grid minimum of the smallest CD-matrix eigenvalue."""
    if sc.m == 0:
        raise StructureError("no vertical frame")
    return min(float(np.linalg.eigvalsh(cd_matrix(sc, p))[0]) for p in region.grid_points(grid))


# Hessian bounds and the closed-form kinetic constant


@dataclass(frozen=True)
class HessianBounds:
    a: float
    b: float

    def __post_init__(self):
        if self.a > self.b:
            raise ValueError("HessianBounds needs a <= b")

    @property
    def M(self) -> float:
        return max(abs(1 - 2 * self.a), abs(1 - 2 * self.b))

    @classmethod
    def from_potential(cls, V: Polynomial, n: int) -> "HessianBounds":
        """Exact eigenvalue bounds of a constant Hessian (quadratic V only)."""
        H = hessian(V, n)
        if any(not h.is_constant() for row in H for h in row):
            raise ValueError("non-quadratic potential: supply HessianBounds explicitly")
        ev = np.linalg.eigvalsh(np.array([[float(h.constant_term()) for h in row] for row in H]))
        return cls(float(ev[0]), float(ev[-1]))


def hessian(V: Polynomial, n: int) -> list[list[Polynomial]]:
    return [[V.diff(i).diff(j) for j in range(n)] for i in range(n)]


def check_hessian_bounds(V: Polynomial, n: int, hb: HessianBounds, region: Box,
                         grid: int = 5, tol: float = 1e-9) -> list[str]:
    """Sample the Hessian on the region; return warnings for violations."""
    H = hessian(V, n)
    warnings = []
    for p in region.grid_points(grid):
        mat = np.array([[h.eval(p) for h in row] for row in H])
        ev = np.linalg.eigvalsh(mat)
        if ev[0] < hb.a - tol or ev[-1] > hb.b + tol:
            warnings.append(f"Hessian eigenvalues {ev.tolist()} at {p.tolist()} outside [{hb.a}, {hb.b}]")
    return warnings


def kinetic_K(eta: float, hb: HessianBounds | float) -> float:
    """Smallest K with 4(½−η)(½+K) ≥ M², i.e. ``M²/(4(½−η)) − ½``."""
    if not 0 < eta < 0.5:
        raise ValueError(f"eta must lie in (0, 1/2), got {eta}")
    M = hb.M if isinstance(hb, HessianBounds) else float(hb)
    return M * M / (4 * (0.5 - eta)) - 0.5


# jet-form bisection


class _JetStack:
    """Jet matrices of one operator over a set of points, for batched PSD tests."""

    def __init__(self, spec: OperatorSpec, points: np.ndarray):
        comps = [jet_components(spec, p) for p in points]
        self.points = np.asarray(points, dtype=float)
        self.base = np.stack([c.gamma2 + c.gamma2Z for c in comps])
        self.G = np.stack([c.gamma for c in comps])
        self.GZ = np.stack([c.gammaZ for c in comps])

    def min_eigs(self, K: float, eta: float) -> np.ndarray:
        F = self.base + K * self.G - eta * self.GZ
        F = 0.5 * (F + np.swapaxes(F, 1, 2))
        return np.linalg.eigvalsh(F)[:, 0]

    def feasible(self, K: float, eta: float, tol: float = PSD_TOL) -> bool:
        F = self.base + K * self.G - eta * self.GZ
        # never ask for more than the eigensolver can resolve
        tol = max(tol, 1e-14 * float(np.abs(F).max()))
        F = 0.5 * (F + np.swapaxes(F, 1, 2))
        return bool(np.linalg.eigvalsh(F)[:, 0].min() >= -tol)


def _bisect_K(stack: _JetStack, eta: float, K_lo: float, tol: float, K_cap: float) -> float:
    psd = lambda K: stack.feasible(K, eta, BISECT_TOL)
    if psd(K_lo):
        return K_lo
    K_hi = max(1.0, K_lo + 1.0)
    while not psd(K_hi):
        K_hi *= 2
        if K_hi > K_cap:
            raise InfeasibleCertificate(f"no K <= {K_cap:g} makes the jet form PSD at eta={eta}")
    lo, hi = K_lo, K_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if psd(mid):
            hi = mid
        else:
            lo = mid
    return hi


def minimal_K(spec: OperatorSpec, eta: float, region: Box, grid: int = 5,
              K_lo: float = -0.5, tol: float = 1e-10, K_cap: float = K_CAP) -> float:
    """Smallest K (bisection over ``[K_lo, K_hi]``) making the jet form PSD on the grid."""
    if region.dim != spec.dim:
        raise ValueError("region dimension does not match operator")
    stack = _JetStack(spec, region.grid_points(grid))
    return _bisect_K(stack, eta, K_lo, tol, K_cap)


def jet_rho(spec: OperatorSpec, region: Box, grid: int = 5, tol: float = 1e-7,
            K_cap: float = K_CAP) -> float:
    """Sup of η for which some K ≤ ``K_cap`` makes the jet form PSD on the grid."""
    stack = _JetStack(spec, region.grid_points(grid))

    def ok(eta):
        try:
            _bisect_K(stack, eta, -K_cap, 1.0, K_cap)
            return True
        except InfeasibleCertificate:
            return False

    if not ok(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while ok(hi):
        lo, hi = hi, 2 * hi
        if hi > K_cap:
            return math.inf
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


# certificates


@dataclass
class CurvatureCertificate:
    eta: float
    K: float
    rho: float
    evidence: list = field(default_factory=list)
    region: Box | None = None
    method: str = ""
    epsilon: float | None = None

    @property
    def lambda_pointwise(self) -> float:
        return min(-self.K, self.eta)

    @property
    def rho1(self) -> float:
        return self.K

    @property
    def rho2(self) -> float:
        return self.eta

    @property
    def min_evidence(self) -> float:
        return min((e for _, e in self.evidence), default=math.nan)

    def sound(self, tol: float = PSD_TOL) -> bool:
        return bool(self.evidence) and self.min_evidence >= -tol

    def revalidate(self, spec: OperatorSpec, count: int = 50, seed: int = 0,
                   tol: float = 1e-8) -> tuple[bool, float]:
        """Recheck the jet form at ``count`` fresh uniform points of the region."""
        if self.region is None:
            raise ValueError("certificate carries no region")
        pts = self.region.random_points(count, np.random.default_rng([seed, 104729]))
        worst = float(_JetStack(spec, pts).min_eigs(self.K, self.eta).min())
        return worst >= -tol, worst

    def to_text(self) -> str:
        lines = [
            f"method          {self.method}",
            f"eta (rho2)      {self.eta:.12g}",
            f"K (rho1)        {self.K:.12g}",
            f"rho             {self.rho:.12g}",
            f"lambda(eta)     {self.lambda_pointwise:.12g}",
            f"evidence        {len(self.evidence)} points, min eigenvalue {self.min_evidence:.3e}",
        ]
        if self.epsilon is not None:
            lines.insert(1, f"epsilon         {self.epsilon:.12g}")
        return "\n".join(lines)


def _evidence(stack: _JetStack, K: float, eta: float) -> list:
    eigs = stack.min_eigs(K, eta)
    return [(tuple(p.tolist()), float(e)) for p, e in zip(stack.points, eigs)]


def certify_kinetic(spec: OperatorSpec, eta: float, hb: HessianBounds, region: Box,
                    grid: int = 5) -> CurvatureCertificate:
    """Closed-form K(η) with PSD evidence from the jet form."""
    K = kinetic_K(eta, hb)
    stack = _JetStack(spec, region.grid_points(grid))
    rho = cd_rho(extract_structure_constants(spec), region, grid)
    return CurvatureCertificate(eta, K, rho, _evidence(stack, K, eta), region, "closed-form")


def certify_general(spec: OperatorSpec, eta: float, region: Box, grid: int = 5,
                    rho: float | None = None, epsilon: float | None = None) -> CurvatureCertificate:
    """Bisected K(η) with PSD evidence."""
    stack = _JetStack(spec, region.grid_points(grid))
    K = _bisect_K(stack, eta, -0.5, 1e-10, K_CAP)
    if rho is None:
        rho = cd_rho(extract_structure_constants(spec), region, grid)
    return CurvatureCertificate(eta, K, rho, _evidence(stack, K, eta), region, "jet-bisection", epsilon)


# the epsilon construction


def _exact_scalar(eps):
    if isinstance(eps, float):
        return mpq(Fraction(eps))
    return mpq(eps)


def construct_Z_epsilon(X: Sequence[VectorField], Y: VectorField, epsilon) -> list[VectorField]:
    """``Z_i = X_i + ε[Y, X_i]``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    eps = _exact_scalar(epsilon)
    return [Xi + lie_bracket(Y, Xi) * eps for Xi in X]


def frame_rank(fields: Sequence[VectorField], point: Sequence[float]) -> int:
    return int(np.linalg.matrix_rank(np.array([F.at(point) for F in fields])))


@dataclass
class EpsilonScan:
    table: list  # (epsilon, rho) pairs in candidate order
    epsilon: float
    rho: float
    spec: OperatorSpec
    certificate: CurvatureCertificate

    def to_text(self) -> str:
        rows = ["epsilon,rho"] + [f"{e:.12g},{r:.12g}" for e, r in self.table]
        return "\n".join(rows)


class EpsilonScanFailed(InfeasibleCertificate):
    def __init__(self, message, table):
        super().__init__(message)
        self.table = table


def epsilon_scan(spec: OperatorSpec, candidates: Sequence[float], region: Box, grid: int = 5,
                 eta_fraction: float = 0.5) -> EpsilonScan:
    """Pick ε maximizing the CD ρ of the frame built by :func:`construct_Z_epsilon`.

    ``spec.Z`` is ignored.  The returned certificate uses η = ``eta_fraction``·ρ.
    """
    if not candidates:
        raise ValueError("empty epsilon candidate list")
    table = []
    best = None
    for eps in candidates:
        Z = construct_Z_epsilon(spec.X, spec.Y, eps)
        trial = spec.with_Z(Z)
        try:
            rho = cd_rho(extract_structure_constants(trial), region, grid)
        except StructureError:
            rho = -math.inf
        table.append((float(eps), rho))
        if rho > 0 and (best is None or rho > best[1]):
            best = (float(eps), rho, trial)
    if best is None:
        raise EpsilonScanFailed("no epsilon candidate reaches rho > 0", table)
    eps, rho, trial = best
    cert = certify_general(trial, eta_fraction * rho, region, grid, rho=rho, epsilon=eps)
    return EpsilonScan(table, eps, rho, trial, cert)


# rates


@dataclass
class RateReport:
    kappa: float
    branch: str
    lambda_h1: float
    lambda_entropy: float
    l2_prefactor: float | None = None

    @property
    def positive_branch(self) -> bool:
        return self.branch == "K+eta>0"


def rates(cert: CurvatureCertificate, kappa: float) -> RateReport:
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    eta, K = cert.eta, cert.K
    if K + eta > 0:
        return RateReport(kappa, "K+eta>0",
                          2 * eta * kappa / (kappa + eta + K),
                          2 * eta * kappa / (kappa + 2 * (eta + K)))
    return RateReport(kappa, "K+eta<=0", 2 * eta, 2 * eta, 1.0 / kappa)


def optimize_eta(K_of_eta: Callable[[float], float], kappa: float, etas: Sequence[float]):
    """Grid search for the η maximizing λ_h1; returns (eta, K, RateReport)."""
    best = None
    for eta in etas:
        try:
            K = K_of_eta(eta)
        except InfeasibleCertificate:
            continue
        rep = rates(CurvatureCertificate(eta, K, math.nan), kappa)
        if best is None or rep.lambda_h1 > best[2].lambda_h1:
            best = (eta, K, rep)
    if best is None:
        raise InfeasibleCertificate("no feasible eta on the grid")
    return best


def modified_poincare_lowerbound(kappa_classical: float, n: int = 1) -> float:
    """Poincaré constant for Γ + Γ^Z from the classical one: (3 − √5)·κ."""
    if kappa_classical <= 0:
        raise ValueError("kappa_classical must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    return (3 - math.sqrt(5)) * kappa_classical


def frame_gram(fields: Sequence[VectorField], point: Sequence[float] | None = None) -> np.ndarray:
    """Σ_k c_k c_kᵀ for the coefficient vectors c_k of the fields."""
    d = fields[0].dim
    point = [0.0] * d if point is None else point
    C = np.array([F.at(point) for F in fields])
    return C.T @ C


def frame_gram_min_eig(fields: Sequence[VectorField]) -> float:
    if any(not F.is_constant() for F in fields):
        raise ValueError("frame Gram bound needs constant-coefficient fields")
    return float(np.linalg.eigvalsh(frame_gram(fields))[0])


def jet_K_function(spec: OperatorSpec, region: Box, grid: int = 5) -> Callable[[float], float]:
    """η ↦ minimal K on a fixed grid, reusing one batch of jet matrices."""
    stack = _JetStack(spec, region.grid_points(grid))
    return lambda eta: _bisect_K(stack, eta, -0.5, 1e-10, K_CAP)
