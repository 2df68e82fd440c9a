"""Exact checks of the gradient, H¹ and entropy decay bounds on the Gaussian model."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..curvature import CurvatureCertificate, frame_gram_min_eig, rates
from ..gamma import gamma, gammaZ
from ..polyexpr import Polynomial
from ..reports import ReportRow
from .gaussian import GaussianModel, exact_Pt, gaussian_expectation
from .quadrature import GaussianQuadrature, QuadSpec


@dataclass
class DecayCurve:
    times: list
    values: list
    label: str
    bounds: list = field(default_factory=list)
    passes: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values differ in length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("non-finite decay value")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "value", "bound", "pass"])
        for i, (t, v) in enumerate(zip(self.times, self.values)):
            b = self.bounds[i] if i < len(self.bounds) else ""
            p = ("pass" if self.passes[i] else "fail") if i < len(self.passes) else ""
            w.writerow([f"{t:.17g}", f"{v:.17g}", f"{b:.17g}" if b != "" else "", p])
        return buf.getvalue()


def modified_energy(spec, p: Polynomial) -> Polynomial:
    """Γ(p) + Γ^Z(p)."""
    return gamma(spec, p) + gammaZ(spec, p)


def _params(**kw) -> str:
    return ";".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in kw.items())


def decay_h1_exact(model: GaussianModel, f: Polynomial, cert: CurvatureCertificate, kappa: float,
                   times: Sequence[float], rtol: float = 1e-8, atol: float = 1e-14,
                   lam_scale: float = 1.0, scenario: str = ""):
    """Exact H¹-type functional along P_t f against the decay bounds."""
    spec, cov, zero = model.spec, model.mu_cov, model.mu_mean
    f = f.to_float() - gaussian_expectation(f, zero, cov)
    rep = rates(cert, kappa)
    lam = rep.lambda_h1 * lam_scale
    c = cert.eta + cert.K

    def parts(p):
        return (gaussian_expectation(p * p, zero, cov),
                gaussian_expectation(modified_energy(spec, p), zero, cov))

    l2_0, grad_0 = parts(f)
    rows, values, bounds, passes = [], [], [], []
    for t in times:
        l2, grad = parts(exact_Pt(model, f, t))
        decay = math.exp(-lam * t)
        base = _params(t=float(t), eta=cert.eta, K=cert.K, kappa=kappa, **{"lambda": lam})
        if rep.positive_branch:
            theta, theta0 = c * l2 + grad, c * l2_0 + grad_0
            row = ReportRow.inequality("h1-energy", theta, decay * theta0, rtol, atol, base, scenario)
            rows.append(row)
            values.append(theta)
            bounds.append(row.bound)
            passes.append(row.passed)
        else:
            r1 = ReportRow.inequality("h1-gradient", grad, decay * grad_0, rtol, atol, base, scenario)
            r2 = ReportRow.inequality("h1-l2", l2, decay * grad_0 / kappa, rtol, atol, base, scenario)
            rows += [r1, r2]
            values.append(grad)
            bounds.append(r1.bound)
            passes.append(r1.passed and r2.passed)
    curve = DecayCurve(list(times), values, "H1-energy", bounds, passes)
    return curve, rows


def pointwise_gradient_check(model: GaussianModel, f: Polynomial, cert: CurvatureCertificate,
                             points, times: Sequence[float], rtol: float = 1e-8, atol: float = 1e-12,
                             lam_scale: float = 1.0, scenario: str = "") -> list[ReportRow]:
    """Γ(P_t f) + Γ^Z(P_t f) ≤ e^{−2λt} P_t(Γ(f) + Γ^Z(f)) at each point and time."""
    spec = model.spec
    lam = cert.lambda_pointwise * lam_scale
    H = modified_energy(spec, f.to_float())
    rows = []
    for t in times:
        lhs = modified_energy(spec, exact_Pt(model, f, t))
        rhs = exact_Pt(model, H, t)
        decay = math.exp(-2 * lam * t)
        for p in points:
            p = [float(a) for a in p]
            rows.append(ReportRow.inequality(
                "pointwise-gradient", lhs.eval(p), decay * rhs.eval(p), rtol, atol,
                _params(t=float(t), point="(" + " ".join(f"{a:.6g}" for a in p) + ")",
                        **{"lambda": lam}), scenario))
    return rows


def positive_test_function(model: GaussianModel, p: Polynomial, c: float) -> Polynomial:
    """(c + p²)/Z with Z chosen so the μ-integral is 1."""
    if c <= 0:
        raise ValueError("c must be positive")
    g = p.to_float() * p.to_float() + c
    return g / gaussian_expectation(g, model.mu_mean, model.mu_cov)


class EntropyIntegrals:
    """Ent, Fisher-type term and mass of a positive polynomial against μ."""

    def __init__(self, model: GaussianModel, quad: QuadSpec):
        self.model, self.quad = model, quad
        self._grids = {}

    def _grid(self, points):
        if points not in self._grids:
            self._grids[points] = GaussianQuadrature(self.model.mu_cov, points, self.quad.sigmas)
        return self._grids[points]

    def _once(self, P: Polynomial, E: Polynomial, points: int) -> dict:
        def integrand(pts):
            pv = P.eval_array(pts)
            safe = np.where(pv > 0, pv, 1.0)
            return {"ent": np.where(pv > 0, pv * np.log(safe), 0.0),
                    "fisher": E.eval_array(pts) / safe,
                    "mass": pv,
                    "min:p": pv}
        return self._grid(points).integrate(integrand)

    def __call__(self, P: Polynomial) -> dict:
        """Integrals on the base grid with refinement error estimates."""
        E = modified_energy(self.model.spec, P)
        base = self._once(P, E, self.quad.points)
        fine = self._once(P, E, self.quad.refine) if self.quad.refine else base
        out = {k: base[k] for k in ("ent", "fisher", "mass")}
        out.update({f"err_{k}": abs(base[k] - fine[k]) for k in ("ent", "fisher", "mass")})
        out["min"] = min(base["min:p"], fine["min:p"])
        return out


def entropy_decay_check(model: GaussianModel, f: Polynomial, cert: CurvatureCertificate,
                        kappa_lsi: float, times: Sequence[float], quad: QuadSpec = QuadSpec(),
                        atol: float = 1e-6, lam_scale: float = 1.0, scenario: str = ""):
    """Entropy functional along P_t f (quadrature) against the decay bounds."""
    rep = rates(cert, kappa_lsi)
    lam = rep.lambda_entropy * lam_scale
    c = cert.eta + cert.K
    integ = EntropyIntegrals(model, quad)
    ref = integ(f.to_float())
    if ref["min"] <= 0:
        raise ValueError("test function is not positive on the quadrature box")
    rows, values, bounds, passes = [], [], [], []
    ents = []
    for t in times:
        cur = integ(exact_Pt(model, f, t))
        base = _params(t=float(t), eta=cert.eta, K=cert.K, kappa_lsi=kappa_lsi, **{"lambda": lam})
        if cur["min"] <= 0:
            rows.append(ReportRow(scenario, "entropy-positivity", base, cur["min"], 0.0, False))
            continue
        decay = math.exp(-lam * t)
        if rep.positive_branch:
            lhs = 2 * c * cur["ent"] + cur["fisher"]
            rhs0 = 2 * c * ref["ent"] + ref["fisher"]
            err = 2 * abs(c) * (cur["err_ent"] + decay * ref["err_ent"]) + cur["err_fisher"] + decay * ref["err_fisher"]
            r = ReportRow.inequality("entropy-energy", lhs, decay * rhs0, 0.0, err + atol, base, scenario)
            rows.append(r)
            values.append(lhs)
            bounds.append(r.bound)
            passes.append(r.passed)
        else:
            err_f = cur["err_fisher"] + decay * ref["err_fisher"]
            r1 = ReportRow.inequality("entropy-fisher", cur["fisher"], decay * ref["fisher"], 0.0,
                                      err_f + atol, base, scenario)
            r2 = ReportRow.inequality("entropy-ent", cur["ent"], decay * ref["fisher"] / kappa_lsi, 0.0,
                                      cur["err_ent"] + decay * ref["err_fisher"] / kappa_lsi + atol,
                                      base, scenario)
            rows += [r1, r2]
            values.append(cur["fisher"])
            bounds.append(r1.bound)
            passes.append(r1.passed and r2.passed)
        tol = cur["err_ent"] + atol
        rows.append(ReportRow.inequality("entropy-nonnegative", -cur["ent"], 0.0, 0.0, tol, base, scenario))
        if ents:
            rows.append(ReportRow.inequality("entropy-monotone", cur["ent"], ents[-1][1], 0.0,
                                             tol + ents[-1][2], base, scenario))
        ents.append((t, cur["ent"], cur["err_ent"]))
    curve = DecayCurve(list(times), values, "entropy-energy", bounds, passes) if values else \
        DecayCurve([], [], "entropy-energy")
    return curve, rows


def kappa_classical_gaussian(model: GaussianModel) -> float:
    """Poincaré constant of μ for the full gradient: min(λ_min(Q), 1)."""
    return float(min(np.linalg.eigvalsh(model.Q)[0], 1.0))


def kappa_lsi_gaussian(model: GaussianModel) -> float:
    """Log-Sobolev constant for Γ + Γ^Z in the f Γ(ln f) normalization.

    The Gaussian bound 2·min(λ_min(Q), 1) for the full gradient, times the
    smallest Gram eigenvalue of the frame (X, Z).
    """
    spec = model.spec
    return 2.0 * frame_gram_min_eig(list(spec.X) + list(spec.Z)) * kappa_classical_gaussian(model)


def lsi_ratios(model: GaussianModel, epsilons: Sequence[float] = (0.1, 0.5, 1.0, 2.0),
               points: int = 801, sigmas: float = 8.0) -> list[tuple[str, float]]:
    """∫fΓ(ln f)+fΓ^Z(ln f) dμ / Ent(f) on the family f ∝ (1 + ε z_k)²."""
    spec = model.spec
    quad = GaussianQuadrature(model.mu_cov, points, sigmas)
    out = []
    zs = Polynomial.variables(model.d)
    for k in range(model.d):
        for eps in epsilons:
            p = (zs[k] * eps + 1).to_float()
            Z = gaussian_expectation(p * p, model.mu_mean, model.mu_cov)
            p = p / math.sqrt(Z)
            # f = p², and f Γ(ln f) = 4Γ(p) exactly
            E = modified_energy(spec, p) * 4.0

            def integrand(pts, p=p, E=E):
                f = p.eval_array(pts) ** 2
                safe = np.where(f > 0, f, 1.0)
                return {"ent": np.where(f > 0, f * np.log(safe), 0.0), "fisher": E.eval_array(pts)}

            r = quad.integrate(integrand)
            out.append((f"{spec.names[k]} eps={eps:g}", r["fisher"] / r["ent"]))
    return out
