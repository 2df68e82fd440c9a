"""Orchestration of identity checks, certification, decay and simulation."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from gmpy2 import mpq

from ..curvature import (PSD_TOL, CurvatureCertificate, EpsilonScan, HessianBounds, RateReport,
                         cd_rho, certify_general, certify_kinetic, check_hessian_bounds, check_reconstruction,
                         epsilon_scan, extract_structure_constants, frame_gram_min_eig, jet_K_function,
                         kinetic_K, minimal_K, modified_poincare_lowerbound, optimize_eta, rates)
from ..gamma import verify_intertwining, verify_kinetic_closed_forms
from ..polyexpr import parse_poly, random_polynomial
from ..reports import CheckResult, ReportRow, VerificationReport
from ..semigroup import (GaussianInit, GaussianModel, decay_h1_exact, em_simulate, entropy_decay_check,
                         exact_Pt, gaussian_expectation, kappa_classical_gaussian, kappa_lsi_gaussian,
                         lsi_ratios, pointwise_gradient_check, positive_test_function)
from ..semigroup.simulate import NORMALIZATION_NOTE, RNG_NAME
from ..vecfield import OperatorSpec, VectorField, lie_bracket
from .config import ConfigError, ScenarioConfig

_HALF = mpq(1, 2)


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ms = 1e3 * (time.perf_counter() - self.t0)


def _stamp(rows, ms):
    per = ms / max(len(rows), 1)
    for r in rows:
        r.runtime_ms = per
    return rows


def _rows_from_report(report: VerificationReport, scenario: str) -> list[ReportRow]:
    return [ReportRow(scenario, c.check, c.detail if c.passed else f"counterexample={c.counterexample}",
                      0.0 if c.passed else 1.0, 0.0, c.passed)
            for c in report.checks]


# identities


def commutator_table(spec: OperatorSpec, scenario: str = "") -> VerificationReport:
    """[X0, Z_i] = X_i and [Y, Z_i] = ½Z_i − ½X_i − 2 Σ_j ∂_ij V X_j, exactly."""
    n, V = spec.n_kinetic, spec.potential
    report = VerificationReport()
    bad = []
    for i in range(n):
        if lie_bracket(spec.X0, spec.Z[i]) != spec.X[i]:
            bad.append(f"[X0,Z{i + 1}]")
        want = spec.Z[i] * _HALF - spec.X[i] * _HALF
        for j in range(n):
            Vij = V.diff(i).diff(j)
            if not Vij.is_zero():
                want = want - spec.X[j] * (Vij * 2)
        if lie_bracket(spec.Y, spec.Z[i]) != want:
            bad.append(f"[Y,Z{i + 1}]")
    report.add(CheckResult("commutator table", not bad, scenario, counterexample=", ".join(bad) or None,
                           detail=f"n={n}, exact"))
    return report


def _kinetic_default_Z(cfg: ScenarioConfig) -> bool:
    return cfg.mode == "kinetic" and cfg.Z == []


def run_identities(cfg: ScenarioConfig, seed: int | None = None) -> tuple[VerificationReport, list[ReportRow]]:
    seed = cfg.seed if seed is None else seed
    ids = cfg.identities
    report = VerificationReport()
    with _Timer() as tm:
        spec = cfg.build_spec()
        if cfg.mode == "kinetic":
            if _kinetic_default_Z(cfg):
                report.extend(verify_kinetic_closed_forms(cfg.potential(), cfg.n, ids.trials, ids.degree,
                                                          seed, cfg.name))
                report.extend(commutator_table(spec, cfg.name))
            else:
                report.warnings.append("custom Z: closed forms and commutator table apply to the default frame only")
            report.extend(verify_intertwining(spec, ids.intertwining_trials, seed, ids.intertwining_degree,
                                              cfg.name))
        else:
            if cfg.auto_epsilon:
                scan = epsilon_scan(spec, cfg.epsilon_candidates, cfg.region, cfg.grid)
                spec = scan.spec
            sc = extract_structure_constants(spec)
            report.extend(check_reconstruction(spec, sc, scenario=cfg.name))
    return report, _stamp(_rows_from_report(report, cfg.name), tm.ms)


# certification


@dataclass
class CertifyResult:
    spec: OperatorSpec
    certificate: CurvatureCertificate
    rates: RateReport
    rows: list
    scan: EpsilonScan | None = None
    warnings: list = field(default_factory=list)

    def summary_row(self, scenario: str) -> dict:
        c, r = self.certificate, self.rates
        return {"scenario": scenario, "eta": c.eta, "K": c.K, "rho": c.rho,
                "lambda_pointwise": c.lambda_pointwise, "lambda_h1": r.lambda_h1,
                "lambda_entropy": r.lambda_entropy, "branch": r.branch}

    def to_text(self) -> str:
        lines = [self.certificate.to_text(),
                 f"kappa           {self.rates.kappa:.12g}",
                 f"branch          {self.rates.branch}",
                 f"lambda_h1       {self.rates.lambda_h1:.12g}",
                 f"lambda_entropy  {self.rates.lambda_entropy:.12g}"]
        if self.rates.l2_prefactor is not None:
            lines.append(f"L2 prefactor    {self.rates.l2_prefactor:.12g}")
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines)


def gaussian_model(cfg: ScenarioConfig) -> GaussianModel:
    if cfg.mode != "kinetic":
        raise ConfigError("the exact Gaussian semigroup needs a kinetic scenario")
    try:
        return GaussianModel.from_potential(cfg.potential(), cfg.n)
    except ValueError as exc:
        raise ConfigError(f"{cfg.name}: {exc}") from exc


def _kappa(cfg: ScenarioConfig, spec: OperatorSpec) -> float:
    if isinstance(cfg.kappa, (int, float)):
        return float(cfg.kappa)
    if cfg.kappa == "gaussian-auto":
        return modified_poincare_lowerbound(kappa_classical_gaussian(gaussian_model(cfg)), cfg.n)
    return frame_gram_min_eig(list(spec.X) + list(spec.Z)) * cfg.kappa_classical


def _hessian_bounds(cfg: ScenarioConfig, warnings: list) -> HessianBounds:
    V = cfg.potential()
    hb = cfg.hessian_bounds_obj()
    if hb is None:
        try:
            return HessianBounds.from_potential(V, cfg.n)
        except ValueError as exc:
            raise ConfigError(f"{cfg.name}: {exc}") from exc
    x_box = type(cfg.region)(cfg.region.lo[:cfg.n], cfg.region.hi[:cfg.n])
    warnings += check_hessian_bounds(V, cfg.n, hb, x_box, cfg.grid)
    return hb


def kinetic_eta_grid() -> list[float]:
    return [k / 1000 for k in range(1, 500)]


def run_certify(cfg: ScenarioConfig, eta: float | None = None) -> CertifyResult:
    warnings: list = []
    rows: list = []
    scan = None
    eta_cfg = cfg.eta if eta is None else eta
    with _Timer() as tm:
        spec = cfg.build_spec()
        region, grid = cfg.region, cfg.grid
        if cfg.mode == "kinetic" and _kinetic_default_Z(cfg):
            hb = _hessian_bounds(cfg, warnings)
            kappa = _kappa(cfg, spec)
            if eta_cfg == "optimize":
                eta_val, _, _ = optimize_eta(lambda e: kinetic_K(e, hb), kappa, kinetic_eta_grid())
            else:
                eta_val = float(eta_cfg)
            cert = certify_kinetic(spec, eta_val, hb, region, grid)
            K_jet = minimal_K(spec, eta_val, region, grid)
            rows.append(ReportRow.inequality("two-path-K", abs(K_jet - cert.K), 1e-7,
                                             parameters=f"eta={eta_val:.6g};K_jet={K_jet:.12g}",
                                             scenario=cfg.name))
        else:
            if cfg.auto_epsilon:
                scan = epsilon_scan(spec, cfg.epsilon_candidates, region, grid)
                spec, rho = scan.spec, scan.rho
            else:
                rho = cd_rho(extract_structure_constants(spec), region, grid)
            kappa = _kappa(cfg, spec)
            if eta_cfg == "optimize":
                if not rho > 0:
                    raise ConfigError(f"{cfg.name}: rho = {rho} <= 0, no eta range to optimize over")
                etas = [rho * k / 1000 for k in range(1, 1000)]
                eta_val, _, _ = optimize_eta(jet_K_function(spec, region, grid), kappa, etas)
            else:
                eta_val = float(eta_cfg)
            cert = certify_general(spec, eta_val, region, grid, rho=rho,
                                   epsilon=scan.epsilon if scan else None)
        rep = rates(cert, kappa)
        rows.append(ReportRow.inequality("certificate-psd", -cert.min_evidence, PSD_TOL,
                                         parameters=f"points={len(cert.evidence)};eta={cert.eta:.6g};K={cert.K:.12g}",
                                         scenario=cfg.name))
        ok, worst = cert.revalidate(spec, 50, cfg.seed)
        rows.append(ReportRow.inequality("certificate-revalidate", -worst, 1e-8,
                                         parameters="points=50", scenario=cfg.name))
    return CertifyResult(spec, cert, rep, _stamp(rows, tm.ms), scan, warnings)


# decay


def _test_functions(cfg: ScenarioConfig):
    names = cfg.variable_names
    return [(t, parse_poly(t, names)) for t in cfg.decay.test_functions]


def run_decay(cfg: ScenarioConfig, certified: CertifyResult | None = None, lam_scale: float = 1.0,
              seed: int | None = None) -> list[ReportRow]:
    seed = cfg.seed if seed is None else seed
    d = cfg.decay
    if not d.times and not d.pointwise_times and not d.entropy:
        return []
    model = gaussian_model(cfg)
    certified = certified or run_certify(cfg)
    cert, kappa = certified.certificate, certified.rates.kappa
    rows: list = []
    if d.times:
        for text, f in _test_functions(cfg):
            with _Timer() as tm:
                _, r = decay_h1_exact(model, f, cert, kappa, d.times, lam_scale=lam_scale, scenario=cfg.name)
            for row in r:
                row.parameters = f"f={text};" + row.parameters
            rows += _stamp(r, tm.ms)
    if d.pointwise_times:
        axes = [np.linspace(-d.pointwise_half_width, d.pointwise_half_width, d.pointwise_grid)] * model.d
        points = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=-1)
        for k in range(d.pointwise_random):
            f = random_polynomial(model.d, d.pointwise_degree, np.random.default_rng([seed, 31, k]))
            with _Timer() as tm:
                r = pointwise_gradient_check(model, f, cert, points, d.pointwise_times,
                                             lam_scale=lam_scale, scenario=cfg.name)
            for row in r:
                row.parameters = f"f=random[{k}];" + row.parameters
            rows += _stamp(r, tm.ms)
    if d.entropy and d.entropy_times:
        with _Timer() as tm:
            kappa_lsi = kappa_lsi_gaussian(model)
            ratios = lsi_ratios(model)
            worst = min(r for _, r in ratios)
            lsi_row = ReportRow.inequality("lsi-constant", kappa_lsi, worst, 1e-9,
                                           parameters=f"family=(1+eps*z)^2;tests={len(ratios)}",
                                           scenario=cfg.name)
            p = parse_poly(d.entropy_p, cfg.variable_names)
            f = positive_test_function(model, p, d.entropy_c)
            _, r = entropy_decay_check(model, f, cert, kappa_lsi, d.entropy_times, cfg.quadrature,
                                       lam_scale=lam_scale, scenario=cfg.name)
        rows += _stamp([lsi_row] + r, tm.ms)
    return rows


# simulation


@dataclass
class SimulationResult:
    rows: list
    header: list


def run_simulate(cfg: ScenarioConfig, seed: int | None = None, threads: int = 1, dt: float | None = None,
                 T: float | None = None, particles: int | None = None) -> SimulationResult:
    if cfg.mode != "kinetic":
        raise ConfigError("simulate needs a kinetic scenario")
    s = cfg.simulate
    seed = cfg.seed if seed is None else seed
    dt = s.dt if dt is None else dt
    T = s.T if T is None else T
    N = s.particles if particles is None else particles
    V = cfg.potential()
    model = None
    try:
        model = GaussianModel.from_potential(V, cfg.n)
    except ValueError:
        pass
    if s.init == "equilibrium":
        if model is None:
            raise ConfigError("equilibrium start needs a quadratic potential; give init = 'gaussian'")
        init = GaussianInit(model.mu_mean, model.mu_cov)
    elif s.init == "gaussian":
        init = GaussianInit(s.init_mean, s.init_cov)
    else:
        raise ConfigError(f"unknown init {s.init!r}")
    times = sorted(set([t for t in s.record if t <= T] + [T]))
    with _Timer() as tm:
        ens = em_simulate(V, cfg.n, N, dt, T, seed, init, record=[t for t in times if t != T], threads=threads)
    rows = []
    names = cfg.variable_names
    for t in times:
        for text in s.test_functions:
            f = parse_poly(text, names)
            mean, se = ens.mean_of(f, None if t == T else t)
            params = f"f={text};t={t:g};N={N};dt={dt:g}"
            if model is not None:
                exact = gaussian_expectation(exact_Pt(model, f, t), init.mean, init.cov)
                rows.append(ReportRow.inequality("mc-mean", abs(mean - exact), 4 * se,
                                                 parameters=params + f";mean={mean:.10g};exact={exact:.10g}",
                                                 scenario=cfg.name))
            else:
                rows.append(ReportRow(cfg.name, "mc-mean", params + f";se={se:.6g}", mean, math.inf, True))
    header = [f"rng: {RNG_NAME}", f"seed: {seed}", f"particles: {N}", f"dt: {dt:g}", f"T: {T:g}",
              f"threads: {threads}", f"normalization: {NORMALIZATION_NOTE}"]
    return SimulationResult(_stamp(rows, tm.ms), header)
