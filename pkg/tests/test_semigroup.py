import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypocoercive.curvature import CurvatureCertificate, HessianBounds, kinetic_K, modified_poincare_lowerbound
from hypocoercive.polyexpr import Polynomial, parse_poly, random_polynomial
from hypocoercive.semigroup.simulate import BLOCK
from hypocoercive.semigroup import (DecayCurve, GaussianInit, GaussianModel, GaussianQuadrature, MomentTable,
                                    QuadSpec, SimulationBlowUp, coeff_distance, decay_h1_exact, em_moments,
                                    em_simulate, entropy_decay_check, exact_Pt, gaussian_expectation,
                                    kappa_classical_gaussian, kappa_lsi_gaussian, law_at, lsi_ratios, matrix_exp,
                                    pointwise_gradient_check, positive_test_function, transition_cov)
from hypocoercive.vecfield import generator_apply

NAMES = ("x1", "v1")
M1 = GaussianModel(1, [[1.0]])
MQ = GaussianModel(1, [[0.5]])
M2 = GaussianModel(2, [[1.0, 0.25], [0.25, 1.0]])


def P(text):
    return parse_poly(text, NAMES)


class TestMatrixExp:
    def test_examples(self):
        np.testing.assert_array_equal(matrix_exp(np.zeros((3, 3))), np.eye(3))
        np.testing.assert_allclose(matrix_exp([[-1.0]], 1.0), [[math.exp(-1)]], rtol=1e-14)
        for t in (0.0, 0.5, 3.0):
            np.testing.assert_allclose(matrix_exp([[0, 1], [0, 0]], t), [[1, t], [0, 1]], atol=1e-15)

    def test_errors(self):
        with pytest.raises(ValueError):
            matrix_exp(np.zeros((2, 3)))
        with pytest.raises(ValueError):
            matrix_exp(np.eye(2), -1.0)


class TestModel:
    @pytest.mark.parametrize("model", [M1, MQ, M2, GaussianModel(1, [[2.5]])])
    def test_stationary_and_stable(self, model):
        assert np.abs(model.A @ model.mu_cov + model.mu_cov @ model.A.T + model.SigmaDiff).max() < 1e-10
        assert model.stationarity_residual() < 1e-10
        assert np.linalg.eigvals(model.A).real.max() < 0

    def test_layout(self):
        np.testing.assert_array_equal(MQ.A, [[0, -1], [0.5, -1]])
        np.testing.assert_array_equal(MQ.SigmaDiff, np.diag([0, 2]))
        np.testing.assert_allclose(MQ.mu_cov, np.diag([2, 1]))

    def test_drift_matches_generator(self):
        # L z_j is the j-th row of A applied to z
        spec = M2.spec
        zs = Polynomial.variables(4)
        for j in range(4):
            Lz = generator_apply(spec, zs[j])
            row = [float(Lz.coeff(tuple(int(i == k) for i in range(4)))) for k in range(4)]
            np.testing.assert_allclose(row, M2.A[j])

    def test_from_potential(self):
        m = GaussianModel.from_potential(parse_poly("1/2*x1^2 + 1/4*x1*x2 + 1/2*x2^2", ("x1", "x2")), 2)
        np.testing.assert_allclose(m.Q, M2.Q)
        with pytest.raises(ValueError):
            GaussianModel.from_potential(parse_poly("x1^4", ("x1",)), 1)

    def test_rejects_bad_Q(self):
        with pytest.raises(ValueError):
            GaussianModel(1, [[-1.0]])
        with pytest.raises(ValueError):
            GaussianModel(2, [[1.0, 0.5], [0.0, 1.0]])


class TestTransitionCov:
    def test_zero_time(self):
        np.testing.assert_array_equal(transition_cov(M1, 0.0), np.zeros((2, 2)))

    def test_long_time(self):
        assert np.abs(transition_cov(M1, 50.0) - M1.mu_cov).max() < 1e-8

    def test_psd(self):
        for t in np.linspace(0.01, 10, 25):
            C = transition_cov(M1, t)
            np.testing.assert_allclose(C, C.T)
            assert np.linalg.eigvalsh(C)[0] > -1e-14

    def test_matches_quadrature_of_integral(self):
        t = 0.7
        s = np.linspace(0, t, 2001)
        vals = np.array([matrix_exp(M1.A, u) @ M1.SigmaDiff @ matrix_exp(M1.A, u).T for u in s])
        w = np.full(len(s), s[1] - s[0])
        w[[0, -1]] *= 0.5
        np.testing.assert_allclose(transition_cov(M1, t), np.tensordot(w, vals, 1), atol=1e-7)

    def test_negative(self):
        with pytest.raises(ValueError):
            transition_cov(M1, -0.1)


class TestGaussianExpectation:
    def test_examples(self):
        z = Polynomial.var(1, 0)
        assert gaussian_expectation(z ** 2, [0], [[1]]) == 1
        assert gaussian_expectation(z ** 4, [0], [[1]]) == 3
        assert gaussian_expectation(P("x1*v1"), [0, 0], [[1, 0.3], [0.3, 1]]) == pytest.approx(0.3)

    def test_shifted_mean(self):
        z = Polynomial.var(1, 0)
        # E[(m+σξ)^3] = m^3 + 3mσ²
        assert gaussian_expectation(z ** 3, [2.0], [[0.5]]) == pytest.approx(8 + 3)

    def test_double_factorials(self):
        z = Polynomial.var(1, 0)
        for k in range(6):
            expect = math.prod(range(2 * k - 1, 0, -2)) * 2.0 ** k
            assert gaussian_expectation(z ** (2 * k), [0], [[2.0]]) == pytest.approx(expect)
            assert gaussian_expectation(z ** (2 * k + 1), [0], [[2.0]]) == 0

    def test_matches_sampling(self):
        rng = np.random.default_rng(0)
        cov = np.array([[1.0, 0.4], [0.4, 2.0]])
        p = random_polynomial(2, 3, rng)
        draws = rng.multivariate_normal([0.5, -0.2], cov, size=400_000)
        vals = p.eval_array(draws)
        assert abs(vals.mean() - gaussian_expectation(p, [0.5, -0.2], cov)) < 5 * vals.std() / math.sqrt(len(vals))

    def test_dimension(self):
        with pytest.raises(Exception):
            gaussian_expectation(P("x1"), [0], [[1]])

    def test_moment_table(self):
        T = MomentTable(np.eye(2))
        assert T((2, 2)) == 1 and T((4, 0)) == 3 and T((1, 0)) == 0


class TestExactPt:
    def test_identity_at_zero(self):
        f = random_polynomial(2, 3, np.random.default_rng(1))
        assert coeff_distance(exact_Pt(M1, f, 0.0), f) < 1e-12

    def test_markov(self):
        for t in (0.3, 2.0, 9.0):
            one = exact_Pt(M1, Polynomial.const(2, 1), t)
            assert coeff_distance(one, Polynomial.const(2, 1)) < 1e-14

    def test_linear_oracle(self):
        # e^{At} from an eigendecomposition, independent of scipy
        w, U = np.linalg.eig(M1.A)
        for t in (0.5, 1.5):
            E = (U @ np.diag(np.exp(w * t)) @ np.linalg.inv(U)).real
            Pv = exact_Pt(M1, P("v1"), t)
            np.testing.assert_allclose([float(Pv.coeff((1, 0))), float(Pv.coeff((0, 1)))], E[1], atol=1e-12)
            assert abs(float(Pv.coeff((0, 0)))) < 1e-15

    def test_negative_time(self):
        with pytest.raises(ValueError):
            exact_Pt(M1, P("x1"), -1)

    @pytest.mark.parametrize("model", [M1, MQ, M2])
    def test_semigroup(self, model):
        rng = np.random.default_rng(7)
        for _ in range(3):
            f = random_polynomial(model.d, 3, rng)
            s, t = rng.uniform(0.1, 2.0, size=2)
            lhs = exact_Pt(model, exact_Pt(model, f, s), t)
            assert coeff_distance(lhs, exact_Pt(model, f, s + t)) < 1e-9

    @pytest.mark.parametrize("model", [M1, MQ, M2])
    def test_invariance(self, model):
        rng = np.random.default_rng(8)
        for _ in range(3):
            f = random_polynomial(model.d, 4, rng)
            base = gaussian_expectation(f, model.mu_mean, model.mu_cov)
            for t in (0.5, 3.0):
                assert gaussian_expectation(exact_Pt(model, f, t), model.mu_mean, model.mu_cov) == \
                    pytest.approx(base, abs=1e-9)

    def test_generator_consistency(self):
        f = random_polynomial(2, 3, np.random.default_rng(9))
        Lf = generator_apply(M1.spec, f)
        hs = [1e-2, 5e-3, 2.5e-3]
        errs = [coeff_distance((exact_Pt(M1, f, h) - f.to_float()) / h, Lf) for h in hs]
        orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
        assert min(orders) >= 0.9
        rich = coeff_distance((exact_Pt(M1, f, hs[1]) * 4 - exact_Pt(M1, f, hs[0]) - f.to_float() * 3) / hs[0], Lf)
        assert rich < errs[-1]

    def test_law_at_matches_Pt(self):
        f = P("x1^2 + x1*v1 - v1")
        mean, cov = np.array([1.0, -0.5]), np.diag([0.2, 0.3])
        m, C = law_at(M1, mean, cov, 1.3)
        assert gaussian_expectation(f, m, C) == pytest.approx(gaussian_expectation(exact_Pt(M1, f, 1.3), mean, cov))


class TestEulerMaruyamaMoments:
    def test_weak_order_one(self):
        mean, cov = np.array([1.0, 1.0]), np.eye(2) * 0.1
        _, C = law_at(M1, mean, cov, 1.0)
        m, Cexact = law_at(M1, mean, cov, 1.0)
        truth = Cexact[1, 1] + m[1] ** 2
        errs = []
        for dt in (0.02, 0.01, 0.005):
            me, Ce = em_moments(M1, mean, cov, dt, int(round(1 / dt)))
            errs.append(abs(Ce[1, 1] + me[1] ** 2 - truth))
        ratios = [a / b for a, b in zip(errs, errs[1:])]
        assert all(1.7 < r < 2.3 for r in ratios)


class TestSimulator:
    init = GaussianInit([0.5, -0.5], np.eye(2) * 0.25)

    def run(self, **kw):
        args = dict(gradV=P("1/2*x1^2"), n=1, N=3000, dt=0.01, T=0.5, seed=4, init=self.init)
        args.update(kw)
        return em_simulate(**args)

    def test_reproducible(self):
        a, b = self.run(), self.run()
        np.testing.assert_array_equal(a.positions, b.positions)
        assert not np.array_equal(a.positions, self.run(seed=5).positions)

    def test_thread_independent(self):
        a = self.run(N=2 * BLOCK + 17, T=0.05)
        b = self.run(N=2 * BLOCK + 17, T=0.05, threads=3)
        np.testing.assert_array_equal(a.positions, b.positions)

    def test_zero_time_is_init_draw(self):
        ens = self.run(T=0.0, record=(0.0,))
        np.testing.assert_array_equal(ens.positions, ens.snapshots[0.0])
        assert ens.count == 3000 and ens.t == 0.0
        m, se = ens.mean_of(P("x1"))
        assert abs(m - 0.5) < 4 * se

    def test_gradient_forms_agree(self):
        a = self.run()
        b = self.run(gradV=[P("x1")])
        c = self.run(gradV=lambda x: x)
        np.testing.assert_array_equal(a.positions, b.positions)
        np.testing.assert_allclose(a.positions, c.positions, rtol=0, atol=0)

    def test_blowup(self):
        with pytest.raises(SimulationBlowUp, match="dt=0.5"):
            em_simulate(P("x1^4"), 1, 50, 0.5, 200.0, 0, GaussianInit([3.0, 3.0], np.eye(2)))

    @pytest.mark.parametrize("kw", [dict(dt=0.0), dict(T=-1.0), dict(N=0), dict(T=0.123), dict(record=(0.005,))])
    def test_bad_arguments(self, kw):
        with pytest.raises(ValueError):
            self.run(**kw)

    def test_mean_tracks_exact_law(self):
        ens = self.run(N=20000, T=1.0, dt=0.005, record=(0.5,))
        for f in (P("x1"), P("v1^2"), P("x1*v1")):
            for at, t in ((None, 1.0), (0.5, 0.5)):
                m, se = ens.mean_of(f, at)
                exact = gaussian_expectation(exact_Pt(M1, f, t), self.init.mean, self.init.cov)
                assert abs(m - exact) < 4 * se + 0.01


def kinetic_cert(eta, M):
    return CurvatureCertificate(eta, kinetic_K(eta, M), 0.5)


class TestDecay:
    TIMES = [0.5 * k for k in range(21)]

    def test_branch_two_quadratic(self):
        cert = kinetic_cert(0.25, 0.0)
        kappa = modified_poincare_lowerbound(kappa_classical_gaussian(MQ))
        curve, rows = decay_h1_exact(MQ, P("x1 + v1"), cert, kappa, self.TIMES)
        assert {r.check for r in rows} == {"h1-gradient", "h1-l2"}
        assert all(r.passed for r in rows) and all(curve.passes)
        assert curve.values[0] == pytest.approx(curve.bounds[0])

    def test_branch_one_stiff(self):
        model = GaussianModel(1, [[2.5]])
        cert = kinetic_cert(0.25, 4.0)
        kappa = modified_poincare_lowerbound(kappa_classical_gaussian(model))
        _, rows = decay_h1_exact(model, P("x1^2 - 2*x1*v1 + v1^3"), cert, kappa, self.TIMES)
        assert {r.check for r in rows} == {"h1-energy"} and all(r.passed for r in rows)

    def test_zero_function(self):
        curve, rows = decay_h1_exact(MQ, Polynomial(2), kinetic_cert(0.25, 0.0), 0.5, [0, 1])
        assert curve.values == [0.0, 0.0] and all(r.passed for r in rows)

    def test_overstated_rate_fails(self):
        # exact gradient decay here is e^{-t}; doubling 2η = 0.9 overshoots it
        cert = kinetic_cert(0.45, 0.0)
        _, rows = decay_h1_exact(MQ, P("x1 + v1"), cert, 0.38, self.TIMES, lam_scale=2.0)
        assert not all(r.passed for r in rows)

    def test_centering(self):
        _, a = decay_h1_exact(MQ, P("x1^2"), kinetic_cert(0.25, 0.0), 0.38, [1.0])
        _, b = decay_h1_exact(MQ, P("x1^2 + 5"), kinetic_cert(0.25, 0.0), 0.38, [1.0])
        assert [r.measured for r in a] == pytest.approx([r.measured for r in b])

    def test_curve_validation_and_csv(self):
        with pytest.raises(ValueError):
            DecayCurve([0, 0], [1, 1], "x")
        with pytest.raises(ValueError):
            DecayCurve([0, 1], [1, math.nan], "x")
        text = DecayCurve([0.0, 1.0], [2.0, 1.0], "x", [2.0, 3.0], [True, True]).to_csv()
        assert text.splitlines() == ["t,value,bound,pass", "0,2,2,pass", "1,1,3,pass"]


class TestPointwise:
    grid = [(x, v) for x in np.linspace(-2, 2, 5) for v in np.linspace(-2, 2, 5)]

    def test_passes_and_tight_at_zero(self):
        cert = kinetic_cert(0.25, 0.0)
        rows = pointwise_gradient_check(MQ, P("x1^2*v1 + x1 - v1^2"), cert, self.grid, [0.0, 0.1, 1.0, 5.0])
        assert all(r.passed for r in rows)
        for r in rows[:25]:
            assert abs(r.measured - r.bound) <= 1e-10 * max(1.0, abs(r.bound))

    def test_constant(self):
        rows = pointwise_gradient_check(MQ, Polynomial.const(2, 3), kinetic_cert(0.25, 0.0), self.grid, [1.0])
        assert all(r.passed and r.measured == 0 for r in rows)

    def test_negative_lambda_still_checked(self):
        model = GaussianModel(1, [[2.0]])
        cert = kinetic_cert(0.25, 3.0)
        assert cert.lambda_pointwise < 0
        rows = pointwise_gradient_check(model, P("x1*v1 + v1^2"), cert, self.grid[:5], [0.5, 2.0])
        assert all(r.passed for r in rows)


class TestQuadrature:
    def test_gaussian_moments(self):
        q = GaussianQuadrature(np.array([[2.0, 0.3], [0.3, 1.0]]), points=801)
        out = q.integrate(lambda z: {"one": np.ones(len(z)), "xy": z[:, 0] * z[:, 1], "min:x": z[:, 0]})
        assert out["one"] == pytest.approx(1, abs=1e-12)
        assert out["xy"] == pytest.approx(0.3, abs=1e-12)
        assert out["min:x"] == pytest.approx(-8 * math.sqrt(2))

    def test_node_limit(self):
        with pytest.raises(ValueError):
            GaussianQuadrature(np.eye(4), points=2001)


class TestEntropy:
    def test_lsi_constant_is_conservative(self):
        for model in (MQ, M1):
            kappa = kappa_lsi_gaussian(model)
            ratios = lsi_ratios(model, points=401)
            assert min(r for _, r in ratios) >= kappa

    def test_positive_function_normalized(self):
        f = positive_test_function(MQ, P("x1 + v1"), 0.5)
        assert gaussian_expectation(f, MQ.mu_mean, MQ.mu_cov) == pytest.approx(1, abs=1e-14)
        with pytest.raises(ValueError):
            positive_test_function(MQ, P("x1"), 0.0)

    @pytest.mark.slow
    def test_branch_two(self):
        cert = kinetic_cert(0.25, 0.0)
        f = positive_test_function(MQ, P("x1 + v1"), 0.5)
        quad = QuadSpec(points=801, refine=1601)
        curve, rows = entropy_decay_check(MQ, f, cert, kappa_lsi_gaussian(MQ), [0.0, 0.5, 1.0, 2.0, 4.0], quad)
        assert all(r.passed for r in rows), [r for r in rows if not r.passed]
        kinds = {r.check for r in rows}
        assert {"entropy-fisher", "entropy-ent", "entropy-nonnegative", "entropy-monotone"} <= kinds
        assert curve.values[0] == pytest.approx(curve.bounds[0], abs=1e-9)
