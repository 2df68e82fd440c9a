import numpy as np
import pytest
from hypothesis import given

from hypocoercive.polyexpr import DimensionMismatch, Polynomial, PolynomialSyntaxError, kinetic_names, parse_poly, random_polynomial
from hypocoercive.vecfield import (OperatorSpec, VectorField, format_field, generator_apply, kinetic_spec,
                                   lie_bracket, parse_field, relative_decompose, vf_apply)

from strategies import fields, polynomials

NAMES = kinetic_names(1)


def P(text, names=NAMES):
    return parse_poly(text, names)


def F(text, names=NAMES):
    return parse_field(text, names)


class TestApply:
    def test_examples(self):
        assert vf_apply(F("d/dv1"), P("x1*v1")) == P("x1")
        assert vf_apply(VectorField.zero(2), P("x1*v1 + 3")).is_zero()
        Y = F("x1*d/dv1 - v1*d/dx1")  # V = x^2/2
        assert vf_apply(Y, P("x1*v1")) == P("x1^2 - v1^2")

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            vf_apply(F("d/dv1"), Polynomial.var(3, 0))


class TestBrackets:
    def test_X0_Z_gives_X(self):
        spec = kinetic_spec("1/2*x1^2", 1)
        assert lie_bracket(spec.X0, spec.Z[0]) == spec.X[0]

    def test_Y_X_gives_dx(self):
        for V in ["1/2*x1^2", "x1^4 - x1^2", "0"]:
            spec = kinetic_spec(V, 1)
            assert lie_bracket(spec.Y, spec.X[0]) == F("d/dx1")

    def test_antisymmetric(self):
        A = F("x1^2*d/dv1 + v1*d/dx1")
        assert lie_bracket(A, A).is_zero()

    def test_n2_Y_X(self):
        spec = kinetic_spec("1/2*x1^2 + 1/4*x1*x2 + 1/2*x2^2", 2)
        for i in range(2):
            assert lie_bracket(spec.Y, spec.X[i]) == VectorField.coordinate(4, i)


class TestGenerator:
    def test_examples_V_half(self):
        spec = kinetic_spec("1/2*x1^2", 1)
        assert generator_apply(spec, P("v1")) == P("x1 - v1")
        assert generator_apply(spec, P("v1^2")) == P("2 - 2*v1^2 + 2*x1*v1")
        assert generator_apply(spec, Polynomial.const(2, 1)).is_zero()

    def test_folded_drift_equivalent(self):
        spec = kinetic_spec("1/4*x1^2 + x1^4", 1)
        folded = OperatorSpec(2, spec.X, spec.X0 + spec.Y, spec.Z, names=spec.names)
        f = random_polynomial(2, 4, np.random.default_rng(0))
        assert generator_apply(spec, f) == generator_apply(folded, f)

    def test_potential_must_not_depend_on_v(self):
        with pytest.raises(ValueError):
            kinetic_spec("x1*v1", 1)


class TestTextFields:
    def test_parse_and_format(self):
        Y = F("x1*d/dv1 - v1*d/dx1 - v1*d/dv1")
        assert Y.coeffs == (P("-v1"), P("x1 - v1"))
        assert F(format_field(Y, NAMES)) == Y
        assert format_field(VectorField.zero(2), NAMES) == "0"

    @pytest.mark.parametrize("bad", ["x1", "d/dv1*d/dx1", "d/dq", "x1 + d/dv1"])
    def test_parse_errors(self, bad):
        with pytest.raises(PolynomialSyntaxError):
            F(bad)


class TestDecompose:
    def test_frame_member(self):
        spec = kinetic_spec("1/4*x1^2", 1)
        (dec,) = relative_decompose([spec.X[0]], [spec.X[0], spec.Z[0]])
        assert not dec.residual
        assert dec.coeffs == (Polynomial.const(2, 1), Polynomial.zero(2))

    def test_Y_Z_kinetic(self):
        # [Y, Z] = ½Z − ½X − 2V''X
        for V, Vxx in [("1/4*x1^2", "1/2"), ("1/2*x1^2", "1"), ("x1^2", "2")]:
            spec = kinetic_spec(V, 1)
            (dec,) = relative_decompose([lie_bracket(spec.Y, spec.Z[0])], [spec.X[0], spec.Z[0]])
            assert dec.coeffs == (P(f"-1/2 - 2*{Vxx}"), P("1/2"))
            assert not dec.unbounded

    def test_Y_Z_cross_terms(self):
        spec = kinetic_spec("1/2*x1^2 + 1/4*x1*x2 + 1/2*x2^2", 2)
        frame = list(spec.X) + list(spec.Z)
        decs = relative_decompose([lie_bracket(spec.Y, Z) for Z in spec.Z], frame)
        half = Polynomial.const(4, 1) / 2
        assert decs[0].coeffs[:2] == (-half - 2, -half)
        assert decs[0].coeffs[2:] == (half, Polynomial.zero(4))
        assert decs[1].coeffs[:2] == (-half, -half - 2)

    def test_residual(self):
        (dec,) = relative_decompose([F("d/dx1")], [F("d/dv1")])
        assert dec.residual

    def test_polynomial_coefficients_flagged(self):
        spec = kinetic_spec("x1^4", 1)
        (dec,) = relative_decompose([lie_bracket(spec.Y, spec.Z[0])], [spec.X[0], spec.Z[0]], max_degree=2)
        assert not dec.residual and dec.unbounded
        assert dec.reconstruct([spec.X[0], spec.Z[0]]) == lie_bracket(spec.Y, spec.Z[0])

    def test_rejects_float_coefficients(self):
        with pytest.raises(TypeError):
            relative_decompose([F("0.5*d/dv1")], [F("d/dv1")])


@given(fields(), fields(), fields())
def test_jacobi(A, B, C):
    total = lie_bracket(A, lie_bracket(B, C)) + lie_bracket(B, lie_bracket(C, A)) + lie_bracket(C, lie_bracket(A, B))
    assert total.is_zero()


@given(fields(), fields(), polynomials(max_degree=3))
def test_bracket_action(A, B, f):
    assert vf_apply(lie_bracket(A, B), f) == vf_apply(A, vf_apply(B, f)) - vf_apply(B, vf_apply(A, f))


@given(fields(), polynomials(), polynomials())
def test_leibniz(A, f, g):
    assert vf_apply(A, f * g) == f * vf_apply(A, g) + g * vf_apply(A, f)


@given(fields(max_degree=1), fields(max_degree=1), fields(max_degree=1))
def test_decomposition_reconstructs(T, U1, U2):
    (dec,) = relative_decompose([T], [U1, U2], max_degree=1)
    if not dec.residual:
        assert dec.reconstruct([U1, U2]) == T
