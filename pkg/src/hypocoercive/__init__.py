"""Curvature-dimension certificates and decay checks for hypoelliptic diffusions."""
from .polyexpr import (DimensionMismatch, Polynomial, PolynomialSyntaxError, format_poly, parse_poly,
                       poly_add, poly_diff, poly_eval, poly_mul, random_polynomial)
from .vecfield import (Decomposition, OperatorSpec, VectorField, generator_apply, kinetic_spec,
                       lie_bracket, parse_field, relative_decompose, vf_apply)
from .gamma import (JetForm, gamma, gamma2, gamma2Z, gammaZ, jet, jet_form_extract, jetform_eval,
                    verify_intertwining, verify_kinetic_closed_forms)
from .curvature import (Box, CurvatureCertificate, HessianBounds, RateReport, StructureConstants,
                        cd_matrix, construct_Z_epsilon, epsilon_scan, extract_structure_constants,
                        kinetic_K, minimal_K, modified_poincare_lowerbound, rates)

__version__ = "0.1.0"
