from .gaussian import (GaussianModel, MomentTable, coeff_distance, em_moments, exact_Pt,
                       gaussian_expectation, law_at, matrix_exp, push_forward, transition_cov)
from .simulate import GaussianInit, ParticleEnsemble, SimulationBlowUp, em_simulate
from .quadrature import GaussianQuadrature, QuadSpec
from .decay import (DecayCurve, EntropyIntegrals, decay_h1_exact, entropy_decay_check,
                    kappa_classical_gaussian, kappa_lsi_gaussian, lsi_ratios, modified_energy,
                    pointwise_gradient_check, positive_test_function)
