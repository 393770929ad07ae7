"""krflx: Krein strings, exit-boundary eigenfunctions, inverse local times of
jumping-in diffusions, and fluctuation scaling-limit experiments."""

from .strings import (StringMeasure, MonomialString, LogString, ExpTailString,
                      TableString, ScaledString, OffsetString, ClippedString,
                      JumpMeasure, PowerJumpPart, BoundaryClass, Certificate,
                      power_string, identity_string, power_jump, eval_m, tail,
                      G, G1, bullet, rescale, normalize_tail, dual,
                      classify_boundary, check_M1, check_condition_C,
                      parse_measure, parse_jump, DomainError,
                      IntegrabilityError)
from .eigen import (EigenEval, psi, psi_plus, phi1, phi1_plus, g_quadrature,
                    g_decomposition, residual_integral_eq, wronskian)
from .krein import (H, H_closed, H_boundary, H_exact, c1, h_dual, f_dual,
                    SpectralFunction, spectral_function, convergence_H,
                    EULER_GAMMA)
from .levy import (chi, chi_exponent, drift_b, stable_exponent, sample_stable,
                   reference_ilt_sample, arcsine_stieltjes, ArcsineSampler,
                   sample_arcsine, tail_prediction, LaplaceExponent)
from .sim import (first_passage, first_passage_batch, sample_ilt,
                  ilt_marginal_batch, IltPath, BilateralPath, bilateral,
                  williams_residual, derive_rng)
from .harness import (ExperimentSpec, Report, spec_from_dict, spec_from_json,
                      run_experiment, laplace_distance, tauberian_check,
                      tauberian_check_log, ks_critical)

__version__ = "0.1.0"
