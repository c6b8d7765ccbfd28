from .grid import (SpaceTimeGrid, GridFunction, Cylinder, make_grid,
                   discrete_gradient, discrete_hessian, cylinder_nodes)
from .operators import (OperatorSpec, EllipticityParams, Modulus, CoefficientField,
                        PenalizationParams, make_operator, evaluate_F, apply_F,
                        pucci_minus, pucci_plus, rescaled_operator,
                        check_uniform_parabolicity, check_homogeneity,
                        check_continuity, bump, beta_eps, source, source_bound,
                        source_lipschitz)
from .solver import (SolveConfig, SolveResult, BoundaryData, SchemeBlowUp, solve,
                     step, barrier_upper, barrier_lower, sandwich_check, residual,
                     exact_profile, cfl_dt)
from .verification import (GeneralEqSpec, RescaleParams, TimeBarrierParams,
                           transform_v, transform_identity_residual,
                           identity_convergence_order, implied_source,
                           general_eq_residual, rescale_field, rescaled_residual,
                           rescaled_epsilon, rescaled_source_exponent,
                           comparison_trial, random_comparison_trials,
                           time_barrier, time_barrier_params, kappa0, kappa0_thm,
                           rescale_residual_check, holder_time_constant,
                           time_oscillation_check)
from .estimator import (ExponentFit, FreeBoundarySet, fit_exponent, dyadic_radii,
                        oscillation, plane_oscillation, spatial_holder_quotient,
                        temporal_holder_quotient, gradient_bound_ratio,
                        detect_free_boundary, fb_growth, lipschitz_constant,
                        growth_bound_check, profile_error)
from .parsers import ExperimentConfig, parse_config, load_config, read_fields
from .base import CheckReport, summarize
from .viz import Colors
from . import viz, parsers

__author__ = 'The quenching developers'
__email__ = 'quenching-dev@users.noreply.github.com'
__version__ = '0.1.0'
