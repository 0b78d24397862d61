"""Simultaneous elastic registration and Bayesian estimation of functions
observed densely, sparsely, fragmented, or with noise."""

from .funcdata import (Dataset, Grid, SampledFunction, Subject,
                       ValidationError, load_dataset, save_dataset,
                       uniform_grid)
from .srvf import Srvf, efr_distance, q_inverse, q_transform, warp_action
from .warp import (PhasePrior, PiecewiseWarp, Warping, compose, identity_warp,
                   invert, mean_warping, phase_log_prior, phase_sample)
from .align import RegistrationResult, dp_align, karcher_mean, separate
from .fpca import (EmpiricalAmplitudeBasis, generative_draw, project,
                   reconstruct, variance_explained, vertical_fpca)
from .shapebasis import ShapeRestrictedBasis, shape_basis_eval, srvf_from_coeffs
from .bayes import (Chain, ModelConfig, ShapeRestrictedPrior, SubjectState,
                    Tying, diagnostics, log_likelihood, log_prior,
                    predict_mean, run_chain)
from .infer import (PosteriorFunctionSample, amplitude_error, credible_band,
                    l2_error, map_estimate, modewise_split, plug_in_estimate,
                    pointwise_estimate)
from .sim import (FitSettings, StudySpec, add_noise, fragment, gen_pqrst_like,
                  gen_two_peak, run_study, sparsify)

__version__ = "0.1.0"
