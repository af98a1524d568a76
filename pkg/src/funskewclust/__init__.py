"""Clustering of paired functional data via skewed functional-regression mixtures.

Response and covariate curves are expanded in B-spline bases; each mixture
component couples a skewed law (variance-gamma, skew-t, or normal-inverse-
Gaussian) on the covariate coefficients with a functional linear regression
for the response coefficients, fitted by EM with parsimonious covariance
structures and BIC model selection.
"""

from .em import (ESuffStats, EmptyClusterError, FitError,
                 NumericalBreakdownError, StopState, aitken_converged, bic,
                 cattell_select, e_step, fit, initialize, log_likelihood,
                 m_step, map_classify, select_model, solve_concentration)
from .funbasis import (BSplineBasis, CurveSet, FunctionalDataset, eval_basis,
                       fit_coefficients, gram_matrix)
from .gig import GigParams, gamma_expectations, gig_expectations, gig_moments, invgamma_expectations
from .metrics import ari, confusion
from .model import (FLM_VARIANTS, SIGMA_Y_FAMILIES, ClusterModel, FitResult,
                    ParsimonyConfig, XClusterParams, YClusterParams,
                    count_free_params, sigma_y_project)
from .sim import Scenario, benchmark, builtin_scenario, simulate
from .skewdist import (NIG, ST, VG, SkewParams, conditional_gig, sample_skew,
                       skew_log_density, unified_constants)

__version__ = "1.0.0"
