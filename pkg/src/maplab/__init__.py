"""Spectral analysis and limit-theorem verification for Markov additive
processes with finite driving chains."""

from .chain_core import (MixingBoundTable, StochasticKernel, check_reversible,
                         interpolation_bound, l2_operator_norm,
                         solve_stationary, spectral_gap_report)
from .errors import (BranchCollision, ConditionViolated, DegenerateVariance,
                     GapAbsent, LatticeSpec, MaplabError, MomentUndefined,
                     NoInteriorRoot, NonIrreducible, NotStochastic,
                     SingularResolvent, UnsupportedInitial, ZeroMassState,
                     ZeroVariance)
from .fourier import (ExpansionEvaluation, FourierOperator, SpectralSummary,
                      build_fourier, check_semigroup, contour_crosscheck,
                      derivatives_at_zero, evaluate_expansion,
                      is_nonlattice_spectral, lambda_branch, nonlattice_scan)
from .increments import (IncrementLaw, deterministic, from_cf, gaussian,
                         mixture)
from .limit_checks import (GaussianComparison, LltRecord, RhoMixReport,
                           asymptotic_bias, berry_esseen_check, clt_check,
                           ct_limit_check, ecdf_se, edgeworth_cdf,
                           edgeworth_check, kolmogorov_distance, llt_check,
                           rho_mixing_check, triangular_bump)
from .map_model import (CtMapSpec, LatticeReport, MapSpec, ct_sample_skeleton,
                        detect_lattice, exact_mean, exact_moments,
                        third_cumulant_rate, variance_series)
from .mestim import (ContrastFamily, EstimatorRun, MEstimationProblem,
                     build_problem, estimate, estimator_be_check,
                     mean_contrast_family)
from .montecarlo import (TrajectoryBatch, increment_panel, simulate_ct,
                         simulate_discrete, spec_content_hash)

__version__ = "1.0.0"
