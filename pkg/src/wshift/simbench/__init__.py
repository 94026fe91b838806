"""Monte Carlo benchmark: DGPs, population truths, replicated runs and result files."""
from .config import bundled_configs, load_run_config, study_configs
from .dgp import (PRESETS, REGRESSION_FUNCTIONS, BetaDist, CovariateShiftDGP, GaussianDist, MARDGP, dgp_from_dict,
                  generate_cs, generate_mar)
from .engine import MonteCarloConfig, MonteCarloResult, RepRow, SummaryRow, run_monte_carlo, run_replication
from .output import emit, emit_json, load_reps, load_summary
from .roster import CS_ROSTER, MAR_ROSTER, EstimatorSpec
from .seeding import mix
from .truth import (BoundComparison, BoundEstimate, compare_bound, efficiency_bound, ks_statistic,
                    population_moments, true_sigma2, true_value)
