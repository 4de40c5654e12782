"""Sharp bounds and confidence bounds on the causal odds ratio in test-negative designs."""

__version__ = "0.1.0"

from .core import (CELL_LABELS, CELL_ORDER, GeneralTable, ObservedTable, SensitivityParams, observed_or,
                   odds_ratio, read_strata_csv, read_strata_json, read_tables, relabel_exposure, restrict_table,
                   validate_table, write_strata_csv)
from .exceptions import (BoundaryCell, DegenerateSet, EmptyRestriction, InfeasibleBox, InfeasibleMarginals,
                         InvalidCovariance, InvalidInput, InvalidTable, NonConverged, TNDError,
                         UndefinedOddsRatio)
from .sharp_bounds import (BoundsInterval, CellBox, HiddenDecomposition, attaining_decomposition, bounds_delta,
                           bounds_delta_gamma, box_bounds, calibrate_benchmarks, cell_box, min_or_boxed)
from .qcqp import FeasiblePoint, SolverConfig, is_feasible, make_point, oracle_bounds, solve_bounds
from .confidence import (CiBoundsResult, ConfidenceSet, ci_bounds_closed, ci_bounds_opt, ci_bounds_oracle,
                         conf_set, max_abs_gauss_quantile, simultaneous_level, wald_or_interval)
from .covmodel import (BandResult, IndividualData, ModelFit, band_bounds, fit_mnl, jacobian_dc, predict_pi,
                       simultaneous_set, true_band)
from .simlab import (CoverageReport, ExperimentConfig, coverage_study, fixed_or_scan, fixed_or_table,
                     sample_dirichlet_pi, sample_multinomial_table, simulate_continuous)
