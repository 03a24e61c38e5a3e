"""Counterfactual panel estimation via factor-based matrix completion.

Estimates per-cell treatment effects on a panel whose treated block is
unobserved in its untreated state, builds wild-bootstrap confidence
intervals for every treated cell, and ships a Monte Carlo harness for
coverage studies of the whole procedure.
"""

__version__ = "0.1.0"

from .bootstrap import (
    BootstrapConfig,
    BootstrapDraws,
    IntervalSet,
    bootstrap_statistics,
    build_intervals,
    draw_multipliers,
    empirical_quantile,
    resample_errors,
)
from .dgp import DgpConfig, DgpDesign, DgpDraw, ar1_errors, generate_dgp
from .effects import (
    EffectEstimates,
    VarianceComponents,
    bartlett_weights,
    compute_residuals,
    default_bandwidth,
    estimate_effects,
    gamma_t,
    long_run_phi,
    sigma2,
    variance_vhat,
)
from .exceptions import (
    ConfigError,
    DegeneracyError,
    IfeError,
    PanelDataError,
    SimulationError,
)
from .factors import CompletionFit, FactorEstimate, complete_matrix, pca_factors, sign_normalize
from .ifee import IfeeResult, ifee_fit, start_beta
from .nfactors import FactorCountEstimate, estimate_num_factors
from .panel import (
    Observation,
    OrderConditionReport,
    PanelData,
    SubsampleView,
    build_panel,
    panel_to_observations,
    read_panel_csv,
    tall_view,
    validate_order_conditions,
    wide_view,
    write_panel_csv,
)
from .pipeline import EstimateResult, choose_rank, estimate_panel, fit_panel
from .study import CoverageRow, CoverageTable, run_coverage_study
