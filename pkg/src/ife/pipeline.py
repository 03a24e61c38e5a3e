"""End-to-end estimation: fit, effects, bootstrap, intervals.

This is the single entry point shared by the CLI, the HTTP service, and the
Monte Carlo harness.  The completion is fitted by plain principal components
when the panel has no covariates, and by the interactive-fixed-effects
iteration on each subsample when it does; the bootstrap path is identical in
both cases.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .bootstrap import BootstrapConfig, BootstrapDraws, IntervalSet, bootstrap_statistics, build_intervals
from .effects import EffectEstimates, VarianceComponents, default_bandwidth, estimate_effects
from .exceptions import PanelDataError
from .factors import CompletionFit, complete_matrix, pca_factors
from .ifee import DEFAULT_MAX_ITER, DEFAULT_TOL, IfeeResult, ifee_fit, start_beta
from .nfactors import FactorCountEstimate, estimate_num_factors
from .panel import OrderConditionReport, PanelData, tall_view, validate_order_conditions, wide_view

__all__ = ["EstimateResult", "choose_rank", "fit_panel", "estimate_panel"]

DEFAULT_RMAX = 8
DEFAULT_B = 399


@dataclass(frozen=True)
class EstimateResult:
    """Everything produced by one estimation run."""

    panel: PanelData
    fit: CompletionFit
    effects: EffectEstimates
    components: VarianceComponents
    draws: BootstrapDraws
    intervals: dict[float, IntervalSet]
    r_used: int
    bandwidth: int
    order_report: OrderConditionReport
    rank_estimate: FactorCountEstimate | None = None
    rank_floored: bool = False
    ifee: IfeeResult | None = None


def choose_rank(
    panel: PanelData,
    rmax: int = DEFAULT_RMAX,
    method: str = "baseline",
    rng: np.random.Generator | None = None,
) -> FactorCountEstimate:
    """Estimate the factor count from the control-column block.

    With covariates, the pooled least-squares fit is removed first so the
    criterion sees only the factor-plus-noise part.
    """
    tv = tall_view(panel)
    Y = tv.matrix
    if panel.covariates is not None:
        beta0 = start_beta(Y, tv.covariates)
        Y = Y - tv.covariates @ beta0
    rmax = min(rmax, min(Y.shape) - 1)
    return estimate_num_factors(Y, rmax=rmax, method=method, rng=rng)


def fit_panel(
    panel: PanelData,
    r: int,
    K: int,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[CompletionFit, EffectEstimates, VarianceComponents, IfeeResult | None]:
    """Fit the completion on both subsamples and compute effects.

    Pure factor panels use the SVD estimator; panels with covariates run the
    interactive-fixed-effects iteration on the tall and wide subsamples and
    carry the tall-subsample slope estimate into the residuals and effects.
    """
    tv, wv = tall_view(panel), wide_view(panel)
    ifee_res: IfeeResult | None = None
    if panel.covariates is None:
        tall_fit = pca_factors(tv.matrix, r)
        wide_fit = pca_factors(wv.matrix, r)
        fit = complete_matrix(tall_fit, wide_fit, panel.n_control)
    else:
        ifee_res = ifee_fit(tv.matrix, tv.covariates, r, tol=tol, max_iter=max_iter)
        wide_res = ifee_fit(wv.matrix, wv.covariates, r, tol=tol, max_iter=max_iter)
        fit = complete_matrix(
            ifee_res.factor_estimate(), wide_res.factor_estimate(), panel.n_control
        )
        fit = replace(fit, beta_tall=ifee_res.beta)
    effects, comps = estimate_effects(panel, fit, K)
    return fit, effects, comps, ifee_res


def estimate_panel(
    panel: PanelData,
    r: int | str = "auto",
    K: int | str = "auto",
    B: int = DEFAULT_B,
    alphas: tuple[float, ...] = (0.1, 0.05),
    block_width: int = 1,
    seed: int = 0,
    rmax: int = DEFAULT_RMAX,
    rank_method: str = "baseline",
) -> EstimateResult:
    """Run the full estimation and bootstrap-interval pipeline on a panel.

    ``r`` and ``K`` accept "auto" (information criterion, bandwidth rule) or
    explicit integers.  Bootstrap draws are shared across all requested
    interval levels.
    """
    if B < 100:
        warnings.warn(
            f"B={B} bootstrap draws is low for interval construction",
            stacklevel=2,
        )
    rank_estimate = None
    rank_floored = False
    if r == "auto":
        rank_estimate = choose_rank(
            panel, rmax=rmax, method=rank_method, rng=np.random.default_rng([seed, 7])
        )
        r_used = rank_estimate.r_hat
        if r_used == 0:
            r_used = 1
            rank_floored = True
    else:
        r_used = int(r)
        if r_used < 1:
            raise ValueError("r must be at least 1")
    K_used = default_bandwidth(panel.n_pre) if K == "auto" else int(K)

    report = validate_order_conditions(panel, r_used)
    if not report.passed:
        raise PanelDataError(
            "order conditions fail for r="
            f"{r_used}: tall {report.tall_lhs} > {report.tall_rhs} is {report.tall_ok}, "
            f"wide {report.wide_lhs} > {report.wide_rhs} is {report.wide_ok}"
        )

    fit, effects, comps, ifee_res = fit_panel(panel, r_used, K_used)
    cfg = BootstrapConfig(
        n_draws=B, alpha=min(alphas), block_width=block_width, seed=seed
    )
    draws = bootstrap_statistics(panel, fit, effects, cfg, K_used)
    intervals = {a: build_intervals(effects, draws, a) for a in alphas}
    return EstimateResult(
        panel=panel,
        fit=fit,
        effects=effects,
        components=comps,
        draws=draws,
        intervals=intervals,
        r_used=r_used,
        bandwidth=K_used,
        order_report=report,
        rank_estimate=rank_estimate,
        rank_floored=rank_floored,
        ifee=ifee_res,
    )
