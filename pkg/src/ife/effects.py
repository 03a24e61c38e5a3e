"""Treatment-effect point estimates and their variance components.

Residuals from the completed matrix feed three pieces of the per-cell
standard error: a Bartlett-kernel long-run covariance of factor-weighted
pre-treatment residuals (per treated unit), a cross-sectional loading-weighted
residual second moment (per post-treatment period), and the raw pre-treatment
residual variance of the treated unit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegeneracyError
from .factors import CompletionFit
from .panel import PanelData

__all__ = [
    "VarianceComponents",
    "EffectEstimates",
    "compute_residuals",
    "default_bandwidth",
    "bartlett_weights",
    "long_run_phi",
    "gamma_t",
    "variance_vhat",
    "sigma2",
    "block_variances",
    "estimate_effects",
]


@dataclass(frozen=True)
class VarianceComponents:
    """Per-cell variance pieces over the missing block.

    Arrays over the block are indexed [time_offset, unit_offset], where
    offsets count from the first post-treatment period and first treated
    unit.  ``clamped`` counts cells where roundoff produced a small negative
    variance that was clamped to zero.
    """

    gamma_t: np.ndarray  # (T1, r, r)
    phi_i: np.ndarray  # (N1, r, r)
    bandwidth: int
    v_hat: np.ndarray  # (T1, N1)
    sigma2: np.ndarray  # (N1,)
    clamped: int = 0


@dataclass(frozen=True)
class EffectEstimates:
    """Point estimates and standard errors on the missing block.

    ``residuals`` is the full (T, N) residual matrix, NaN on the missing
    block where no residual is defined.  ``pre_intervention`` flags block
    cells whose observed treatment indicator is still 0 (late adopters):
    the counterfactual and delta are reported there but the cell carries no
    realized effect.
    """

    delta: np.ndarray  # (T1, N1)
    std_err: np.ndarray  # (T1, N1)
    residuals: np.ndarray  # (T, N), NaN on the missing block
    pre_intervention: np.ndarray  # (T1, N1) bool


def compute_residuals(panel: PanelData, fit: CompletionFit) -> np.ndarray:
    """Observed-cell residuals: outcome minus completion (minus X @ beta if present).

    Returns a (T, N) matrix with NaN on the missing block.
    """
    if fit.completed.shape != panel.outcomes.shape:
        raise ValueError("completion shape does not match panel")
    if fit.beta_tall is not None and panel.covariates is None:
        raise ValueError("fit carries beta but panel has no covariates")
    resid = panel.outcomes - fit.completed
    if fit.beta_tall is not None:
        resid = resid - panel.covariates @ fit.beta_tall
    resid[panel.n_pre :, panel.n_control :] = np.nan
    return resid


def default_bandwidth(n_pre: int) -> int:
    """Truncation lag for the long-run covariance: max(1, floor(4*(T0/100)^(2/9)))."""
    if n_pre < 2:
        raise ValueError("need at least two pre-treatment periods")
    return max(1, int(np.floor(4.0 * (n_pre / 100.0) ** (2.0 / 9.0))))


def bartlett_weights(K: int) -> np.ndarray:
    """Kernel weights (1 - k/(K+1)) for lags k = 0..K."""
    k = np.arange(K + 1)
    return 1.0 - k / (K + 1.0)


def long_run_phi(f_tall: np.ndarray, resid_i: np.ndarray, K: int) -> np.ndarray:
    """Bartlett long-run covariance of factor-weighted residuals for one unit.

    Parameters
    ----------
    f_tall : (T0, r) ndarray
        Pre-treatment rows of the tall factor matrix.
    resid_i : (T0,) ndarray
        Pre-treatment residuals of the unit.
    K : int
        Truncation lag, 0 <= K < T0.
    """
    f = np.asarray(f_tall, dtype=float)
    e = np.asarray(resid_i, dtype=float)
    T0 = e.shape[0]
    if f.shape[0] != T0:
        raise ValueError("factor rows and residual length differ")
    if not 0 <= K < T0:
        raise ValueError(f"bandwidth K={K} out of range for T0={T0}")
    g = f * e[:, None]  # rows: resid-weighted factor vectors
    phi = (g.T @ g) / T0
    w = bartlett_weights(K)
    for k in range(1, K + 1):
        L_k = (g[k:].T @ g[:-k]) / T0
        phi = phi + w[k] * (L_k + L_k.T)
    return 0.5 * (phi + phi.T)


def gamma_t(lambda_wide: np.ndarray, resid_col_t: np.ndarray) -> np.ndarray:
    """Cross-sectional loading outer-product moment at one period.

    ``resid_col_t`` holds the residuals of the control units at that period;
    only the matching leading rows of ``lambda_wide`` are used.
    """
    n0 = resid_col_t.shape[0]
    lam = lambda_wide[:n0]
    weighted = lam * resid_col_t[:, None]
    return (weighted.T @ weighted) / n0


def variance_vhat(
    f_tall_t: np.ndarray,
    lambda_wide_i: np.ndarray,
    tall_factor_gram: np.ndarray,
    wide_loading_gram: np.ndarray,
    phi_i: np.ndarray,
    gamma: np.ndarray,
    n_pre: int,
    n_control: int,
) -> float:
    """Two-sandwich variance of one completed cell.

    ``tall_factor_gram`` is tall factors' normalized Gram (F'F/T);
    ``wide_loading_gram`` is the wide loadings' normalized Gram (L'L/N).
    Tiny negative results from roundoff are clamped to zero by the caller.
    """
    a = np.linalg.solve(tall_factor_gram, f_tall_t)
    b = np.linalg.solve(wide_loading_gram, lambda_wide_i)
    return float(a @ phi_i @ a) / n_pre + float(b @ gamma @ b) / n_control


def sigma2(resid_i: np.ndarray) -> float:
    """Mean squared pre-treatment residual of one treated unit (no demeaning)."""
    e = np.asarray(resid_i, dtype=float)
    return float(e @ e) / e.shape[0]


def block_variances(
    resid: np.ndarray,
    tall_factors: np.ndarray,
    wide_loadings: np.ndarray,
    n_pre: int,
    n_control: int,
    K: int,
) -> VarianceComponents:
    """Assemble all variance pieces over the missing block.

    ``resid`` is the (T, N) residual matrix (its missing-block entries are
    ignored); factors come from the tall fit, loadings from the wide fit.
    """
    T, N = resid.shape
    T0, N0 = n_pre, n_control
    T1, N1 = T - T0, N - N0
    F, L = tall_factors, wide_loadings
    r = F.shape[1]
    f_gram = (F.T @ F) / T
    l_gram = (L.T @ L) / N
    for name, g in (("factor", f_gram), ("loading", l_gram)):
        s = np.linalg.svd(g, compute_uv=False)
        if s[0] <= 0 or s[-1] / s[0] < 1e-12:
            raise DegeneracyError(f"normalized {name} Gram matrix is singular")

    gammas = np.empty((T1, r, r))
    for k in range(T1):
        gammas[k] = gamma_t(L, resid[T0 + k, :N0])

    phis = np.empty((N1, r, r))
    sig2 = np.empty(N1)
    f_pre = F[:T0]
    for j in range(N1):
        e_pre = resid[:T0, N0 + j]
        phis[j] = long_run_phi(f_pre, e_pre, K)
        sig2[j] = sigma2(e_pre)

    clamped = 0
    v_hat = np.empty((T1, N1))
    for k in range(T1):
        for j in range(N1):
            v = variance_vhat(
                F[T0 + k], L[N0 + j], f_gram, l_gram, phis[j], gammas[k], T0, N0
            )
            if v < 0:
                clamped += 1
                v = 0.0
            v_hat[k, j] = v

    return VarianceComponents(
        gamma_t=gammas,
        phi_i=phis,
        bandwidth=K,
        v_hat=v_hat,
        sigma2=sig2,
        clamped=clamped,
    )


def estimate_effects(
    panel: PanelData, fit: CompletionFit, K: int
) -> tuple[EffectEstimates, VarianceComponents]:
    """Point estimates, variance components and standard errors on the missing block.

    The delta at each block cell is the observed outcome minus the completed
    counterfactual (minus the covariate contribution when the fit carries a
    beta).  The squared standard error is the cell variance plus the treated
    unit's pre-treatment residual variance.
    """
    T0, N0 = panel.n_pre, panel.n_control
    resid = compute_residuals(panel, fit)
    comps = block_variances(
        resid, fit.tall_fit.factors, fit.wide_fit.loadings, T0, N0, K
    )

    delta = panel.outcomes[T0:, N0:] - fit.completed[T0:, N0:]
    if fit.beta_tall is not None:
        delta = delta - panel.covariates[T0:, N0:] @ fit.beta_tall
    std_err = np.sqrt(comps.v_hat + comps.sigma2[None, :])

    effects = EffectEstimates(
        delta=delta,
        std_err=std_err,
        residuals=resid,
        pre_intervention=~panel.treated_mask[T0:, N0:],
    )
    return effects, comps
