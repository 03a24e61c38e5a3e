"""Synthetic panels for the Monte Carlo coverage study.

Two designs: a pure factor model and a factor model with two correlated
regressors.  Errors are AR(1) per unit with selectable innovation margins
(centered chi-squared or centered uniform, both standardized to unit
variance) and either homoscedastic i.i.d. or heteroscedastic serially
correlated parameters.  A single unit is treated for the last five periods
with a constant unit effect.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .panel import PanelData

__all__ = ["DgpConfig", "DgpDesign", "DgpDraw", "ar1_errors", "generate_dgp"]

MODEL_PURE = "dgp1"
MODEL_COVARIATES = "dgp2"

N_POST = 5  # treated periods appended after the pre-treatment window
N_TREATED = 1
N_COVARIATES = 2

_BURN_IN = 100


@dataclass(frozen=True)
class DgpConfig:
    """Design of one simulated scenario.

    ``error_scale`` multiplies every error (1.0 reproduces the standard
    design; tiny values give a near-noiseless panel).  ``redraw_design``
    controls whether the covariate mixing matrix, slopes, and per-unit error
    parameters are redrawn each replication or held fixed across a study.
    """

    model: str = MODEL_PURE
    n_control: int = 30
    n_pre: int = 20
    error_case: int = 1
    margin: int = 1
    r_true: int = 3
    delta_true: float = 1.0
    seed: int = 0
    error_scale: float = 1.0
    redraw_design: bool = True

    def __post_init__(self) -> None:
        if self.model not in (MODEL_PURE, MODEL_COVARIATES):
            raise ValueError(f"unknown model {self.model!r}")
        if self.error_case not in (1, 2):
            raise ValueError("error_case must be 1 or 2")
        if self.margin not in (1, 2):
            raise ValueError("margin must be 1 or 2")
        if self.n_control < 1 or self.n_pre < 2:
            raise ValueError("need n_control >= 1 and n_pre >= 2")
        if self.r_true < 1:
            raise ValueError("r_true must be positive")

    @property
    def n_units(self) -> int:
        return self.n_control + N_TREATED

    @property
    def n_periods(self) -> int:
        return self.n_pre + N_POST


@dataclass(frozen=True)
class DgpDesign:
    """Per-study parameters that may be held fixed across replications."""

    rho: np.ndarray  # (N,)
    sigma2: np.ndarray  # (N,)
    mixing: np.ndarray | None = None  # (p, p), covariate model only
    beta: np.ndarray | None = None  # (p,), covariate model only


@dataclass(frozen=True)
class DgpDraw:
    """One simulated panel plus the latent quantities behind it."""

    panel: PanelData
    true_effects: np.ndarray  # (T1, N1)
    latent_outcomes: np.ndarray  # (T, N), no treatment applied
    common_component: np.ndarray  # (T, N) factor part
    errors: np.ndarray  # (T, N)
    design: DgpDesign


def _innovations(margin: int, shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Mean-zero unit-variance innovations with the requested margin."""
    if margin == 1:
        return (rng.chisquare(1, size=shape) - 1.0) / np.sqrt(2.0)
    if margin == 2:
        return rng.uniform(-0.5, 0.5, size=shape) * np.sqrt(12.0)
    raise ValueError("margin must be 1 or 2")


def _ar1_matrix(
    rho: np.ndarray,
    sigma2: np.ndarray,
    margin: int,
    n_periods: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """(T, N) errors, column i an AR(1) with coefficient rho[i] and variance sigma2[i]."""
    n_units = rho.shape[0]
    eps = _innovations(margin, (_BURN_IN + n_periods, n_units), rng)
    v = np.zeros(n_units)
    out = np.empty((n_periods, n_units))
    for t in range(_BURN_IN + n_periods):
        v = rho * v + eps[t]
        if t >= _BURN_IN:
            out[t - _BURN_IN] = v
    # stationary AR(1) has variance 1/(1-rho^2); rescale to variance sigma2
    return out * np.sqrt(sigma2 * (1.0 - rho**2))


def ar1_errors(
    rho: float,
    sigma2: float,
    margin: int,
    n_periods: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Error series for one unit: stationary AR(1) scaled to variance ``sigma2``.

    Innovations follow the selected margin (standardized); the recursion is
    burned in for 100 periods before sampling.
    """
    if not abs(rho) < 1:
        raise ValueError("need |rho| < 1")
    return _ar1_matrix(
        np.array([rho]), np.array([sigma2]), margin, n_periods, rng
    )[:, 0]


def _draw_design(cfg: DgpConfig, rng: np.random.Generator) -> DgpDesign:
    N = cfg.n_units
    mixing = beta = None
    if cfg.model == MODEL_COVARIATES:
        mixing = rng.standard_normal((N_COVARIATES, N_COVARIATES))
        beta = rng.standard_normal(N_COVARIATES)
    if cfg.error_case == 1:
        rho = np.zeros(N)
        sig2 = np.ones(N)
    else:
        rho = rng.uniform(0.2, 0.8, size=N) * rng.choice([-1.0, 1.0], size=N)
        sig2 = np.exp(rng.standard_normal(N))
    return DgpDesign(rho=rho, sigma2=sig2, mixing=mixing, beta=beta)


def generate_dgp(
    cfg: DgpConfig,
    rng: np.random.Generator,
    design: DgpDesign | None = None,
) -> DgpDraw:
    """Simulate one panel: factors, loadings, optional covariates, AR(1) errors.

    Draw order within ``rng``: factors, loadings, covariate shocks, design
    parameters (unless supplied), error innovations.  The returned panel has
    the single treated unit in the last column with the constant effect
    added over the last five periods.
    """
    T, N = cfg.n_periods, cfg.n_units
    T0, N0 = cfg.n_pre, cfg.n_control

    factors = rng.standard_normal((T, cfg.r_true))
    loadings = rng.standard_normal((N, cfg.r_true))
    common = factors @ loadings.T

    covariates = None
    z = None
    if cfg.model == MODEL_COVARIATES:
        z = rng.standard_normal((T, N, N_COVARIATES))
    if design is None:
        design = _draw_design(cfg, rng)

    latent = common.copy()
    if cfg.model == MODEL_COVARIATES:
        covariates = z @ design.mixing.T
        latent = latent + covariates @ design.beta

    errors = cfg.error_scale * _ar1_matrix(
        design.rho, design.sigma2, cfg.margin, T, rng
    )
    latent = latent + errors

    mask = np.zeros((T, N), dtype=bool)
    mask[T0:, N0:] = True
    observed = latent + cfg.delta_true * mask

    panel = PanelData(
        outcomes=observed,
        treated_mask=mask,
        n_control=N0,
        n_pre=T0,
        covariates=covariates,
    )
    truth = np.full((T - T0, N - N0), cfg.delta_true)
    return DgpDraw(
        panel=panel,
        true_effects=truth,
        latent_outcomes=latent,
        common_component=common,
        errors=errors,
        design=design,
    )
