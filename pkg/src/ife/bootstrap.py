"""Wild-bootstrap confidence intervals for the estimated effects.

Each draw rebuilds a synthetic panel from the completed matrix plus
resampled errors (sign-randomized residuals on observed cells, donor draws
from demeaned pre-treatment residuals on the missing block), refits the pure
factor completion, and records the studentized discrepancy at every missing
cell.  Empirical quantiles of those statistics calibrate equal-tailed and
symmetric intervals.

Reproducibility contract: draw d, attempt a uses the generator seeded with
``[seed, 101, d, a]``; inside a draw the multipliers are drawn before the
donor indices.  Results are therefore identical for any execution order or
degree of parallelism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .effects import EffectEstimates, block_variances
from .exceptions import DegeneracyError
from .factors import CompletionFit, complete_matrix, pca_factors
from .panel import PanelData

__all__ = [
    "BootstrapConfig",
    "BootstrapDraws",
    "IntervalSet",
    "draw_multipliers",
    "resample_errors",
    "bootstrap_statistics",
    "empirical_quantile",
    "build_intervals",
]

_STREAM_TAG = 101  # namespaces bootstrap substreams under the user seed


@dataclass(frozen=True)
class BootstrapConfig:
    """Resampling parameters; block_width=1 is the ordinary wild bootstrap."""

    n_draws: int
    alpha: float = 0.05
    block_width: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_draws < 1:
            raise ValueError("n_draws must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.block_width < 1:
            raise ValueError("block_width must be at least 1")


@dataclass(frozen=True)
class BootstrapDraws:
    """Studentized statistics per draw over the missing block: shape (B, T1, N1)."""

    stats: np.ndarray
    diagnostics: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class IntervalSet:
    """Equal-tailed and symmetric intervals plus the quantiles behind them.

    All arrays are (T1, N1) over the missing block.  The symmetric interval
    is centered at the point estimate by construction.
    """

    alpha: float
    eq_lower: np.ndarray
    eq_upper: np.ndarray
    sy_lower: np.ndarray
    sy_upper: np.ndarray
    q_lower: np.ndarray
    q_upper: np.ndarray
    p_abs: np.ndarray


def draw_multipliers(
    n_periods: int, n_units: int, block_width: int, rng: np.random.Generator
) -> np.ndarray:
    """Standard-normal multipliers, one per (unit, time block).

    With block_width=1 every cell gets an independent draw; otherwise blocks
    of consecutive periods share a draw, tiled from the first period with a
    possibly short final block.
    """
    if block_width < 1:
        raise ValueError("block_width must be at least 1")
    n_blocks = math.ceil(n_periods / block_width)
    u = rng.standard_normal((n_blocks, n_units))
    return np.repeat(u, block_width, axis=0)[:n_periods]


def resample_errors(
    residuals: np.ndarray,
    multipliers: np.ndarray,
    panel: PanelData,
    rng: np.random.Generator,
) -> np.ndarray:
    """Bootstrap error matrix on every cell of the panel.

    Observed cells get multiplier-scaled residuals; missing-block cells get
    i.i.d. draws from the owning unit's demeaned pre-treatment residuals.
    """
    T0, N0 = panel.n_pre, panel.n_control
    e_star = residuals * multipliers
    donors = residuals[:T0, N0:]
    donors = donors - donors.mean(axis=0, keepdims=True)
    T1, N1 = panel.n_post, panel.n_treated
    idx = rng.integers(0, T0, size=(T1, N1))
    e_star[T0:, N0:] = np.take_along_axis(donors, idx, axis=0)
    return e_star


def _refit_statistics(
    y_star: np.ndarray, n_pre: int, n_control: int, r: int, K: int
) -> np.ndarray:
    """Refit the pure factor completion on a bootstrap panel; studentized block stats."""
    T0, N0 = n_pre, n_control
    tall = pca_factors(y_star[:, :N0], r)
    wide = pca_factors(y_star[:T0, :], r)
    fit = complete_matrix(tall, wide, N0)
    resid = y_star - fit.completed
    comps = block_variances(resid, tall.factors, wide.loadings, T0, N0, K)
    num = fit.completed[T0:, N0:] - y_star[T0:, N0:]
    return num / np.sqrt(comps.v_hat + comps.sigma2[None, :])


def bootstrap_statistics(
    panel: PanelData,
    fit: CompletionFit,
    effects: EffectEstimates,
    cfg: BootstrapConfig,
    K: int,
) -> BootstrapDraws:
    """Generate the studentized bootstrap statistics for every missing-block cell.

    The resample path always refits the pure factor model, regardless of how
    the original fit was produced; covariates never enter a draw.  A draw
    whose completion degenerates is redrawn once; a second failure aborts.
    """
    T, N = panel.n_periods, panel.n_units
    T0, N0 = panel.n_pre, panel.n_control
    r = fit.tall_fit.rank
    resid = effects.residuals

    stats = np.empty((cfg.n_draws, panel.n_post, panel.n_treated))
    redraws = 0
    for d in range(cfg.n_draws):
        last_err: DegeneracyError | None = None
        for attempt in (0, 1):
            rng = np.random.default_rng([cfg.seed, _STREAM_TAG, d, attempt])
            u = draw_multipliers(T, N, cfg.block_width, rng)
            e_star = resample_errors(resid, u, panel, rng)
            y_star = fit.completed + e_star
            try:
                stats[d] = _refit_statistics(y_star, T0, N0, r, K)
                last_err = None
                break
            except DegeneracyError as err:
                last_err = err
                redraws += 1
        if last_err is not None:
            raise DegeneracyError(
                f"bootstrap draw {d} degenerated twice: {last_err}"
            ) from last_err
    if not np.isfinite(stats).all():
        raise DegeneracyError("non-finite bootstrap statistic")
    return BootstrapDraws(stats=stats, diagnostics={"degenerate_redraws": redraws})


def empirical_quantile(values: np.ndarray, level: float) -> float:
    """Order-statistic quantile: the ceil(level*B)-th smallest value."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("empty sample")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    k = min(max(math.ceil(level * v.size), 1), v.size)
    return float(np.partition(v, k - 1)[k - 1])


def _column_quantiles(stats: np.ndarray, level: float) -> np.ndarray:
    """empirical_quantile applied along the draw axis of a (B, T1, N1) array."""
    B = stats.shape[0]
    k = min(max(math.ceil(level * B), 1), B)
    return np.partition(stats, k - 1, axis=0)[k - 1]


def build_intervals(
    effects: EffectEstimates, draws: BootstrapDraws, alpha: float
) -> IntervalSet:
    """Equal-tailed and symmetric intervals at level 1 - alpha for every block cell."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    stats = draws.stats
    q_lo = _column_quantiles(stats, alpha / 2.0)
    q_hi = _column_quantiles(stats, 1.0 - alpha / 2.0)
    p = _column_quantiles(np.abs(stats), 1.0 - alpha)
    d, se = effects.delta, effects.std_err
    return IntervalSet(
        alpha=alpha,
        eq_lower=d + q_lo * se,
        eq_upper=d + q_hi * se,
        sy_lower=d - p * se,
        sy_upper=d + p * se,
        q_lower=q_lo,
        q_upper=q_hi,
        p_abs=p,
    )
