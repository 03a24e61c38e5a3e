"""Warp-speed Monte Carlo coverage study.

Every replication simulates a fresh panel, estimates the effects, and draws
exactly one bootstrap statistic per missing-block cell.  Critical values are
the pooled empirical quantiles of those statistics across replications, per
cell and interval family; each replication's intervals combine the pooled
quantiles with its own point estimate and standard error.  Coverage is the
fraction of replications whose interval contains the planted effect.

Replication r derives its generators from the master seeds only, so results
are identical for any execution order or worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bootstrap import BootstrapConfig, bootstrap_statistics, empirical_quantile
from .dgp import DgpConfig, DgpDesign, _draw_design, generate_dgp
from .effects import default_bandwidth
from .exceptions import DegeneracyError, SimulationError
from .pipeline import DEFAULT_RMAX, choose_rank, fit_panel

__all__ = ["CoverageRow", "CoverageTable", "run_coverage_study"]

FACTOR_MODE_KNOWN = "known"
FACTOR_MODE_ESTIMATED = "estimated"

MAX_FAILURE_RATE = 0.01

_DESIGN_TAG = 20
_DGP_TAG = 21
_BOOT_TAG = 31


@dataclass(frozen=True)
class CoverageRow:
    """Empirical coverage of one (level, family, post-treatment period) cell."""

    dgp: str
    case: int
    margin: int
    n_pre: int
    n_control: int
    factor_mode: str
    alpha: float
    family: str  # "eq" | "sy"
    period_offset: int  # 1-based periods after the intervention
    coverage_pct: float


@dataclass(frozen=True)
class CoverageTable:
    rows: tuple[CoverageRow, ...]
    reps: int
    failures: int
    metadata: dict


def _rep_boot_seed(master: int, rep: int) -> int:
    return int(np.random.SeedSequence([master, _BOOT_TAG, rep]).generate_state(1, np.uint64)[0])


def _run_replication(
    rep: int,
    cfg: DgpConfig,
    boot: BootstrapConfig,
    factor_mode: str,
    design: DgpDesign | None,
    rmax: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict]:
    """One warp-speed replication: (delta, se, one bootstrap stat) per block cell."""
    rng = np.random.default_rng([cfg.seed, _DGP_TAG, rep])
    draw = generate_dgp(cfg, rng, design)
    panel = draw.panel
    info = {"ifee_nonconverged": 0, "rank_floored": 0, "r_hat": cfg.r_true}

    if factor_mode == FACTOR_MODE_ESTIMATED:
        est = choose_rank(panel, rmax=rmax)
        r = est.r_hat
        info["r_hat"] = r
        if r == 0:
            r = 1
            info["rank_floored"] = 1
    else:
        r = cfg.r_true

    K = default_bandwidth(panel.n_pre)
    fit, effects, _, ifee_res = fit_panel(panel, r, K)
    if ifee_res is not None and not ifee_res.converged:
        info["ifee_nonconverged"] = 1

    rep_cfg = BootstrapConfig(
        n_draws=1,
        alpha=boot.alpha,
        block_width=boot.block_width,
        seed=_rep_boot_seed(boot.seed, rep),
    )
    draws = bootstrap_statistics(panel, fit, effects, rep_cfg, K)
    # single treated unit: flatten the block to a per-period vector
    return (
        effects.delta[:, 0].copy(),
        effects.std_err[:, 0].copy(),
        draws.stats[0, :, 0].copy(),
        info,
    )


def run_coverage_study(
    cfg: DgpConfig,
    boot: BootstrapConfig,
    reps: int,
    factor_mode: str = FACTOR_MODE_KNOWN,
    alphas: Sequence[float] = (0.1, 0.05),
    rmax: int = DEFAULT_RMAX,
    workers: int = 1,
) -> CoverageTable:
    """Replicate the design ``reps`` times and tabulate interval coverage.

    Raises
    ------
    SimulationError
        If more than 1% of replications fail with a numerical degeneracy.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    if factor_mode not in (FACTOR_MODE_KNOWN, FACTOR_MODE_ESTIMATED):
        raise ValueError(f"unknown factor_mode {factor_mode!r}")

    design = None
    if not cfg.redraw_design:
        design = _draw_design(cfg, np.random.default_rng([cfg.seed, _DESIGN_TAG]))

    n_post = cfg.n_periods - cfg.n_pre
    deltas = np.full((reps, n_post), np.nan)
    ses = np.full((reps, n_post), np.nan)
    stats = np.full((reps, n_post), np.nan)
    ok = np.zeros(reps, dtype=bool)
    nonconverged = np.zeros(reps, dtype=bool)
    floored = np.zeros(reps, dtype=bool)
    r_hats = np.full(reps, -1, dtype=int)

    # each replication writes only its own slots, so any execution order and
    # worker count produce identical results
    def work(rep: int) -> None:
        try:
            d, s, st, info = _run_replication(rep, cfg, boot, factor_mode, design, rmax)
        except (DegeneracyError, np.linalg.LinAlgError):
            return
        deltas[rep], ses[rep], stats[rep] = d, s, st
        ok[rep] = True
        nonconverged[rep] = bool(info["ifee_nonconverged"])
        floored[rep] = bool(info["rank_floored"])
        r_hats[rep] = info["r_hat"]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, range(reps)))
    else:
        for rep in range(reps):
            work(rep)

    failures = int(reps - ok.sum())
    if failures > MAX_FAILURE_RATE * reps:
        raise SimulationError(
            f"{failures} of {reps} replications failed (> {MAX_FAILURE_RATE:.0%})"
        )

    rows: list[CoverageRow] = []
    d_ok, s_ok, st_ok = deltas[ok], ses[ok], stats[ok]
    for alpha in alphas:
        for k in range(n_post):
            pooled = st_ok[:, k]
            q_lo = empirical_quantile(pooled, alpha / 2.0)
            q_hi = empirical_quantile(pooled, 1.0 - alpha / 2.0)
            p = empirical_quantile(np.abs(pooled), 1.0 - alpha)
            lo_eq = d_ok[:, k] + q_lo * s_ok[:, k]
            hi_eq = d_ok[:, k] + q_hi * s_ok[:, k]
            cover_eq = np.mean((lo_eq <= cfg.delta_true) & (cfg.delta_true <= hi_eq))
            cover_sy = np.mean(np.abs(d_ok[:, k] - cfg.delta_true) <= p * s_ok[:, k])
            for family, cov in (("eq", cover_eq), ("sy", cover_sy)):
                rows.append(
                    CoverageRow(
                        dgp=cfg.model,
                        case=cfg.error_case,
                        margin=cfg.margin,
                        n_pre=cfg.n_pre,
                        n_control=cfg.n_control,
                        factor_mode=factor_mode,
                        alpha=alpha,
                        family=family,
                        period_offset=k + 1,
                        coverage_pct=float(100.0 * cov),
                    )
                )

    metadata = {
        "reps": reps,
        "failures": failures,
        "ifee_nonconverged": int(nonconverged.sum()),
        "rank_floored": int(floored.sum()),
        "mean_r_hat": float(r_hats[ok].mean()) if ok.any() else None,
        "dgp_seed": cfg.seed,
        "bootstrap_seed": boot.seed,
        "block_width": boot.block_width,
        "factor_mode": factor_mode,
    }
    return CoverageTable(rows=tuple(rows), reps=reps, failures=failures, metadata=metadata)
