"""HTTP service exposing estimation and simulation over JSON.

Wraps the same pipeline the CLI uses.  POST /estimate takes long-format
records plus options and returns per-cell effects with intervals; POST
/simulate runs a coverage study and returns the table rows.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .bootstrap import BootstrapConfig
from .config import RunConfig
from .dgp import DgpConfig
from .emit import fit_json_payload, treated_cells
from .exceptions import ConfigError, DegeneracyError, PanelDataError, SimulationError
from .panel import Observation, build_panel
from .pipeline import estimate_panel
from .study import run_coverage_study

__all__ = ["app"]

app = FastAPI(title="ife", version=__version__)


class RecordIn(BaseModel):
    unit: str
    time: str
    y: float
    treated: bool
    x: list[float] = Field(default_factory=list)


class EstimateOptions(BaseModel):
    r: int | str = "auto"
    K: int | str = "auto"
    B: int = Field(default=399, ge=1)
    alpha: list[float] = Field(default_factory=lambda: [0.1, 0.05])
    block_width: int = Field(default=1, ge=1)
    seed: int = 0
    rmax: int = Field(default=8, ge=0)


class EstimateRequest(BaseModel):
    records: list[RecordIn]
    options: EstimateOptions = Field(default_factory=EstimateOptions)


class IntervalOut(BaseModel):
    eq: tuple[float, float]
    sy: tuple[float, float]


class EffectOut(BaseModel):
    unit: str
    time: str
    delta_hat: float
    std_err: float
    intervals: dict[str, IntervalOut]  # keyed by confidence level in percent


class EstimateResponse(BaseModel):
    effects: list[EffectOut]
    fit: dict


class SimulateRequest(BaseModel):
    study: RunConfig


class CoverageRowOut(BaseModel):
    dgp: str
    case: int
    margin: int
    T0: int
    N0: int
    factor_mode: str
    alpha: float
    family: str
    period_offset: int
    coverage_pct: float


class SimulateResponse(BaseModel):
    rows: list[CoverageRowOut]
    reps: int
    failures: int
    metadata: dict


def _level_key(alpha: float) -> str:
    return f"{100.0 * (1.0 - alpha):g}"


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/estimate", response_model=EstimateResponse)
def estimate(req: EstimateRequest) -> EstimateResponse:
    try:
        panel = build_panel(
            Observation(r.unit, r.time, r.y, r.treated, tuple(r.x)) for r in req.records
        )
        opt = req.options
        result = estimate_panel(
            panel,
            r=opt.r,
            K=opt.K,
            B=opt.B,
            alphas=tuple(opt.alpha),
            block_width=opt.block_width,
            seed=opt.seed,
            rmax=opt.rmax,
        )
    except (PanelDataError, ConfigError, ValueError) as exc:
        raise HTTPException(status_code=422, detail={"error": "schema", "message": str(exc)})
    except DegeneracyError as exc:
        raise HTTPException(status_code=409, detail={"error": "degeneracy", "message": str(exc)})

    effects = []
    for unit, time, k, j in treated_cells(result):
        ivs = {}
        for a in opt.alpha:
            iv = result.intervals[a]
            ivs[_level_key(a)] = IntervalOut(
                eq=(float(iv.eq_lower[k, j]), float(iv.eq_upper[k, j])),
                sy=(float(iv.sy_lower[k, j]), float(iv.sy_upper[k, j])),
            )
        effects.append(
            EffectOut(
                unit=unit,
                time=time,
                delta_hat=float(result.effects.delta[k, j]),
                std_err=float(result.effects.std_err[k, j]),
                intervals=ivs,
            )
        )
    return EstimateResponse(
        effects=effects, fit=fit_json_payload(result, opt.alpha, opt.B, opt.seed)
    )


@app.post("/simulate", response_model=SimulateResponse)
def simulate(req: SimulateRequest) -> SimulateResponse:
    cfg = req.study
    try:
        dgp_cfg = DgpConfig(
            model=cfg.dgp,
            n_control=cfg.n_control,
            n_pre=cfg.n_pre,
            error_case=cfg.case,
            margin=cfg.margin,
            r_true=cfg.r_true,
            delta_true=cfg.delta_true,
            seed=cfg.seed,
            error_scale=cfg.error_scale,
            redraw_design=cfg.redraw_design,
        )
        boot = BootstrapConfig(
            n_draws=1,
            alpha=min(cfg.alpha),
            block_width=4 if cfg.block_width is None and cfg.case == 2 else (cfg.block_width or 1),
            seed=cfg.seed,
        )
        table = run_coverage_study(
            dgp_cfg,
            boot,
            reps=cfg.reps,
            factor_mode=cfg.factor_mode,
            alphas=tuple(cfg.alpha),
            rmax=cfg.rmax,
            workers=cfg.workers,
        )
    except (ConfigError, ValueError) as exc:
        raise HTTPException(status_code=422, detail={"error": "schema", "message": str(exc)})
    except DegeneracyError as exc:
        raise HTTPException(status_code=409, detail={"error": "degeneracy", "message": str(exc)})
    except SimulationError as exc:
        raise HTTPException(status_code=409, detail={"error": "simulation", "message": str(exc)})

    rows = [
        CoverageRowOut(
            dgp=r.dgp,
            case=r.case,
            margin=r.margin,
            T0=r.n_pre,
            N0=r.n_control,
            factor_mode=r.factor_mode,
            alpha=r.alpha,
            family=r.family,
            period_offset=r.period_offset,
            coverage_pct=r.coverage_pct,
        )
        for r in table.rows
    ]
    return SimulateResponse(
        rows=rows, reps=table.reps, failures=table.failures, metadata=table.metadata
    )
