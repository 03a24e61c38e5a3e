"""Command-line interface.

Thin client over the same handlers the HTTP service exposes: ``estimate``
reads a long-format CSV and writes effects.csv / fit.json / effects.svg;
``simulate`` runs a coverage study from a JSON config and writes
coverage.csv; ``serve`` starts the HTTP service.

Exit codes: 0 success, 2 input or schema error, 3 numerical degeneracy,
4 simulation failure rate exceeded.
"""

from __future__ import annotations

import argparse
import json
import sys

from .bootstrap import BootstrapConfig
from .config import RunConfig, load_config, merge_overrides
from .dgp import DgpConfig
from .emit import write_coverage_csv, write_estimate_outputs
from .exceptions import ConfigError, DegeneracyError, PanelDataError, SimulationError
from .panel import read_panel_csv
from .pipeline import estimate_panel
from .plotting import emit_plot
from .study import run_coverage_study

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERACY = 3
EXIT_SIMULATION = 4


def _parse_r(value: str) -> int | str:
    return value if value == "auto" else int(value)


def _parse_alphas(value: str) -> list[float]:
    return [float(tok) for tok in value.split(",") if tok]


def _parse_covariates(value: str) -> list[str]:
    return [tok for tok in value.split(",") if tok]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ife",
        description="Treatment-effect estimation on panels via factor-based "
        "matrix completion, with bootstrap confidence intervals.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate effects from a long-format CSV")
    est.add_argument("--input", help="panel CSV with header unit,time,y,treated[,x...]")
    est.add_argument("--output", help="output directory")
    est.add_argument("--config", help="JSON config file; flags override its fields")
    est.add_argument("--r", type=_parse_r, default=None, help="number of factors or 'auto'")
    est.add_argument("--K", type=_parse_r, default=None, help="variance bandwidth or 'auto'")
    est.add_argument("--B", type=int, default=None, help="bootstrap draws")
    est.add_argument("--alpha", type=_parse_alphas, default=None, help="comma-separated levels, e.g. 0.1,0.05")
    est.add_argument("--block-width", type=int, default=None, help="wild-bootstrap block width")
    est.add_argument("--covariates", type=_parse_covariates, default=None, help="comma-separated covariate column names")
    est.add_argument("--seed", type=int, default=None, help="bootstrap seed")

    sim = sub.add_parser("simulate", help="run a Monte Carlo coverage study")
    sim.add_argument("--config", required=True, help="JSON study config")
    sim.add_argument("--output", help="output directory")
    sim.add_argument("--seed", type=int, default=None, help="override the study seed")

    srv = sub.add_parser("serve", help="start the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    return parser


def _fail(code: str, message: str, status: int) -> int:
    record = {"error": code, "message": message}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return status


def cmd_estimate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg = merge_overrides(
        cfg,
        command="estimate",
        input_path=args.input,
        output_dir=args.output,
        r=args.r,
        bandwidth=args.K,
        n_draws=args.B,
        alpha=args.alpha,
        block_width=args.block_width,
        covariates=args.covariates,
        seed=args.seed,
    )
    if not cfg.input_path:
        raise ConfigError("no input CSV given (--input or config input_path)")
    if not cfg.output_dir:
        raise ConfigError("no output directory given (--output or config output_dir)")

    panel = read_panel_csv(cfg.input_path, covariate_columns=cfg.covariates)
    result = estimate_panel(
        panel,
        r=cfg.r,
        K=cfg.bandwidth,
        B=cfg.n_draws,
        alphas=tuple(cfg.alpha),
        block_width=cfg.effective_block_width(),
        seed=cfg.seed,
        rmax=cfg.rmax,
    )
    svg = emit_plot(result, family="eq", alpha=cfg.alpha[0])
    paths = write_estimate_outputs(
        result, cfg.output_dir, cfg.alpha, cfg.n_draws, cfg.seed, svg_text=svg
    )
    print(f"wrote {paths['effects']}, {paths['fit']}, {paths['plot']}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    cfg = merge_overrides(
        cfg, command="simulate", output_dir=args.output, seed=args.seed
    )
    if not cfg.output_dir:
        raise ConfigError("no output directory given (--output or config output_dir)")

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
        block_width=cfg.effective_block_width(),
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
    path = write_coverage_csv(table, cfg.output_dir)
    print(f"wrote {path} ({table.reps} replications, {table.failures} failures)")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "estimate":
            return cmd_estimate(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        return cmd_serve(args)
    except (PanelDataError, ConfigError, OSError) as exc:
        return _fail("schema", str(exc), EXIT_INPUT)
    except DegeneracyError as exc:
        return _fail("degeneracy", str(exc), EXIT_DEGENERACY)
    except SimulationError as exc:
        return _fail("simulation", str(exc), EXIT_SIMULATION)


if __name__ == "__main__":
    sys.exit(main())
