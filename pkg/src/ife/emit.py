"""Result serialization: effects CSV, fit JSON, coverage CSV.

All writers are deterministic for a fixed result (stable field order, fixed
float formatting, LF line endings) and atomic (temp file in the target
directory, then rename).
"""

from __future__ import annotations

import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterator

import numpy as np

from .pipeline import EstimateResult
from .study import CoverageTable

__all__ = [
    "atomic_write_text",
    "treated_cells",
    "effects_csv_text",
    "fit_json_payload",
    "coverage_csv_text",
    "write_estimate_outputs",
    "write_coverage_csv",
]


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def treated_cells(result: EstimateResult) -> Iterator[tuple[str, str, int, int]]:
    """(unit_label, time_label, block_row, block_col) for cells actually treated.

    Enumerates unit-major; block cells where the treatment indicator is 0
    (late adopters inside the block) are skipped.
    """
    panel = result.panel
    for j in range(panel.n_treated):
        unit = panel.unit_labels[panel.n_control + j]
        for k in range(panel.n_post):
            if panel.treated_mask[panel.n_pre + k, panel.n_control + j]:
                yield unit, panel.time_labels[panel.n_pre + k], k, j


def _level_tag(alpha: float) -> str:
    level = 100.0 * (1.0 - alpha)
    return str(int(round(level))) if abs(level - round(level)) < 1e-9 else _fmt(level)


def effects_csv_text(result: EstimateResult, alphas: list[float]) -> str:
    """CSV of per-cell estimates and intervals; one row per treated cell.

    With a single level the interval columns are eq_lo, eq_hi, sy_lo, sy_hi;
    with several they are suffixed by the confidence level in percent,
    e.g. eq_lo_90.
    """
    buf = io.StringIO()
    header = ["unit", "time", "delta_hat", "std_err"]
    suffixes = [""] if len(alphas) == 1 else [f"_{_level_tag(a)}" for a in alphas]
    for sfx in suffixes:
        header += [f"eq_lo{sfx}", f"eq_hi{sfx}", f"sy_lo{sfx}", f"sy_hi{sfx}"]
    buf.write(",".join(header) + "\n")
    for unit, time, k, j in treated_cells(result):
        row = [
            unit,
            time,
            _fmt(result.effects.delta[k, j]),
            _fmt(result.effects.std_err[k, j]),
        ]
        for a in alphas:
            iv = result.intervals[a]
            row += [
                _fmt(iv.eq_lower[k, j]),
                _fmt(iv.eq_upper[k, j]),
                _fmt(iv.sy_lower[k, j]),
                _fmt(iv.sy_upper[k, j]),
            ]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def fit_json_payload(result: EstimateResult, alphas: list[float], B: int, seed: int) -> dict:
    """Machine-readable fit summary: rank, bandwidth, alignment, diagnostics."""
    panel = result.panel
    payload = {
        "r": result.r_used,
        "r_estimated": result.rank_estimate is not None,
        "K": result.bandwidth,
        "B": B,
        "alpha": alphas,
        "seed": seed,
        "h_miss": [[float(v) for v in row] for row in result.fit.h_miss],
        "beta": None
        if result.fit.beta_tall is None
        else [float(v) for v in result.fit.beta_tall],
        "order_conditions": {
            "tall": [result.order_report.tall_lhs, result.order_report.tall_rhs],
            "wide": [result.order_report.wide_lhs, result.order_report.wide_rhs],
            "passed": result.order_report.passed,
        },
        "panel": {
            "n_units": panel.n_units,
            "n_periods": panel.n_periods,
            "n_control": panel.n_control,
            "n_pre": panel.n_pre,
            "treated_units": list(panel.unit_labels[panel.n_control :]),
        },
        "diagnostics": {
            "clamped_variances": result.components.clamped,
            "degenerate_redraws": result.draws.diagnostics.get("degenerate_redraws", 0),
            "rank_floored": result.rank_floored,
            "pre_intervention_cells": int(result.effects.pre_intervention.sum()),
            "ifee": None
            if result.ifee is None
            else {
                "iterations": result.ifee.iterations,
                "converged": result.ifee.converged,
                "final_step": float(result.ifee.final_step),
            },
        },
    }
    if result.rank_estimate is not None:
        payload["rank_criterion"] = {
            "method": result.rank_estimate.method,
            "r_hat": result.rank_estimate.r_hat,
            "values": [
                None if not np.isfinite(v) else float(v)
                for v in result.rank_estimate.criterion_values
            ],
        }
    return payload


def coverage_csv_text(table: CoverageTable) -> str:
    """Coverage table as CSV, one row per (level, family, period) cell."""
    buf = io.StringIO()
    buf.write(
        "dgp,case,margin,T0,N0,factor_mode,alpha,family,period_offset,"
        "coverage_pct,reps,failures\n"
    )
    for row in table.rows:
        buf.write(
            ",".join(
                [
                    row.dgp,
                    str(row.case),
                    str(row.margin),
                    str(row.n_pre),
                    str(row.n_control),
                    row.factor_mode,
                    _fmt(row.alpha),
                    row.family,
                    str(row.period_offset),
                    f"{row.coverage_pct:.2f}",
                    str(table.reps),
                    str(table.failures),
                ]
            )
            + "\n"
        )
    return buf.getvalue()


def write_estimate_outputs(
    result: EstimateResult,
    out_dir: str | Path,
    alphas: list[float],
    B: int,
    seed: int,
    svg_text: str | None = None,
) -> dict[str, Path]:
    """Write effects.csv, fit.json, and optionally effects.svg; returns the paths."""
    out_dir = Path(out_dir)
    paths = {
        "effects": out_dir / "effects.csv",
        "fit": out_dir / "fit.json",
    }
    atomic_write_text(paths["effects"], effects_csv_text(result, alphas))
    atomic_write_text(
        paths["fit"],
        json.dumps(fit_json_payload(result, alphas, B, seed), indent=2, sort_keys=True)
        + "\n",
    )
    if svg_text is not None:
        paths["plot"] = out_dir / "effects.svg"
        atomic_write_text(paths["plot"], svg_text)
    return paths


def write_coverage_csv(table: CoverageTable, out_dir: str | Path) -> Path:
    path = Path(out_dir) / "coverage.csv"
    atomic_write_text(path, coverage_csv_text(table))
    return path
