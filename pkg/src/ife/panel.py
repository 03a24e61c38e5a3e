"""Panel data model with a block-missing treated region.

The outcome matrix is stored time-by-unit (rows are periods, columns are
units).  Units are ordered so that the ``n_control`` never-treated units
occupy the leading columns, and ``n_pre`` periods precede the earliest
intervention.  The south-east rectangle of treated units and post-treatment
periods is the "missing block": counterfactual outcomes there are never
observed and are the target of estimation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .exceptions import PanelDataError

__all__ = [
    "Observation",
    "PanelData",
    "SubsampleView",
    "OrderConditionReport",
    "build_panel",
    "tall_view",
    "wide_view",
    "validate_order_conditions",
    "panel_to_observations",
    "read_panel_csv",
    "write_panel_csv",
]


@dataclass(frozen=True)
class Observation:
    """One long-format record: a single (unit, time) cell."""

    unit: str
    time: str
    y: float
    treated: bool
    x: tuple[float, ...] = ()


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class PanelData:
    """Observed outcome panel with treated-block geometry.

    Attributes
    ----------
    outcomes : (T, N) ndarray
        Observed outcomes; row t is a period, column i is a unit.  Treated
        cells hold the post-intervention outcome (effect included).
    treated_mask : (T, N) bool ndarray
        True where the unit is under treatment at that period.
    n_control : int
        Number of never-treated units (leading columns).
    n_pre : int
        Number of periods before the earliest intervention (leading rows).
    covariates : (T, N, p) ndarray or None
        Optional per-cell regressors.
    unit_labels, time_labels : tuple of str
        Identifiers in storage order.
    """

    outcomes: np.ndarray
    treated_mask: np.ndarray
    n_control: int
    n_pre: int
    covariates: np.ndarray | None = None
    unit_labels: tuple[str, ...] = ()
    time_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        T, N = self.outcomes.shape
        if self.treated_mask.shape != (T, N):
            raise PanelDataError("treated_mask shape does not match outcomes")
        if not (1 <= self.n_control < N):
            raise PanelDataError(
                f"need at least one control and one treated unit, got N0={self.n_control}, N={N}"
            )
        if not (1 <= self.n_pre < T):
            raise PanelDataError(
                f"need at least one pre- and one post-treatment period, got T0={self.n_pre}, T={T}"
            )
        if self.treated_mask[:, : self.n_control].any():
            raise PanelDataError("treated cell found in a control column")
        if self.treated_mask[: self.n_pre, :].any():
            raise PanelDataError("treated cell found in a pre-treatment period")
        if not np.isfinite(self.outcomes).all():
            raise PanelDataError("non-finite outcome value")
        if self.covariates is not None:
            if self.covariates.shape[:2] != (T, N) or self.covariates.shape[2] < 1:
                raise PanelDataError("covariate array must be (T, N, p) with p >= 1")
            if not np.isfinite(self.covariates).all():
                raise PanelDataError("non-finite or missing covariate value")
            _freeze(self.covariates)
        if not self.unit_labels:
            object.__setattr__(self, "unit_labels", tuple(f"u{i + 1}" for i in range(N)))
        if not self.time_labels:
            object.__setattr__(self, "time_labels", tuple(str(t + 1) for t in range(T)))
        if len(self.unit_labels) != N or len(self.time_labels) != T:
            raise PanelDataError("label lengths do not match panel dimensions")
        _freeze(self.outcomes)
        _freeze(self.treated_mask)

    @property
    def n_units(self) -> int:
        return self.outcomes.shape[1]

    @property
    def n_periods(self) -> int:
        return self.outcomes.shape[0]

    @property
    def n_treated(self) -> int:
        return self.n_units - self.n_control

    @property
    def n_post(self) -> int:
        return self.n_periods - self.n_pre

    @property
    def n_covariates(self) -> int:
        return 0 if self.covariates is None else self.covariates.shape[2]

    def missing_block_cells(self) -> list[tuple[int, int]]:
        """All (unit_index, time_index) cells of the missing block, column-major."""
        return [
            (i, t)
            for i in range(self.n_control, self.n_units)
            for t in range(self.n_pre, self.n_periods)
        ]

    def observed_mask(self) -> np.ndarray:
        """(T, N) boolean mask of cells outside the missing block."""
        obs = np.ones(self.outcomes.shape, dtype=bool)
        obs[self.n_pre :, self.n_control :] = False
        return obs


@dataclass(frozen=True)
class SubsampleView:
    """A fully observed submatrix of the panel: tall (controls) or wide (pre-treatment)."""

    matrix: np.ndarray
    kind: str  # "tall" | "wide"
    covariates: np.ndarray | None = None


@dataclass(frozen=True)
class OrderConditionReport:
    """Whether both subsamples are large enough to estimate r factors."""

    r: int
    tall_ok: bool
    wide_ok: bool
    tall_lhs: int
    tall_rhs: int
    wide_lhs: int
    wide_rhs: int

    @property
    def passed(self) -> bool:
        return self.tall_ok and self.wide_ok


def _sort_tokens(tokens: Iterable[str]) -> list[str]:
    """Sort tokens numerically when every token parses as a float, else lexically."""
    toks = list(dict.fromkeys(tokens))
    try:
        return sorted(toks, key=float)
    except ValueError:
        return sorted(toks)


def build_panel(records: Iterable[Observation]) -> PanelData:
    """Assemble a :class:`PanelData` from long-format observations.

    Units are reordered so never-treated units come first (stable within each
    group); times are sorted ascending.  The pre-treatment length is set by
    the earliest intervention across all units.

    Raises
    ------
    PanelDataError
        On duplicate cells, an incomplete grid, missing control units or
        pre-treatment periods, or inconsistent covariate dimensions.
    """
    records = list(records)
    if not records:
        raise PanelDataError("no records")

    p = len(records[0].x)
    unit_order: list[str] = list(dict.fromkeys(r.unit for r in records))
    times = _sort_tokens(r.time for r in records)
    time_index = {t: k for k, t in enumerate(times)}

    seen: dict[tuple[str, str], Observation] = {}
    for r in records:
        key = (r.unit, r.time)
        if key in seen:
            raise PanelDataError(f"duplicate (unit,time) record: {key}")
        if len(r.x) != p:
            raise PanelDataError(
                f"inconsistent covariate dimension at {key}: expected {p}, got {len(r.x)}"
            )
        seen[key] = r
    if len(seen) != len(unit_order) * len(times):
        missing = [
            (u, t) for u in unit_order for t in times if (u, t) not in seen
        ]
        raise PanelDataError(f"incomplete grid, first missing cell: {missing[0]}")

    treated_units = {u for (u, _), r in seen.items() if r.treated}
    controls = [u for u in unit_order if u not in treated_units]
    treated = [u for u in unit_order if u in treated_units]
    if not treated:
        raise PanelDataError("no treated cells in input")
    if not controls:
        raise PanelDataError("all units treated (no control units)")

    first_treated_t = min(
        time_index[t] for (u, t), r in seen.items() if r.treated
    )
    if first_treated_t == 0:
        raise PanelDataError("no pre-treatment period (treatment starts at the first period)")

    units = controls + treated
    T, N = len(times), len(units)
    outcomes = np.empty((T, N))
    mask = np.zeros((T, N), dtype=bool)
    cov = np.empty((T, N, p)) if p else None
    for j, u in enumerate(units):
        for k, t in enumerate(times):
            r = seen[(u, t)]
            outcomes[k, j] = r.y
            mask[k, j] = r.treated
            if cov is not None:
                cov[k, j, :] = r.x

    return PanelData(
        outcomes=outcomes,
        treated_mask=mask,
        n_control=len(controls),
        n_pre=first_treated_t,
        covariates=cov,
        unit_labels=tuple(units),
        time_labels=tuple(times),
    )


def tall_view(panel: PanelData) -> SubsampleView:
    """Control subsample: all periods, control columns only."""
    cov = None
    if panel.covariates is not None:
        cov = panel.covariates[:, : panel.n_control, :]
    return SubsampleView(panel.outcomes[:, : panel.n_control], "tall", cov)


def wide_view(panel: PanelData) -> SubsampleView:
    """Pre-treatment subsample: leading periods, all columns."""
    cov = None
    if panel.covariates is not None:
        cov = panel.covariates[: panel.n_pre, :, :]
    return SubsampleView(panel.outcomes[: panel.n_pre, :], "wide", cov)


def validate_order_conditions(panel: PanelData, r: int) -> OrderConditionReport:
    """Check the sample-size inequalities required to estimate ``r`` factors.

    Both T*N0 > r*(T+N0) and T0*N > r*(T0+N) must hold; r=0 passes vacuously.
    """
    if r < 0:
        raise ValueError("r must be nonnegative")
    T, N = panel.n_periods, panel.n_units
    N0, T0 = panel.n_control, panel.n_pre
    tall_lhs, tall_rhs = T * N0, r * (T + N0)
    wide_lhs, wide_rhs = T0 * N, r * (T0 + N)
    return OrderConditionReport(
        r=r,
        tall_ok=tall_lhs > tall_rhs,
        wide_ok=wide_lhs > wide_rhs,
        tall_lhs=tall_lhs,
        tall_rhs=tall_rhs,
        wide_lhs=wide_lhs,
        wide_rhs=wide_rhs,
    )


def panel_to_observations(panel: PanelData) -> list[Observation]:
    """Flatten a panel back to long-format records (storage order)."""
    out = []
    for j, u in enumerate(panel.unit_labels):
        for k, t in enumerate(panel.time_labels):
            x = ()
            if panel.covariates is not None:
                x = tuple(float(v) for v in panel.covariates[k, j])
            out.append(
                Observation(
                    unit=u,
                    time=t,
                    y=float(panel.outcomes[k, j]),
                    treated=bool(panel.treated_mask[k, j]),
                    x=x,
                )
            )
    return out


def read_panel_csv(path: str | Path, covariate_columns: Sequence[str] = ()) -> PanelData:
    """Load a long-format CSV with header ``unit,time,y,treated[,x1,...]``.

    ``covariate_columns`` names the columns to use as regressors; other extra
    columns are ignored.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in ("unit", "time", "y", "treated"):
            if col not in header:
                raise PanelDataError(f"missing required column '{col}'")
        for col in covariate_columns:
            if col not in header:
                raise PanelDataError(f"missing covariate column '{col}'")
        records = []
        for lineno, row in enumerate(reader, start=2):
            try:
                y = float(row["y"])
                treated_tok = row["treated"].strip()
                if treated_tok not in {"0", "1"}:
                    raise ValueError(f"treated must be 0 or 1, got {treated_tok!r}")
                x = tuple(float(row[c]) for c in covariate_columns)
            except (TypeError, ValueError) as exc:
                raise PanelDataError(f"bad value at line {lineno}: {exc}") from exc
            records.append(
                Observation(
                    unit=row["unit"],
                    time=row["time"],
                    y=y,
                    treated=treated_tok == "1",
                    x=x,
                )
            )
    return build_panel(records)


def write_panel_csv(
    panel: PanelData, path: str | Path, covariate_columns: Sequence[str] = ()
) -> None:
    """Write a panel as long-format CSV (inverse of :func:`read_panel_csv`)."""
    p = panel.n_covariates
    if covariate_columns and len(covariate_columns) != p:
        raise ValueError("covariate_columns length must match panel covariates")
    if p and not covariate_columns:
        covariate_columns = [f"x{k + 1}" for k in range(p)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["unit", "time", "y", "treated", *covariate_columns])
        for obs in panel_to_observations(panel):
            writer.writerow(
                [obs.unit, obs.time, f"{obs.y:.12g}", int(obs.treated)]
                + [f"{v:.12g}" for v in obs.x]
            )
