"""Run configuration shared by the CLI and the HTTP service.

A single JSON document mirrors this model; CLI flags override whatever the
file provides.  Estimate runs use the input/output and bootstrap fields;
simulate runs additionally use the replication and design fields.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .exceptions import ConfigError

__all__ = ["RunConfig", "load_config", "merge_overrides"]


class RunConfig(BaseModel):
    """Estimation / simulation parameters, file-loadable and flag-overridable."""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    command: Literal["estimate", "simulate"] | None = None
    input_path: str | None = None
    output_dir: str | None = None

    r: int | Literal["auto"] = "auto"
    bandwidth: int | Literal["auto"] = Field(default="auto", alias="K")
    n_draws: int = Field(default=399, alias="B", ge=1)
    alpha: list[float] = Field(default_factory=lambda: [0.1, 0.05])
    block_width: int | None = Field(default=None, ge=1)
    seed: int = 0
    covariates: list[str] = Field(default_factory=list)
    rmax: int = Field(default=8, ge=0)

    # simulate only
    reps: int = Field(default=2000, ge=1)
    dgp: Literal["dgp1", "dgp2"] = "dgp1"
    case: Literal[1, 2] = 1
    margin: Literal[1, 2] = 1
    n_pre: int = Field(default=20, alias="T0", ge=2)
    n_control: int = Field(default=30, alias="N0", ge=1)
    factor_mode: Literal["known", "estimated"] = "known"
    r_true: int = Field(default=3, ge=1)
    delta_true: float = 1.0
    error_scale: float = Field(default=1.0, gt=0.0)
    redraw_design: bool = True
    workers: int = Field(default=1, ge=1)

    @field_validator("alpha")
    @classmethod
    def _alpha_in_unit_interval(cls, v: list[float]) -> list[float]:
        if not v:
            raise ValueError("alpha list must not be empty")
        for a in v:
            if not 0.0 < a < 1.0:
                raise ValueError(f"alpha={a} must lie in (0, 1)")
        return v

    @field_validator("r")
    @classmethod
    def _r_positive(cls, v: int | str) -> int | str:
        if isinstance(v, int) and v < 1:
            raise ValueError("r must be at least 1")
        return v

    @field_validator("bandwidth")
    @classmethod
    def _bandwidth_positive(cls, v: int | str) -> int | str:
        if isinstance(v, int) and v < 0:
            raise ValueError("bandwidth must be nonnegative")
        return v

    def effective_block_width(self) -> int:
        """Explicit width, else 1 (ordinary wild) or 4 for the serially correlated case."""
        if self.block_width is not None:
            return self.block_width
        return 4 if self.command == "simulate" and self.case == 2 else 1


def load_config(path: str | Path) -> RunConfig:
    """Parse a JSON config file into a :class:`RunConfig`."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    return _validate(payload)


def merge_overrides(base: RunConfig, **overrides: Any) -> RunConfig:
    """New config with the non-None overrides applied on top of ``base``."""
    data = base.model_dump(by_alias=False)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return _validate(data)


def _validate(payload: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(payload)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
