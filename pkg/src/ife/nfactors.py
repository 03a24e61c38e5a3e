"""Choosing the number of factors by an information criterion.

The baseline criterion penalizes the log mean squared residual after
removing k principal components with k * ((N+T)/(NT)) * ln(min(N,T)), the
IC_p2 penalty of Bai and Ng (2002).  A calibrated variant rescales the
penalty by a constant swept over a grid and picks the value at which the
selected k is stable across random subsamples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["FactorCountEstimate", "estimate_num_factors"]

METHOD_BASELINE = "baseline"
METHOD_CALIBRATED = "calibrated"

# Calibrated-variant knobs: penalty-constant grid, subsample count, sizes.
_CAL_GRID = np.arange(0.05, 3.0001, 0.05)
_CAL_DRAWS = 30
_CAL_MIN_FRAC = 0.75
_CAL_MIN_RUN = 2


@dataclass(frozen=True)
class FactorCountEstimate:
    """Selected factor count with the criterion values behind it."""

    r_hat: int
    criterion_values: np.ndarray  # index k -> criterion at k, k = 0..rmax
    method: str


def _residual_variances(Y: np.ndarray, rmax: int) -> np.ndarray:
    """V(k) = mean squared residual after removing k principal components, k=0..rmax."""
    s2 = np.linalg.svd(Y, compute_uv=False) ** 2
    tail = np.concatenate([s2, [0.0]])[::-1].cumsum()[::-1]  # tail sums of s^2
    return tail[: rmax + 1] / Y.size


def _criterion(V: np.ndarray, penalty: float) -> np.ndarray:
    k = np.arange(V.shape[0])
    with np.errstate(divide="ignore"):
        return np.log(V) + k * penalty


def _penalty(T: int, N: int) -> float:
    return (N + T) / (N * T) * np.log(min(N, T))


def estimate_num_factors(
    Y: np.ndarray,
    rmax: int,
    method: str = METHOD_BASELINE,
    rng: np.random.Generator | None = None,
) -> FactorCountEstimate:
    """Select the number of factors of a T' x N' matrix.

    Parameters
    ----------
    Y : (T', N') ndarray
        Fully observed data matrix.
    rmax : int
        Largest candidate; k=0 (no factors) is always admitted.
    method : str
        "baseline" for the plain information criterion, "calibrated" for the
        penalty-sweep variant (requires ``rng``).
    """
    Y = np.asarray(Y, dtype=float)
    T, N = Y.shape
    if not 0 <= rmax <= min(T, N) - 1:
        raise ValueError(f"rmax={rmax} out of range for a {T}x{N} matrix")

    if method == METHOD_BASELINE:
        values = _criterion(_residual_variances(Y, rmax), _penalty(T, N))
        return FactorCountEstimate(int(np.argmin(values)), values, method)
    if method != METHOD_CALIBRATED:
        raise ValueError(f"unknown method {method!r}")
    if rng is None:
        raise ValueError("calibrated method needs an rng")

    # r-hat per (penalty constant, subsample); stability = zero variance across draws
    picks = np.empty((_CAL_GRID.size, _CAL_DRAWS), dtype=int)
    for j in range(_CAL_DRAWS):
        frac = _CAL_MIN_FRAC + (1.0 - _CAL_MIN_FRAC) * (j + 1) / _CAL_DRAWS
        rows = np.sort(rng.choice(T, size=max(rmax + 1, int(round(frac * T))), replace=False))
        cols = np.sort(rng.choice(N, size=max(rmax + 1, int(round(frac * N))), replace=False))
        sub = Y[np.ix_(rows, cols)]
        V = _residual_variances(sub, rmax)
        pen = _penalty(sub.shape[0], sub.shape[1])
        for g, c in enumerate(_CAL_GRID):
            picks[g, j] = int(np.argmin(_criterion(V, c * pen)))

    stable = np.ptp(picks, axis=1) == 0
    common = picks[:, 0]
    chosen: int | None = None
    g = 0
    # skip the leading plateau where a vanishing penalty pins the pick at rmax
    while g < _CAL_GRID.size and stable[g] and common[g] == rmax:
        g += 1
    while g < _CAL_GRID.size:
        if stable[g] and common[g] != rmax:
            run = g
            while run < _CAL_GRID.size and stable[run] and common[run] == common[g]:
                run += 1
            if run - g >= _CAL_MIN_RUN:
                chosen = int(common[g])
                break
            g = run
        else:
            g += 1

    V_full = _residual_variances(Y, rmax)
    baseline_values = _criterion(V_full, _penalty(T, N))
    if chosen is None:
        return FactorCountEstimate(int(np.argmin(baseline_values)), baseline_values, method)
    # report the criterion at a penalty constant that reproduces the stable pick
    for c in _CAL_GRID:
        values = _criterion(V_full, c * _penalty(T, N))
        if int(np.argmin(values)) == chosen:
            return FactorCountEstimate(chosen, values, method)
    return FactorCountEstimate(int(np.argmin(baseline_values)), baseline_values, method)
