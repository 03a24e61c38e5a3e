"""Interactive fixed effects estimation by alternating least squares.

Alternates between extracting principal-component factors from the current
regression residual and re-estimating the slope coefficients with the factor
space projected out, until the coefficient step falls below tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegeneracyError
from .factors import FactorEstimate, sign_normalize

__all__ = ["IfeeResult", "start_beta", "ifee_fit"]

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 1000


@dataclass(frozen=True)
class IfeeResult:
    """Converged (or capped) alternating-least-squares fit.

    ``objective_path`` records, per iteration, the residual sum of squares
    after projecting the current factor space out of the outcome net of the
    covariate contribution; it is non-increasing along the iteration.
    """

    beta: np.ndarray
    factors: np.ndarray
    loadings: np.ndarray
    singular_values: np.ndarray
    iterations: int
    converged: bool
    final_step: float
    objective_path: tuple[float, ...] = field(default=(), repr=False)

    def factor_estimate(self) -> FactorEstimate:
        return FactorEstimate(self.factors, self.loadings, self.singular_values)


def _check_xy(Y: np.ndarray, X: np.ndarray) -> tuple[int, int, int]:
    Y = np.asarray(Y)
    X = np.asarray(X)
    if X.ndim != 3 or X.shape[:2] != Y.shape:
        raise ValueError("X must be (T, N, p) matching Y (T, N)")
    T, N = Y.shape
    return T, N, X.shape[2]


def start_beta(Y: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Pooled least-squares starting value, ignoring any factor structure.

    Raises
    ------
    DegeneracyError
        If the pooled Gram matrix of the regressors is singular.
    """
    T, N, p = _check_xy(Y, X)
    Xf = X.reshape(T * N, p, order="F")  # stacks unit blocks
    yf = Y.reshape(T * N, order="F")
    gram = Xf.T @ Xf
    if np.linalg.matrix_rank(gram) < p:
        raise DegeneracyError("singular Gram matrix in pooled least squares")
    return np.linalg.solve(gram, Xf.T @ yf)


def ifee_fit(
    Y: np.ndarray,
    X: np.ndarray,
    r: int,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> IfeeResult:
    """Estimate slope coefficients and r factors jointly on a fully observed panel.

    Parameters
    ----------
    Y : (T, N) ndarray
        Outcomes, rows are periods.
    X : (T, N, p) ndarray
        Regressors per cell.
    r : int
        Number of factors; r=0 reduces to pooled least squares.
    tol : float
        Stop when the coefficient step (2-norm) falls below this.
    max_iter : int
        Iteration cap; hitting it returns converged=False rather than raising.
    """
    Y = np.asarray(Y, dtype=float)
    X = np.asarray(X, dtype=float)
    T, N, p = _check_xy(Y, X)
    if r < 0 or r > min(T, N):
        raise ValueError(f"r={r} out of range for a {T}x{N} panel")

    beta = start_beta(Y, X)
    if r == 0:
        resid = Y - X @ beta
        sse = float(np.sum(resid**2))
        return IfeeResult(
            beta=beta,
            factors=np.zeros((T, 0)),
            loadings=np.zeros((N, 0)),
            singular_values=np.zeros(0),
            iterations=1,
            converged=True,
            final_step=0.0,
            objective_path=(sse,),
        )

    objective: list[float] = []
    step = np.inf
    U = V = d = None
    X_flat = X.reshape(T, N * p)
    for _ in range(max_iter):
        R = (Y - X @ beta) / np.sqrt(N * T)
        U, s, Vt = np.linalg.svd(R, full_matrices=False)
        U, d, V = U[:, :r], s[:r], Vt[:r].T
        # H = I - FF'/T applied implicitly: H @ M = M - U (U' M)
        HY = Y - U @ (U.T @ Y)
        HX = (X_flat - U @ (U.T @ X_flat)).reshape(T, N, p)
        gram = np.einsum("tip,tiq->pq", X, HX)
        rhs = np.einsum("tip,ti->p", X, HY)
        if np.linalg.matrix_rank(gram) < p:
            raise DegeneracyError("singular projected Gram matrix in coefficient update")
        beta_new = np.linalg.solve(gram, rhs)
        resid = Y - X @ beta_new
        resid -= U @ (U.T @ resid)
        objective.append(float(np.sum(resid**2)))
        step = float(np.linalg.norm(beta_new - beta))
        beta = beta_new
        if step < tol:
            break

    converged = step < tol
    factors = np.sqrt(T) * U
    loadings = np.sqrt(N) * V * d
    fit = sign_normalize(FactorEstimate(factors, loadings, d.copy()))
    return IfeeResult(
        beta=beta,
        factors=fit.factors,
        loadings=fit.loadings,
        singular_values=fit.singular_values,
        iterations=len(objective),
        converged=converged,
        final_step=step,
        objective_path=tuple(objective),
    )
