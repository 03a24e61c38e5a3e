"""Principal-component factor extraction and two-block matrix completion.

Factors are extracted from each of the two fully observed subsamples by a
truncated SVD, then the two factorizations are aligned through the loadings
they share on the control units.  The aligned product fills in the missing
treated/post-treatment block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegeneracyError

__all__ = [
    "FactorEstimate",
    "CompletionFit",
    "pca_factors",
    "sign_normalize",
    "complete_matrix",
]

# Reciprocal condition number below which the control-loading Gram matrix is
# treated as singular.
RCOND_MIN = 1e-12


@dataclass(frozen=True)
class FactorEstimate:
    """Rank-r factorization of one subsample.

    ``factors`` is (T', r) with orthonormal columns scaled so that
    factors.T @ factors / T' = I; ``loadings`` is (N', r) and absorbs the
    singular values, so factors @ loadings.T is the best rank-r
    approximation of the input matrix.
    """

    factors: np.ndarray
    loadings: np.ndarray
    singular_values: np.ndarray

    @property
    def rank(self) -> int:
        return self.factors.shape[1]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.factors.shape[0], self.loadings.shape[0], self.rank

    def fitted(self) -> np.ndarray:
        """The rank-r reconstruction factors @ loadings.T."""
        return self.factors @ self.loadings.T


@dataclass(frozen=True)
class CompletionFit:
    """Aligned two-block completion of the full outcome matrix.

    ``completed`` equals tall factors times ``h_miss`` times wide loadings
    transposed; it covers every cell of the panel, including the missing
    block.
    """

    h_miss: np.ndarray
    completed: np.ndarray
    tall_fit: FactorEstimate
    wide_fit: FactorEstimate
    beta_tall: np.ndarray | None = None


def pca_factors(Y: np.ndarray, r: int) -> FactorEstimate:
    """Extract r principal-component factors from a T' x N' matrix.

    The SVD is taken of Y / sqrt(T'N'); left singular vectors are scaled by
    sqrt(T') to give factors, right singular vectors by sqrt(N') times the
    singular values to give loadings.  Columns are sign-normalized so the
    largest-magnitude entry of each factor is positive.

    Raises
    ------
    ValueError
        If r exceeds min(T', N') or Y has non-finite entries.
    """
    Y = np.asarray(Y, dtype=float)
    T, N = Y.shape
    if not 1 <= r <= min(T, N):
        raise ValueError(f"r={r} out of range for a {T}x{N} matrix")
    if not np.isfinite(Y).all():
        raise ValueError("non-finite entries in input matrix")
    P, d, Qt = np.linalg.svd(Y / np.sqrt(T * N), full_matrices=False)
    factors = np.sqrt(T) * P[:, :r]
    loadings = np.sqrt(N) * Qt[:r].T * d[:r]
    return sign_normalize(FactorEstimate(factors, loadings, d[:r].copy()))


def sign_normalize(fit: FactorEstimate) -> FactorEstimate:
    """Flip factor/loading column pairs so each factor's largest-|.| entry is positive.

    The fitted product is unchanged; flipping both members of a pair is exact
    in floating point.
    """
    F = fit.factors.copy()
    L = fit.loadings.copy()
    for j in range(F.shape[1]):
        col = F[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            F[:, j] = -col
            L[:, j] = -L[:, j]
    return FactorEstimate(F, L, fit.singular_values)


def complete_matrix(
    tall: FactorEstimate, wide: FactorEstimate, n_control: int
) -> CompletionFit:
    """Align the tall and wide factorizations and fill the full matrix.

    The alignment matrix regresses the tall loadings on the first
    ``n_control`` rows of the wide loadings; the completed matrix is
    tall factors @ alignment @ wide loadings.T, covering the missing block.

    Raises
    ------
    DegeneracyError
        If the control-block loading Gram matrix is numerically singular.
    """
    if tall.rank != wide.rank:
        raise ValueError("tall and wide fits must share the same rank")
    lam_w0 = wide.loadings[:n_control]
    if lam_w0.shape[0] != tall.loadings.shape[0]:
        raise ValueError("tall loadings must cover exactly the control units")
    s = np.linalg.svd(lam_w0, compute_uv=False)
    rc = (s[-1] / s[0]) ** 2 if s[0] > 0 else 0.0
    if rc < RCOND_MIN:
        raise DegeneracyError(
            f"control-block loadings are numerically degenerate (rcond {rc:.2e})"
        )
    gram = lam_w0.T @ lam_w0
    # h_miss = tall_loadings' @ lam_w0 @ gram^{-1}, solved without forming the inverse
    h_miss = np.linalg.solve(gram, (tall.loadings.T @ lam_w0).T).T
    completed = tall.factors @ h_miss @ wide.loadings.T
    return CompletionFit(h_miss=h_miss, completed=completed, tall_fit=tall, wide_fit=wide)
