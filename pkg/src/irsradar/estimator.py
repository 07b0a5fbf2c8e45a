"""Best linear unbiased estimation of the path reflectivities.

For y = A alpha + n with zero-mean noise of covariance R, the BLUE is
alpha_hat = (A^H R^-1 A)^-1 A^H R^-1 y with covariance (A^H R^-1 A)^-1,
independent of the distribution of n beyond its second moment.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import SingularModelError, UndefinedMetricError

# Gram matrices beyond this are treated as numerically singular.
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class NoiseModel:
    """Noise second-order description; scaled identity gets a fast path."""

    covariance: np.ndarray = None  # N x N Hermitian positive definite
    is_scaled_identity: bool = False
    sigma2: float = None  # valid when is_scaled_identity
    n: int = None

    def __post_init__(self):
        if self.is_scaled_identity:
            if self.sigma2 is None or self.sigma2 <= 0 or self.n is None:
                raise ValueError("scaled identity needs sigma2 > 0 and n")
            object.__setattr__(self, "_chol", None)
            return
        R = np.asarray(self.covariance, dtype=complex)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValueError("covariance must be square")
        if np.max(np.abs(R - R.conj().T)) > 1e-12 * max(1.0, np.max(np.abs(R))):
            raise ValueError("covariance must be Hermitian")
        object.__setattr__(self, "covariance", R)
        object.__setattr__(self, "n", R.shape[0])
        try:
            # positive definiteness is certified by the factorization
            chol = cho_factor(R, lower=True)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance is not positive definite") from exc
        object.__setattr__(self, "_chol", chol)

    @classmethod
    def scaled_identity(cls, sigma2: float, n: int) -> "NoiseModel":
        return cls(is_scaled_identity=True, sigma2=float(sigma2), n=int(n))

    @classmethod
    def identity(cls, n: int) -> "NoiseModel":
        return cls.scaled_identity(1.0, n)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """R^-1 b without forming R^-1."""
        if self.is_scaled_identity:
            return b / self.sigma2
        return cho_solve(self._chol, b)


def _columns(A) -> np.ndarray:
    cols = A.columns if hasattr(A, "columns") else np.asarray(A, dtype=complex)
    if cols.ndim != 2:
        raise ValueError("A must be a matrix")
    return cols


def _whitened_gram(A, noise: NoiseModel):
    """Return (A, R^-1 A, A^H R^-1 A, its factorization), checking conditioning."""
    cols = _columns(A)
    if cols.shape[0] != noise.n:
        raise ValueError(f"A has {cols.shape[0]} rows but noise is {noise.n}-dimensional")
    ria = noise.solve(cols)
    gram = cols.conj().T @ ria
    gram = 0.5 * (gram + gram.conj().T)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularModelError(
            f"Gram matrix condition number {cond:.3e} exceeds {CONDITION_LIMIT:.0e}"
        )
    try:
        factor = cho_factor(gram, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularModelError("Gram matrix is not positive definite") from exc
    return cols, ria, gram, factor


@dataclass(frozen=True)
class EstimationReport:
    """BLUE output with its exact covariance and scalar error summaries."""

    alpha_hat: np.ndarray  # complex, length K
    covariance: np.ndarray  # K x K Hermitian
    mse: float  # trace of covariance
    nmse: float  # against the true alpha when supplied, else nan


def blue_estimate(A, noise: NoiseModel, y, alpha_true=None) -> EstimationReport:
    """Estimate alpha from one observation.

    Parameters
    ----------
    A : SensingMatrix or (N, K) array
        Model matrix; plain arrays are accepted so the estimator is
        usable outside the radar pipeline.
    noise : NoiseModel
    y : (N,) array
        Observed slow-time vector.
    alpha_true : optional
        When given, the report's nmse field is filled in.

    Raises
    ------
    SingularModelError
        If cond(A^H R^-1 A) exceeds CONDITION_LIMIT; no silent
        regularization is applied.
    """
    y = np.asarray(y, dtype=complex)
    cols, ria, _, factor = _whitened_gram(A, noise)
    if y.shape != (cols.shape[0],):
        raise ValueError("y length does not match A")
    alpha_hat = cho_solve(factor, ria.conj().T @ y)
    cov = cho_solve(factor, np.eye(cols.shape[1], dtype=complex))
    cov = 0.5 * (cov + cov.conj().T)
    mse = float(np.trace(cov).real)
    err = float("nan") if alpha_true is None else nmse(alpha_true, alpha_hat)
    return EstimationReport(alpha_hat=alpha_hat, covariance=cov, mse=mse, nmse=err)


def estimator_mse(A, noise: NoiseModel) -> float:
    """Tr((A^H R^-1 A)^-1), the observation-independent error floor."""
    _, _, _, factor = _whitened_gram(A, noise)
    k = factor[0].shape[0]
    cov = cho_solve(factor, np.eye(k, dtype=complex))
    return float(np.trace(cov).real)


def nmse(alpha_true, alpha_hat) -> float:
    """norm(alpha - alpha_hat) / norm(alpha); the norms are not squared."""
    t = np.atleast_1d(np.asarray(alpha_true, dtype=complex))
    h = np.atleast_1d(np.asarray(alpha_hat, dtype=complex))
    if t.shape != h.shape:
        raise ValueError("shape mismatch between truth and estimate")
    denom = np.linalg.norm(t)
    if denom == 0:
        raise UndefinedMetricError("NMSE undefined for a zero true vector")
    return float(np.linalg.norm(t - h) / denom)
