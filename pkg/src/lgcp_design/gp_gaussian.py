"""Exact Gaussian-process inference under a Gaussian observation model.

All solves go through Cholesky factorizations; explicit inverses are never
formed. Negative predicted variances arising from cancellation are clamped
to zero, and a clamp rate above 0.1% of queries raises NumericalError
instead of being hidden.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .exceptions import LgcpDesignError, NumericalError
from .kernels import JITTER_SCALE, CovStructure, MeanFunction, cov_matrix, mean_eval

__all__ = [
    "GaussianModel",
    "GaussianPosterior",
    "fit_gaussian",
    "predict",
    "prior_predict",
    "sample_prior",
    "kl_gaussian_closed_form",
]

CLAMP_FAIL_FRACTION = 1e-3


@dataclass(frozen=True)
class GaussianModel:
    """GP prior plus Gaussian observation noise y_i | f_i ~ N(f_i, sigma^2)."""

    mean: MeanFunction
    cov: CovStructure
    noise_variance: float

    def __post_init__(self):
        if self.noise_variance <= 0:
            raise LgcpDesignError("noise_variance must be positive")

    def mean_at(self, points) -> np.ndarray:
        return np.atleast_1d(mean_eval(points, self.mean))

    def cov_at(self, a, b=None) -> np.ndarray:
        return cov_matrix(a, a if b is None else b, self.cov)

    @property
    def jitter(self) -> float:
        return JITTER_SCALE * self.cov.total_variance


def _chol(mat: np.ndarray, jitter: float):
    """Cholesky of mat + jitter*I; factorization failure is reported, not patched."""
    try:
        return cho_factor(mat + jitter * np.eye(mat.shape[0]), lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Cholesky factorization failed: {exc}") from exc


def _clamp_variances(var: np.ndarray) -> np.ndarray:
    neg = var < 0
    if neg.any():
        if neg.sum() > max(1, CLAMP_FAIL_FRACTION * var.size):
            raise NumericalError(
                f"{neg.sum()} of {var.size} predicted variances were negative"
            )
        var = np.where(neg, 0.0, var)
    return var


@dataclass(frozen=True)
class GaussianPosterior:
    """Fitted exact GP posterior; immutable and safe for concurrent queries."""

    model: GaussianModel
    train_points: np.ndarray
    y: np.ndarray
    alpha: np.ndarray = field(repr=False)  # (K + sigma^2 I)^-1 (y - mu)
    chol: tuple = field(repr=False)
    log_marginal: float = 0.0


def fit_gaussian(model, design_points, y) -> GaussianPosterior:
    """Fit the exact Gaussian posterior on the given design points.

    ``design_points`` is an (n, 3) array; ``y`` the observation vector.
    """
    X = np.atleast_2d(np.asarray(design_points, dtype=float))
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if y.shape != (n,) or n < 1:
        raise LgcpDesignError("y must have one entry per design point")
    K = model.cov_at(X)
    Ky = K + model.noise_variance * np.eye(n)
    chol = _chol(Ky, model.jitter)
    resid = y - model.mean_at(X)
    alpha = cho_solve(chol, resid)
    log_det = 2.0 * np.sum(np.log(np.diag(chol[0])))
    log_marginal = -0.5 * (resid @ alpha + log_det + n * np.log(2.0 * np.pi))
    return GaussianPosterior(model, X, y, alpha, chol, float(log_marginal))


def predict(post: GaussianPosterior, query, want: str = "marginal"):
    """Posterior predictive mean and variance at query points.

    ``want`` is "marginal" for per-point variances or "full" for the joint
    covariance matrix.
    """
    Xq = np.atleast_2d(np.asarray(query, dtype=float))
    model = post.model
    Kqd = model.cov_at(Xq, post.train_points)
    mean = model.mean_at(Xq) + Kqd @ post.alpha
    V = cho_solve(post.chol, Kqd.T)
    if want == "full":
        cov = model.cov_at(Xq) - Kqd @ V
        return mean, cov
    if want != "marginal":
        raise LgcpDesignError(f"unknown prediction kind {want!r}")
    var = prior_marginal_var(model, Xq) - np.sum(Kqd * V.T, axis=1)
    return mean, _clamp_variances(var)


def prior_marginal_var(model, query) -> np.ndarray:
    """Prior marginal variances at query points without forming the full matrix."""
    Xq = np.atleast_2d(np.asarray(query, dtype=float))
    if hasattr(model, "var_at"):
        return np.asarray(model.var_at(Xq), dtype=float)
    cov = getattr(model, "cov", None)
    if isinstance(cov, CovStructure):
        return np.full(Xq.shape[0], cov.total_variance)
    return np.diag(model.cov_at(Xq)).copy()


def prior_predict(model, query, want: str = "marginal"):
    """Prior mean and (co)variance at query points (the n = 0 design limit)."""
    Xq = np.atleast_2d(np.asarray(query, dtype=float))
    mean = model.mean_at(Xq)
    if want == "full":
        return mean, model.cov_at(Xq)
    return mean, prior_marginal_var(model, Xq)


def sample_prior(model, points, count: int, seed) -> np.ndarray:
    """Draw ``count`` joint latent prior samples at the given points.

    Returns an array of shape (count, n_points); deterministic given seed.
    """
    if count < 1:
        raise LgcpDesignError("count must be >= 1")
    X = np.atleast_2d(np.asarray(points, dtype=float))
    K = model.cov_at(X)
    jitter = JITTER_SCALE * max(np.max(np.diag(K)), 1.0)
    chol, _ = _chol(K, jitter)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, X.shape[0]))
    return model.mean_at(X)[None, :] + z @ np.tril(chol).T


def kl_gaussian_closed_form(model, design_points, y) -> float:
    """KL divergence from prior to posterior over the design points.

    Closed form for the Gaussian observation model with posterior moments
    mu1 = K (K + sigma^2 I)^-1 (y - mu) and K1 = K - K (K + sigma^2 I)^-1 K:
    KL = 0.5 [ log|K K1^-1| + Tr(K1 K^-1) + mu1' K^-1 mu1 - n ].
    """
    X = np.atleast_2d(np.asarray(design_points, dtype=float))
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    K = model.cov_at(X)
    jitter = model.jitter
    Kj = K + jitter * np.eye(n)
    chol_noisy = _chol(K + model.noise_variance * np.eye(n), jitter)
    resid = y - model.mean_at(X)
    mu1 = K @ cho_solve(chol_noisy, resid)
    K1 = Kj - K @ cho_solve(chol_noisy, K)

    chol_prior = _chol(K, jitter)
    chol_post = _chol(K1, jitter)
    log_det_prior = 2.0 * np.sum(np.log(np.diag(chol_prior[0])))
    log_det_post = 2.0 * np.sum(np.log(np.diag(chol_post[0])))
    trace = np.trace(cho_solve(chol_prior, K1))
    quad = mu1 @ cho_solve(chol_prior, mu1)
    kl = 0.5 * (log_det_prior - log_det_post + trace + quad - n)
    if kl < -1e-10:
        raise NumericalError(f"closed-form KL came out negative: {kl}")
    return max(float(kl), 0.0)
