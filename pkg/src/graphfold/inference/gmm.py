"""Full-covariance Gaussian mixtures fitted by EM."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from sklearn.cluster import kmeans_plusplus

from ..errors import InputError, ParameterError
from ..rng import child_seed

DET_FLOOR = 1e-300
COV_FLOOR = 1e-9


@dataclass
class GaussianMixture:
    """Weighted Gaussian components with full covariances.

    ``ll_history`` holds the total log-likelihood evaluated at the start of
    each EM iteration, so it is nondecreasing for a well-posed fit.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood: float = np.nan
    ll_history: list = field(default_factory=list)
    n_iter: int = 0
    converged: bool = False
    degenerate: np.ndarray = None

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    def log_prob_components(self, points) -> np.ndarray:
        """``log(w_j) + log N(x_i; mu_j, S_j)`` as an ``n x k`` array."""
        points = np.asarray(points, dtype=float)
        return _weighted_log_densities(points, self.weights, self.means, self.covariances)

    def responsibilities(self, points) -> np.ndarray:
        lp = self.log_prob_components(points)
        return np.exp(lp - logsumexp(lp, axis=1, keepdims=True))

    def predict(self, points) -> np.ndarray:
        """Most likely component for each point."""
        return np.argmax(self.log_prob_components(points), axis=1)

    def score(self, points) -> float:
        return float(logsumexp(self.log_prob_components(points), axis=1).sum())


def _weighted_log_densities(points, weights, means, covs):
    n, d = points.shape
    out = np.empty((n, weights.shape[0]))
    for j in range(weights.shape[0]):
        chol = np.linalg.cholesky(covs[j])
        diff = np.linalg.solve(chol, (points - means[j]).T)
        maha = np.einsum("ij,ij->j", diff, diff)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        with np.errstate(divide="ignore"):
            logw = np.log(weights[j])
        out[:, j] = logw - 0.5 * (d * np.log(2 * np.pi) + logdet + maha)
    return out


def _regularize(cov):
    """Symmetrize; floor a degenerate covariance. Returns (cov, floored)."""
    cov = (cov + cov.T) / 2
    d = cov.shape[0]
    det = np.linalg.det(cov)
    ok = np.isfinite(det) and det >= DET_FLOOR
    if ok:
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            ok = False
    if ok:
        return cov, False
    scale = np.trace(cov) / d
    if not np.isfinite(scale) or scale <= 0:
        scale = 1.0
    cov = cov + COV_FLOOR * scale * np.eye(d)
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        # indefinite by more than the floor; clip the spectrum
        vals, vecs = np.linalg.eigh(cov)
        cov = (vecs * np.maximum(vals, COV_FLOOR * scale)) @ vecs.T
    return cov, True


def _m_step(points, resp, fallback_cov):
    n, d = points.shape
    nk = resp.sum(axis=0)
    k = nk.shape[0]
    weights = nk / n
    means = np.empty((k, d))
    covs = np.empty((k, d, d))
    flags = np.zeros(k, dtype=bool)
    for j in range(k):
        if nk[j] <= 10 * np.finfo(float).eps * n:
            # empty component: keep it alive at the global spread
            means[j] = points.mean(axis=0)
            covs[j] = fallback_cov
            flags[j] = True
            continue
        means[j] = resp[:, j] @ points / nk[j]
        diff = points - means[j]
        covs[j], flags[j] = _regularize((resp[:, j, None] * diff).T @ diff / nk[j])
    return weights, means, covs, flags


def _fit_once(points, k, centers, tol, max_iter, fallback_cov):
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    resp = np.zeros((points.shape[0], k))
    resp[np.arange(points.shape[0]), np.argmin(d2, axis=1)] = 1.0
    weights, means, covs, flags = _m_step(points, resp, fallback_cov)
    history = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        lp = _weighted_log_densities(points, weights, means, covs)
        norm = logsumexp(lp, axis=1, keepdims=True)
        ll = float(norm.sum())
        history.append(ll)
        if len(history) > 1 and abs(ll - history[-2]) <= tol * abs(history[-2]):
            converged = True
            break
        resp = np.exp(lp - norm)
        weights, means, covs, step_flags = _m_step(points, resp, fallback_cov)
        flags |= step_flags
    return GaussianMixture(weights=weights, means=means, covariances=covs,
                           log_likelihood=history[-1], ll_history=history,
                           n_iter=it, converged=converged, degenerate=flags)


def gmm_fit(points, k: int, restarts: int = 10, rng_seed: int = 0,
            tol: float = 1e-8, max_iter: int = 500) -> GaussianMixture:
    """Fit a ``k``-component full-covariance Gaussian mixture.

    Parameters
    ----------
    points : array_like, shape (n, d)
    k : int
        Number of components.
    restarts : int
        Independent EM runs, each started from a k-means++ seeding; the run
        with the highest final log-likelihood is returned.
    rng_seed : int
    tol : float
        Stop when the relative change in log-likelihood drops below ``tol``.
    max_iter : int

    Returns
    -------
    GaussianMixture
        Components whose covariance determinant fell below 1e-300 are
        floored by ``1e-9 * trace / d`` and marked in ``degenerate``.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    if points.ndim != 2 or not np.all(np.isfinite(points)):
        raise InputError("points must be a finite 2-D array")
    n, d = points.shape
    if k < 1 or restarts < 1:
        raise ParameterError("k and restarts must be positive")
    if n < k * (d + 1):
        raise ParameterError(f"need at least k*(d+1) = {k * (d + 1)} points, got {n}")
    diff = points - points.mean(axis=0)
    fallback_cov, _ = _regularize(diff.T @ diff / n)
    best = None
    for rep in range(restarts):
        seed = child_seed(rng_seed, rep) % (2**32)
        centers, _ = kmeans_plusplus(points, k, random_state=seed)
        fit = _fit_once(points, k, centers, tol, max_iter, fallback_cov)
        if best is None or fit.log_likelihood > best.log_likelihood:
            best = fit
    return best


def cluster(points, k: int, restarts: int = 10, rng_seed: int = 0) -> np.ndarray:
    """Labels from the maximum-responsibility rule of a fitted mixture."""
    points = np.asarray(points, dtype=float)
    return gmm_fit(points, k, restarts=restarts, rng_seed=rng_seed).predict(points)
