"""Reference density estimators: penalized Gaussian mixture, diagonal KDE
and manifold Parzen windows.

Every estimator follows the scikit-learn conventions: ``fit(X)`` on an
``(n_samples, n_features)`` array, ``score_samples(X)`` for per-row log
densities and ``score(X)`` for their mean. Ridge and width parameters are
tuned by maximizing a leave-one-out log density on the training set.
"""

import warnings

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, DensityMixin
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import InvalidInputError

__all__ = [
    "PenalizedGaussianMixture",
    "DiagonalKDE",
    "ManifoldParzen",
    "fit_gm",
    "fit_kde",
    "fit_mp",
    "baseline_log_density",
    "spectral_log_pdf",
]

LOG_2PI = np.log(2.0 * np.pi)


def spectral_log_pdf(R, U, lam, w):
    """Log density and its ``w``-derivative for covariances ``U diag(lam) U^T + w I``.

    Parameters
    ----------
    R : array (..., D)
        Residuals ``z - mean``.
    U : array (D, q)
        Orthonormal directions.
    lam : array (q,)
        Non-negative variances along ``U``.
    w : float
        Isotropic ridge, strictly positive.

    Returns
    -------
    logpdf, dlogpdf_dw : arrays of shape ``R.shape[:-1]``
    """
    D = R.shape[-1]
    q = lam.shape[0]
    proj = R @ U
    sq = np.sum(R * R, axis=-1)
    along = proj * proj
    rest = np.maximum(sq - np.sum(along, axis=-1), 0.0)
    s = lam + w
    logdet = np.sum(np.log(s)) + (D - q) * np.log(w)
    quad = rest / w + np.sum(along / s, axis=-1)
    dlogdet = np.sum(1.0 / s) + (D - q) / w
    dquad = -rest / w ** 2 - np.sum(along / s ** 2, axis=-1)
    return -0.5 * (D * LOG_2PI + logdet + quad), -0.5 * (dlogdet + dquad)


def _eig_psd(C):
    lam, U = np.linalg.eigh(0.5 * (C + C.T))
    return U, np.maximum(lam, 0.0)


RIDGE_FLOOR = 1e-12


def _maximize_log_ridge(loo, w0, max_iter=200):
    """Gradient ascent on ``log w`` with an adaptive, backtracked step.

    ``loo(w)`` returns ``(value, d value / dw)``. The ridge is kept above
    ``1e-12 * w0``: on exactly degenerate data the optimum is ``w -> 0``.
    """
    t = np.log(w0)
    t_min = np.log(RIDGE_FLOOR * w0)
    f, g = loo(w0)
    g *= w0
    eta = 1.0 / max(abs(g), 1.0)
    for _ in range(max_iter):
        if abs(g) < 1e-10:
            break
        for _ in range(60):
            t_new = max(t + eta * g, t_min)
            f_new, g_new = loo(np.exp(t_new))
            if np.isfinite(f_new) and f_new >= f:
                break
            eta *= 0.5
        else:
            break
        step = abs(t_new - t)
        t, f, g = t_new, f_new, g_new * np.exp(t_new)
        eta *= 1.5
        if step < 1e-10:
            break
    return float(np.exp(t)), float(f)


def _check_fit_input(X, min_samples=2):
    X = check_array(X, dtype=np.float64, ensure_min_samples=min_samples)
    return X


class PenalizedGaussianMixture(DensityMixin, BaseEstimator):
    """Gaussian mixture over K-means clusters with a global covariance ridge.

    Each cluster contributes weight ``N_k / N``, its sample mean and its
    (maximum-likelihood) sample covariance plus ``ridge_ * I``. The ridge
    maximizes the leave-one-out log density, where removing a point
    downdates the mean and covariance of its own cluster only.

    Parameters
    ----------
    n_clusters : int
        Number of K-means clusters.
    random_state : int
        Seed of the k-means++ initialization.
    max_iter : int
        K-means iteration cap.
    """

    def __init__(self, n_clusters=1, random_state=0, max_iter=100):
        self.n_clusters = n_clusters
        self.random_state = random_state
        self.max_iter = max_iter

    def _cluster(self, X):
        n, K = X.shape[0], self.n_clusters
        if K == 1:
            return np.zeros(n, dtype=int)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            km = KMeans(n_clusters=K, init="k-means++", n_init=1, max_iter=self.max_iter,
                        random_state=self.random_state).fit(X)
        labels = km.labels_.copy()
        centers = km.cluster_centers_
        for k in range(K):
            if np.any(labels == k):
                continue
            # re-seed an empty cluster with the point farthest from its centre
            sizes = np.bincount(labels, minlength=K)
            movable = sizes[labels] > 1
            dist = np.sum((X - centers[labels]) ** 2, axis=1)
            dist[~movable] = -np.inf
            labels[int(np.argmax(dist))] = k
        return labels

    def fit(self, X, y=None):
        X = _check_fit_input(X)
        n, D = X.shape
        K = self.n_clusters
        if not 1 <= K <= n:
            raise InvalidInputError(f"n_clusters must be in [1, {n}], got {K}")
        labels = self._cluster(X)
        sizes = np.bincount(labels, minlength=K)
        means = np.array([X[labels == k].mean(axis=0) for k in range(K)])
        covs = np.array([np.cov(X[labels == k].T, bias=True).reshape(D, D) if sizes[k] > 1
                         else np.zeros((D, D)) for k in range(K)])
        self.labels_ = labels
        self.weights_ = sizes / n
        self.means_ = means
        self.sample_covariances_ = covs
        self.n_features_in_ = D
        loo = self._loo_function(X, labels, sizes, means, covs)
        w0 = 0.1 * float(np.mean(X.var(axis=0))) or 1.0
        self.ridge_, self.loo_log_density_ = _maximize_log_ridge(loo, w0)
        self.covariances_ = covs + self.ridge_ * np.eye(D)
        return self

    def _loo_function(self, X, labels, sizes, means, covs):
        n, D = X.shape
        K = len(sizes)
        spectra = [_eig_psd(C) for C in covs]
        log_w = np.log(sizes / n)
        own = []
        for j in range(n):
            k, m = labels[j], sizes[labels[j]]
            if m == 1:
                own.append(None)
                continue
            r = X[j] - means[k]
            mean = (m * means[k] - X[j]) / (m - 1)
            cov = (m * covs[k] - (m / (m - 1)) * np.outer(r, r)) / (m - 1)
            own.append((mean, *_eig_psd(cov)))

        def loo(w):
            comp = np.empty((n, K))
            dcomp = np.empty((n, K))
            for k in range(K):
                comp[:, k], dcomp[:, k] = spectral_log_pdf(X - means[k], *spectra[k], w)
            for j in range(n):
                k = labels[j]
                if own[j] is None:
                    comp[j, k], dcomp[j, k] = -np.inf, 0.0
                else:
                    mean, U, lam = own[j]
                    comp[j, k], dcomp[j, k] = spectral_log_pdf(X[j] - mean, U, lam, w)
            terms = comp + log_w
            total = logsumexp(terms, axis=1)
            resp = np.exp(terms - total[:, None])
            return float(np.sum(total)), float(np.sum(resp * dcomp))

        return loo

    def score_samples(self, X):
        check_is_fitted(self, "covariances_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        comp = np.column_stack([
            spectral_log_pdf(X - m, *_eig_psd(C), self.ridge_)[0]
            for m, C in zip(self.means_, self.sample_covariances_)
        ])
        return logsumexp(comp + np.log(self.weights_), axis=1)

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))


class DiagonalKDE(DensityMixin, BaseEstimator):
    """Gaussian KDE with one diagonal bandwidth matrix shared by all centres.

    Bandwidths (variances) maximize the leave-one-out log density by a
    safeguarded Newton iteration on their logarithms, started from
    ``var_d * N^(-2/(D+4))``.

    Parameters
    ----------
    max_iter : int
        Newton iteration cap.
    """

    def __init__(self, max_iter=100):
        self.max_iter = max_iter

    @staticmethod
    def _loo(X, u, need_hessian=True):
        n, D = X.shape
        w = np.exp(u)
        diff2 = (X[:, None, :] - X[None, :, :]) ** 2
        scaled = diff2 / w
        a = -0.5 * (D * LOG_2PI + np.sum(u) + np.sum(scaled, axis=-1))
        np.fill_diagonal(a, -np.inf)
        lse = logsumexp(a, axis=1)
        value = float(np.sum(lse) - n * np.log(n))
        if not need_hessian:
            return value, None, None
        r = np.exp(a - lse[:, None])
        g = -0.5 + 0.5 * scaled
        mean_g = np.einsum("ji,jid->jd", r, g)
        grad = mean_g.sum(axis=0)
        second = np.einsum("ji,jid,jie->de", r, g, g)
        curv = -0.5 * np.einsum("ji,jid->d", r, scaled)
        hess = second - mean_g.T @ mean_g + np.diag(curv)
        return value, grad, hess

    def fit(self, X, y=None):
        X = _check_fit_input(X)
        n, D = X.shape
        var = X.var(axis=0)
        scale = np.where(var > 0, var, 1.0)
        u = np.log(scale * n ** (-2.0 / (D + 4)))
        floor = np.log(1e-12 * scale)
        self.degenerate_ = bool(np.any(var <= 0))
        f, g, H = self._loo(X, u)
        for _ in range(self.max_iter):
            if np.any(u < floor):
                self.degenerate_ = True
                break
            try:
                evals = np.linalg.eigvalsh(H)
                step = -np.linalg.solve(H, g) if evals[-1] < 0 else g / max(np.max(np.abs(np.diag(H))), 1.0)
            except np.linalg.LinAlgError:
                step = g / max(np.abs(g).max(), 1.0)
            t = 1.0
            for _ in range(50):
                f_new = self._loo(X, u + t * step, need_hessian=False)[0]
                if np.isfinite(f_new) and f_new >= f:
                    break
                t *= 0.5
            else:
                break
            u = u + t * step
            f_old = f
            f, g, H = self._loo(X, u)
            if np.max(np.abs(t * step)) < 1e-12 or (f - f_old) <= 1e-15 * abs(f) and np.max(np.abs(g)) < 1e-8:
                break
        if np.any(u < floor):
            self.degenerate_ = True
        if self.degenerate_:
            warnings.warn("KDE bandwidth collapsed; data contain duplicate-only dimensions",
                          RuntimeWarning, stacklevel=2)
        self.centers_ = X
        self.widths_ = np.exp(u)
        self.loo_log_density_ = f
        self.n_features_in_ = D
        return self

    def score_samples(self, X):
        check_is_fitted(self, "widths_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        w = self.widths_
        diff2 = (X[:, None, :] - self.centers_[None, :, :]) ** 2
        a = -0.5 * (X.shape[1] * LOG_2PI + np.sum(np.log(w)) + np.sum(diff2 / w, axis=-1))
        return logsumexp(a, axis=1) - np.log(self.centers_.shape[0])

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))


class ManifoldParzen(DensityMixin, BaseEstimator):
    """Manifold Parzen windows with low-rank local covariances.

    Component ``i`` is ``N(z^i, w I + V_i V_i^T)`` where ``V_i`` holds the
    top ``n_components`` eigenpairs (scaled by the root eigenvalue) of the
    scatter of the ``n_neighbors`` nearest neighbours around ``z^i``.

    Parameters
    ----------
    n_components : int
        Rank ``d`` of the local covariance.
    n_neighbors : int
        Neighbourhood size ``r`` of the binary nearest-neighbour kernel.
    """

    def __init__(self, n_components=1, n_neighbors=5):
        self.n_components = n_components
        self.n_neighbors = n_neighbors

    def fit(self, X, y=None):
        X = _check_fit_input(X)
        n, D = X.shape
        d, r = self.n_components, self.n_neighbors
        if not 1 <= d < D:
            raise InvalidInputError(f"n_components must satisfy 1 <= d < D = {D}")
        if not 1 <= r < n:
            raise InvalidInputError(f"n_neighbors must satisfy 1 <= r < N = {n}")
        if r < d:
            warnings.warn(f"n_neighbors={r} < n_components={d}; local scatter may have rank < d",
                          RuntimeWarning, stacklevel=2)
        sq = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
        idx = np.arange(n)
        factors = np.zeros((n, D, d))
        for i in range(n):
            order = np.lexsort((idx, sq[i]))
            nbrs = order[order != i][:r]
            diff = X[i] - X[nbrs]
            lam, U = np.linalg.eigh(diff.T @ diff / r)
            lam, U = lam[::-1][:d], U[:, ::-1][:, :d]
            factors[i] = U * np.sqrt(np.maximum(lam, 0.0))
        self.centers_ = X
        self.factors_ = factors
        self.n_features_in_ = D
        spectra = [self._spectrum(V) for V in factors]
        resid = X[:, None, :] - X[None, :, :]

        def loo(w):
            comp = np.empty((n, n))
            dcomp = np.empty((n, n))
            for i, (U, lam) in enumerate(spectra):
                comp[:, i], dcomp[:, i] = spectral_log_pdf(resid[:, i, :], U, lam, w)
            np.fill_diagonal(comp, -np.inf)
            np.fill_diagonal(dcomp, 0.0)
            total = logsumexp(comp, axis=1)
            resp = np.exp(comp - total[:, None])
            return float(np.sum(total) - n * np.log(n - 1)), float(np.sum(resp * dcomp))

        w0 = 0.1 * float(np.mean(X.var(axis=0))) or 1.0
        self.ridge_, self.loo_log_density_ = _maximize_log_ridge(loo, w0)
        return self

    @staticmethod
    def _spectrum(V):
        norms = np.linalg.norm(V, axis=0)
        keep = norms > 0
        return V[:, keep] / norms[keep], norms[keep] ** 2

    def covariance(self, i):
        V = self.factors_[i]
        return self.ridge_ * np.eye(V.shape[0]) + V @ V.T

    def score_samples(self, X):
        check_is_fitted(self, "ridge_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        comp = np.column_stack([
            spectral_log_pdf(X - c, *self._spectrum(V), self.ridge_)[0]
            for c, V in zip(self.centers_, self.factors_)
        ])
        return logsumexp(comp, axis=1) - np.log(len(self.centers_))

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))


def fit_gm(Z, K, seed=0):
    return PenalizedGaussianMixture(n_clusters=K, random_state=seed).fit(Z)


def fit_kde(Z):
    return DiagonalKDE().fit(Z)


def fit_mp(Z, d, r):
    return ManifoldParzen(n_components=d, n_neighbors=r).fit(Z)


def baseline_log_density(model, z):
    """Log density of one point (1-D input) or of each row of a 2-D input."""
    z = np.asarray(z, dtype=float)
    out = model.score_samples(np.atleast_2d(z))
    return float(out[0]) if z.ndim == 1 else out
