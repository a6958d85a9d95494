"""ARD squared-exponential kernel, PSD factorization and expected kernels.

Latent points are stored row-wise: a latent configuration is an ``(N, d)``
array whose rows are the points ``x^i``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import InvalidInputError, NumericalError

__all__ = [
    "Hyperparams",
    "PsdFactor",
    "ard_kernel",
    "kernel_matrix",
    "cross_covariance",
    "factorize_psd",
    "downdate_inverse",
    "expected_k",
    "expected_kk",
]

JITTER_START = 1e-10
JITTER_GROWTH = 10.0
JITTER_RETRIES = 6


@dataclass(frozen=True)
class Hyperparams:
    """GP and latent-density hyperparameters.

    Parameters
    ----------
    lengthscales_sq : array of shape (d,)
        Squared ARD length scales (the diagonal of ``W``).
    signal_var : float
        Signal variance ``sigma_f^2``.
    noise_var : float
        Noise variance ``sigma_eta^2``.
    latent_var : array of shape (d,)
        Diagonal of the latent input covariance ``V_x``. All zeros selects
        the deterministic (Dirac) latent mixture.
    """

    lengthscales_sq: np.ndarray
    signal_var: float
    noise_var: float
    latent_var: np.ndarray = field(default=None)

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.lengthscales_sq, dtype=float)).copy()
        v = self.latent_var
        v = np.zeros_like(w) if v is None else np.atleast_1d(np.asarray(v, dtype=float)).copy()
        if w.ndim != 1 or v.shape != w.shape:
            raise InvalidInputError("lengthscales_sq and latent_var must be vectors of equal length")
        sf2, sn2 = float(self.signal_var), float(self.noise_var)
        if not (np.all(np.isfinite(w)) and np.all(w > 0)):
            raise InvalidInputError("lengthscales_sq must be finite and strictly positive")
        if not (np.isfinite(sf2) and sf2 > 0 and np.isfinite(sn2) and sn2 > 0):
            raise InvalidInputError("signal_var and noise_var must be finite and strictly positive")
        if not (np.all(np.isfinite(v)) and np.all(v >= 0)):
            raise InvalidInputError("latent_var must be finite and non-negative")
        w.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "lengthscales_sq", w)
        object.__setattr__(self, "latent_var", v)
        object.__setattr__(self, "signal_var", sf2)
        object.__setattr__(self, "noise_var", sn2)

    @property
    def n_latent(self):
        return self.lengthscales_sq.shape[0]

    @property
    def stochastic(self):
        """True when every latent variance is strictly positive."""
        return bool(np.all(self.latent_var > 0))

    def to_log_vector(self, stochastic=None):
        """Free parameters in log domain: ``[log W, log sf2, log sn2, (log V)]``."""
        if stochastic is None:
            stochastic = self.stochastic
        parts = [np.log(self.lengthscales_sq), [np.log(self.signal_var), np.log(self.noise_var)]]
        if stochastic:
            if not self.stochastic:
                raise InvalidInputError("log parameterization needs strictly positive latent_var")
            parts.append(np.log(self.latent_var))
        return np.concatenate(parts)

    @classmethod
    def from_log_vector(cls, theta, n_latent, stochastic):
        theta = np.asarray(theta, dtype=float)
        d = n_latent
        expected = 2 * d + 2 if stochastic else d + 2
        if theta.shape != (expected,):
            raise InvalidInputError(f"expected {expected} log hyperparameters, got {theta.shape}")
        e = np.exp(theta)
        latent = e[d + 2:] if stochastic else np.zeros(d)
        return cls(e[:d], e[d], e[d + 1], latent)

    def with_latent_var(self, latent_var):
        return Hyperparams(self.lengthscales_sq, self.signal_var, self.noise_var, latent_var)


@dataclass(frozen=True)
class PsdFactor:
    """Cholesky factor of ``M + jitter_used * I``."""

    lower_factor: np.ndarray
    log_det: float
    jitter_used: float

    @property
    def matrix_dim(self):
        return self.lower_factor.shape[0]

    def solve(self, b):
        y = solve_triangular(self.lower_factor, b, lower=True, check_finite=False)
        return solve_triangular(self.lower_factor.T, y, lower=False, check_finite=False)

    def inverse(self):
        inv = self.solve(np.eye(self.matrix_dim))
        return 0.5 * (inv + inv.T)


def _check_points(X, name="X"):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D array of latent points")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError(f"{name} contains non-finite coordinates")
    return X


def _check_dim(X, hyp):
    if X.shape[1] != hyp.n_latent:
        raise InvalidInputError(
            f"latent dimension {X.shape[1]} does not match hyperparameters ({hyp.n_latent})"
        )


def ard_kernel(xi, xj, hyp, same_index=False):
    """Covariance between two latent points, noise added only when ``same_index``."""
    xi = _check_points(xi, "xi")[0]
    xj = _check_points(xj, "xj")[0]
    if xi.shape != xj.shape:
        raise InvalidInputError("latent points have different dimensions")
    _check_dim(xi[None], hyp)
    diff = xi - xj
    value = hyp.signal_var * np.exp(-0.5 * np.sum(diff * diff / hyp.lengthscales_sq))
    if same_index:
        value += hyp.noise_var
    return float(value)


def _scaled_sqdist(A, B, scale):
    diff = A[:, None, :] - B[None, :, :]
    return np.sum(diff * diff / scale, axis=-1)


def kernel_matrix(X, hyp):
    """Training covariance ``K`` of shape ``(N, N)``, noise on the diagonal."""
    X = _check_points(X)
    _check_dim(X, hyp)
    K = hyp.signal_var * np.exp(-0.5 * _scaled_sqdist(X, X, hyp.lengthscales_sq))
    K[np.diag_indices_from(K)] += hyp.noise_var
    return K


def cross_covariance(X, xstar, hyp):
    """Noise-free vector ``k_*`` of covariances between ``X`` and ``xstar``."""
    X = _check_points(X)
    xstar = _check_points(xstar, "xstar")[0]
    _check_dim(X, hyp)
    _check_dim(xstar[None], hyp)
    return hyp.signal_var * np.exp(-0.5 * _scaled_sqdist(X, xstar[None], hyp.lengthscales_sq)[:, 0])


def factorize_psd(M, max_retries=JITTER_RETRIES):
    """Cholesky factorization with escalating diagonal jitter.

    The first attempt uses no jitter; retries start at ``1e-10`` times the
    mean diagonal and grow tenfold each time.

    Raises
    ------
    NumericalError
        If the matrix is still not positive definite after ``max_retries``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError("factorize_psd expects a square matrix")
    if not np.all(np.isfinite(M)):
        raise InvalidInputError("matrix contains non-finite entries")
    n = M.shape[0]
    base = JITTER_START * max(float(np.mean(np.diag(M))), np.finfo(float).tiny) if n else 0.0
    jitter = 0.0
    for attempt in range(max_retries + 1):
        try:
            L = np.linalg.cholesky(M + jitter * np.eye(n) if jitter else M)
        except np.linalg.LinAlgError:
            L = None
        if L is not None and np.all(np.diag(L) > 0):
            return PsdFactor(L, float(2.0 * np.sum(np.log(np.diag(L)))), jitter)
        if attempt == max_retries:
            break
        jitter = base if jitter == 0.0 else jitter * JITTER_GROWTH
    raise NumericalError(f"Cholesky factorization failed with jitter {jitter:.3g}", jitter=jitter)


def downdate_inverse(K_inv, i):
    """Inverse of ``K`` with row and column ``i`` removed, from ``K^{-1}``.

    Uses the block identity
    ``inv(K_{-i}) = Kinv_{-i,-i} - Kinv_{-i,i} Kinv_{i,-i} / Kinv_{ii}``.
    """
    K_inv = np.asarray(K_inv, dtype=float)
    n = K_inv.shape[0]
    if not 0 <= i < n:
        raise InvalidInputError(f"index {i} out of range for size {n}")
    pivot = K_inv[i, i]
    if not pivot > 0:
        raise NumericalError(f"K^-1[{i},{i}] = {pivot:.3g} is not positive; matrix was not PD")
    keep = np.arange(n) != i
    col = K_inv[keep, i]
    return K_inv[np.ix_(keep, keep)] - np.outer(col, K_inv[i, keep]) / pivot


def expected_k(X, xstar, hyp):
    """``E[k(x^i, x)]`` for ``x ~ N(xstar, diag(latent_var))``.

    Falls back to the noise-free cross covariance when any latent
    variance is zero.
    """
    X = _check_points(X)
    xstar = _check_points(xstar, "xstar")[0]
    _check_dim(X, hyp)
    if not hyp.stochastic:
        return cross_covariance(X, xstar, hyp)
    w, v = hyp.lengthscales_sq, hyp.latent_var
    scale = hyp.signal_var / np.sqrt(np.prod(v / w + 1.0))
    return scale * np.exp(-0.5 * _scaled_sqdist(X, xstar[None], v + w)[:, 0])


def expected_kk(X, xstar, hyp):
    """``E[k k^T]`` for ``x ~ N(xstar, diag(latent_var))``, shape ``(N, N)``.

    Entry ``(i, j)`` equals ``k_i k_j |2 V W^-1 + I|^{-1/2}
    exp(+m^T D^{-1} m)`` with ``m = (x^i + x^j)/2 - xstar`` and
    ``D = W V^-1 W / 2 + W``. It is evaluated in the equivalent overflow-free
    form ``sf2^2 |2 V W^-1 + I|^{-1/2} exp(-|x^i - x^j|^2_{(2W)^-1} / 2)
    exp(-|m|^2_{(W/2 + V)^-1} / 2)``. With zero latent variance the limit
    ``k_* k_*^T`` is returned.
    """
    X = _check_points(X)
    xstar = _check_points(xstar, "xstar")[0]
    _check_dim(X, hyp)
    if not hyp.stochastic:
        k = cross_covariance(X, xstar, hyp)
        return np.outer(k, k)
    w, v = hyp.lengthscales_sq, hyp.latent_var
    scale = hyp.signal_var ** 2 / np.sqrt(np.prod(2.0 * v / w + 1.0))
    pair = _scaled_sqdist(X, X, 2.0 * w)
    mid = 0.5 * (X[:, None, :] + X[None, :, :]) - xstar
    centre = np.sum(mid * mid / (0.5 * w + v), axis=-1)
    out = scale * np.exp(-0.5 * (pair + centre))
    return 0.5 * (out + out.T)
