"""Training objectives of the projected-mixture GPLVM and their gradients.

Three losses (all minimized) are provided:

* ``objective_lz`` -- negative GPLVM marginal likelihood of the data,
* ``objective_loo`` -- negative leave-one-out log density of the mixture,
* ``objective_lpo`` -- negative leave-P-out log density with greedy subsets.

Values and gradients are computed with torch autograd in float64. Gradients
are taken w.r.t. the latent points and the log-domain hyperparameters
``[log W, log sf2, log sn2, (log V)]``.
"""

import math
from dataclasses import dataclass

import numpy as np
import torch

from .exceptions import InvalidInputError, NumericalError
from .gp import COV_FLOOR
from .kernels import JITTER_GROWTH, JITTER_RETRIES, JITTER_START

__all__ = [
    "ObjectiveValue",
    "objective_lz",
    "objective_loo",
    "objective_lpo",
    "select_lpo_subsets",
    "loo_log_density_matrix",
    "lz_kernel_gradient",
    "evaluate_objective",
]

LOG_2PI = math.log(2.0 * math.pi)
OBJECTIVES = ("lz", "loo", "lpo")


@dataclass(frozen=True)
class ObjectiveValue:
    value: float
    grad_latents: np.ndarray
    grad_hyp: np.ndarray
    jitter: float = 0.0


def _tensor(a):
    return torch.as_tensor(np.asarray(a, dtype=float), dtype=torch.float64)


def _cholesky(K):
    n = K.shape[0]
    eye = torch.eye(n, dtype=K.dtype)
    base = JITTER_START * float(torch.diagonal(K).mean().detach())
    jitter = 0.0
    for attempt in range(JITTER_RETRIES + 1):
        L, info = torch.linalg.cholesky_ex(K + jitter * eye if jitter else K)
        if int(info) == 0 and bool(torch.all(torch.isfinite(L))):
            return L, jitter
        if attempt < JITTER_RETRIES:
            jitter = base if jitter == 0.0 else jitter * JITTER_GROWTH
    raise NumericalError(f"Cholesky factorization failed with jitter {jitter:.3g}", jitter=jitter)


class _Forward:
    """Shared GP quantities for one parameter setting."""

    def __init__(self, X, theta, Z, stochastic):
        n, d = X.shape
        self.n, self.d, self.D = n, d, Z.shape[1]
        self.X, self.Z, self.stochastic = X, Z, stochastic
        self.W = torch.exp(theta[:d])
        self.sf2 = torch.exp(theta[d])
        self.sn2 = torch.exp(theta[d + 1])
        self.V = torch.exp(theta[d + 2:]) if stochastic else None
        diff = X[:, None, :] - X[None, :, :]
        self.diff = diff
        self.Kf = self.sf2 * torch.exp(-0.5 * torch.sum(diff ** 2 / self.W, dim=-1))
        K = self.Kf + self.sn2 * torch.eye(n, dtype=X.dtype)
        self.L, self.jitter = _cholesky(K)
        self.Kinv = torch.cholesky_inverse(self.L)
        self.A = self.Kinv @ Z

    def log_det(self):
        return 2.0 * torch.sum(torch.log(torch.diagonal(self.L)))

    def mixture(self):
        """Kernel vectors (columns), component means and covariances."""
        if not self.stochastic:
            kt = self.Kf
            s = self.sn2 + self.jitter
            cov = self.sn2 + s * (1.0 - s * torch.diagonal(self.Kinv))
            return kt, kt.T @ self.A, cov
        W, V, X = self.W, self.V, self.X
        kt = self.sf2 * torch.rsqrt(torch.prod(V / W + 1.0)) * torch.exp(
            -0.5 * torch.sum(self.diff ** 2 / (V + W), dim=-1)
        )
        means = kt.T @ self.A
        c = 0.5 * W + V
        mid = 0.5 * (X[:, None, :] + X[None, :, :])
        # |mid_il - x_j|^2_c expanded to avoid an (N, N, N, d) intermediate
        centre = (
            torch.sum(mid ** 2 / c, dim=-1)[None, :, :]
            - 2.0 * torch.einsum("ild,jd->jil", mid / c, X)
            + torch.sum(X ** 2 / c, dim=-1)[:, None, None]
        )
        pair = torch.sum(self.diff ** 2 / (2.0 * W), dim=-1)
        scale = self.sf2 ** 2 * torch.rsqrt(torch.prod(2.0 * V / W + 1.0))
        Khat = scale * torch.exp(-0.5 * (pair[None, :, :] + centre))
        iso = self.sf2 + self.sn2 - torch.einsum("il,jil->j", self.Kinv, Khat)
        AKA = torch.einsum("id,jie->jde", self.A, Khat @ self.A)
        cov = iso[:, None, None] * torch.eye(self.D, dtype=X.dtype) + AKA
        cov = cov - means[:, :, None] * means[:, None, :]
        cov = 0.5 * (cov + cov.transpose(1, 2))
        with torch.no_grad():
            low = torch.linalg.eigvalsh(cov)[:, 0] < COV_FLOOR
        if bool(low.any()):
            evals, evecs = torch.linalg.eigh(cov[low])
            fixed = (evecs * torch.clamp(evals, min=COV_FLOOR)[:, None, :]) @ evecs.transpose(1, 2)
            cov = cov.clone()
            cov[low] = fixed
        return kt, means, cov

    def loo_log_densities(self):
        """``[i, j] -> log N(z^i | mu_j^{-i}, Sigma_j)`` as an ``(N, N)`` tensor."""
        kt, means, cov = self.mixture()
        G = self.Kinv @ kt
        coef = G / torch.diagonal(self.Kinv)[:, None]
        loo_means = means[None, :, :] - coef[:, :, None] * self.A[:, None, :]
        R = self.Z[:, None, :] - loo_means
        D = self.D
        if not self.stochastic:
            quad = torch.sum(R ** 2, dim=-1) / cov[None, :]
            return -0.5 * (D * (LOG_2PI + torch.log(cov))[None, :] + quad)
        Lc, info = torch.linalg.cholesky_ex(cov)
        if bool((info != 0).any()):
            raise NumericalError("component covariance is not positive definite")
        y = torch.linalg.solve_triangular(Lc, R.permute(1, 2, 0), upper=False)
        logdet = 2.0 * torch.sum(torch.log(torch.diagonal(Lc, dim1=1, dim2=2)), dim=-1)
        quad = torch.sum(y ** 2, dim=1).T
        return -0.5 * (D * LOG_2PI + logdet[None, :] + quad)


def _lz_value(fw):
    n, D = fw.n, fw.D
    return 0.5 * n * D * LOG_2PI + 0.5 * D * fw.log_det() + 0.5 * torch.sum(fw.A * fw.Z)


def _leave_out_value(fw, subsets):
    Lmat = fw.loo_log_densities()
    n = fw.n
    keep = torch.zeros((n, n), dtype=torch.bool)
    rows = torch.arange(n)[:, None]
    keep[rows, torch.as_tensor(subsets)] = True
    n_keep = subsets.shape[1]
    excluded = torch.as_tensor(
        np.array([np.flatnonzero(~row) for row in keep.numpy()]), dtype=torch.long
    )
    scored = Lmat[excluded]
    scored = scored.masked_fill(~keep[:, None, :], float("-inf"))
    lse = torch.logsumexp(scored, dim=-1)
    return -torch.sum(lse - math.log(n_keep))


def _check_kind(kind, n, P):
    if kind not in OBJECTIVES:
        raise InvalidInputError(f"unknown objective {kind!r}; choose from {OBJECTIVES}")
    if kind in ("loo", "lpo") and n < 2:
        raise InvalidInputError("leave-out objectives need at least two points")
    if kind == "lpo" and not (P is not None and 1 <= P <= n - 1):
        raise InvalidInputError(f"P must satisfy 1 <= P <= N-1 = {n - 1}, got {P}")


def loo_subsets(n):
    """Index sets ``I \\ {k}`` for plain leave-one-out."""
    return np.array([np.delete(np.arange(n), k) for k in range(n)], dtype=int).reshape(n, n - 1)


def evaluate_objective(kind, latents, theta, targets, stochastic, P=None, subsets=None,
                       wrt=("latents", "hyp")):
    """Evaluate an objective from raw arrays.

    Parameters
    ----------
    kind : {'lz', 'loo', 'lpo'}
    latents : array (N, d)
    theta : array
        Log-domain hyperparameters, ``d + 2`` entries (deterministic) or
        ``2 d + 2`` (stochastic).
    targets : array (N, D)
    stochastic : bool
    P : int, optional
        Leave-out count for ``'lpo'``.
    subsets : int array (N, N - P), optional
        Fixed LPO index sets. Selected at the current parameters if omitted.
    wrt : tuple of str
        Blocks for which gradients are needed; others are returned as zeros.

    Returns
    -------
    ObjectiveValue
    """
    n = np.shape(latents)[0]
    _check_kind(kind, n, P)
    X = _tensor(latents).requires_grad_("latents" in wrt)
    th = _tensor(theta).requires_grad_("hyp" in wrt)
    Z = _tensor(targets)
    fw = _Forward(X, th, Z, stochastic)
    if kind == "lz":
        value = _lz_value(fw)
    else:
        if kind == "loo":
            subsets = loo_subsets(n)
        elif subsets is None:
            with torch.no_grad():
                subsets = _select(fw.loo_log_densities().numpy(), P)
        value = _leave_out_value(fw, np.asarray(subsets, dtype=int))
    if not torch.isfinite(value):
        raise NumericalError(f"objective evaluated to {float(value)}")
    leaves = [t for t in (X, th) if t.requires_grad]
    grads = torch.autograd.grad(value, leaves) if leaves else ()
    grads = iter(grads)
    gX = next(grads).numpy() if X.requires_grad else np.zeros(X.shape)
    gth = next(grads).numpy() if th.requires_grad else np.zeros(th.shape)
    return ObjectiveValue(float(value.detach()), gX, gth, fw.jitter)


def _model_args(model):
    return model.latents, model.hyp.to_log_vector(model.stochastic), model.targets, model.stochastic


def objective_lz(model):
    """Negative log marginal likelihood of the D independent GP regressions."""
    return evaluate_objective("lz", *_model_args(model))


def objective_loo(model):
    """Negative leave-one-out log density with the left-out pair removed from the GP mean."""
    return evaluate_objective("loo", *_model_args(model))


def objective_lpo(model, P, subsets=None):
    """Negative leave-P-out log density.

    Subsets are held fixed during the evaluation; when omitted they are
    chosen at the current parameters with :func:`select_lpo_subsets`.
    """
    return evaluate_objective("lpo", *_model_args(model), P=P, subsets=subsets)


def loo_log_density_matrix(model):
    """``M[i, j] = log N(z^i | mu_j^{-i}, Sigma_j)`` for the current model."""
    X, theta, Z, stochastic = _model_args(model)
    with torch.no_grad():
        fw = _Forward(_tensor(X), _tensor(theta), _tensor(Z), stochastic)
        return fw.loo_log_densities().numpy()


def _select(Lmat, P):
    n = Lmat.shape[0]
    idx = np.arange(n)
    # ascending density, ties resolved towards the smaller index; keep the N-P lowest
    return np.array([np.lexsort((idx, Lmat[k]))[: n - P] for k in range(n)], dtype=int)


def select_lpo_subsets(model, P):
    """For each point ``k`` keep the ``N - P`` components explaining ``z^k`` worst.

    Returns
    -------
    ndarray of shape (N, N - P)
        Row ``k`` lists the retained component indices ``I_k``.
    """
    n = model.n_points
    _check_kind("lpo", n, P)
    return _select(loo_log_density_matrix(model), P)


def lz_kernel_gradient(K, Z):
    """``dL/dK = K^-1 (Z Z^T - D K) K^-1 / 2`` of the log marginal likelihood.

    ``Z`` holds one observation per row, so ``Z Z^T`` is the ``N x N`` Gram matrix.
    """
    K = np.asarray(K, dtype=float)
    Z = np.asarray(Z, dtype=float)
    K_inv = np.linalg.inv(K)
    return 0.5 * K_inv @ (Z @ Z.T - Z.shape[1] * K) @ K_inv
