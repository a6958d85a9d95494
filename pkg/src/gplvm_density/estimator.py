"""Scikit-learn style front end for the GPLVM projected-mixture density."""

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import InvalidInputError
from .kernels import Hyperparams
from .mixture import ModelState, project_mixture
from .training import TrainConfig, train

__all__ = ["GPLVMDensity"]


class GPLVMDensity(DensityMixin, BaseEstimator):
    """Density model: an ``N``-component Gaussian mixture obtained by pushing
    one latent point per training row through a GP map.

    Parameters
    ----------
    n_latent : int, default=2
        Latent dimension ``d``.
    objective : {'lz', 'loo', 'lpo'}, default='lpo'
        Training criterion: GP marginal likelihood, leave-one-out or
        leave-P-out mixture density.
    n_leave_out : int, default=5
        ``P`` for the leave-P-out objective.
    stochastic : bool, default=False
        Treat latent points as Gaussians with learned variance; component
        covariances become full ``D x D`` matrices. Ignored for ``'lz'``.
    n_steps : int, default=600
        Total conjugate-gradient steps over all blocks.
    block_period : int, default=10
        CG steps per block before switching between latents and
        hyperparameters.
    tol : float, default=1e-9
        Relative-decrease convergence threshold of each block.
    random_state : int, default=0
        Recorded for reproducibility; initialization itself is deterministic.

    Attributes
    ----------
    state_ : ModelState
        Trained latents, hyperparameters and training data.
    mixture_ : ProjectedMixture
        The observation-space mixture used for scoring.
    trace_ : TrainTrace
        Objective values and timings of the run.
    """

    def __init__(self, n_latent=2, objective="lpo", n_leave_out=5, stochastic=False,
                 n_steps=600, block_period=10, tol=1e-9, random_state=0):
        self.n_latent = n_latent
        self.objective = objective
        self.n_leave_out = n_leave_out
        self.stochastic = stochastic
        self.n_steps = n_steps
        self.block_period = block_period
        self.tol = tol
        self.random_state = random_state

    def _config(self):
        return TrainConfig(
            n_latent=self.n_latent, objective=self.objective, P=self.n_leave_out,
            stochastic=self.stochastic, total_steps=self.n_steps,
            block_period=self.block_period, convergence_tol=self.tol, seed=self.random_state,
        )

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64, ensure_min_samples=2)
        self.trace_ = train(X, self._config())
        self._set_state(self.trace_.final_state)
        return self

    def _set_state(self, state):
        self.state_ = state
        self.mixture_ = project_mixture(state)
        self.n_features_in_ = state.n_outputs
        return self

    @classmethod
    def from_state(cls, latents, theta, targets, stochastic, **params):
        """Rebuild a fitted estimator from latents and log-domain hyperparameters."""
        latents = np.asarray(latents, dtype=float)
        hyp = Hyperparams.from_log_vector(np.asarray(theta, dtype=float), latents.shape[1], stochastic)
        est = cls(n_latent=latents.shape[1], stochastic=stochastic, **params)
        return est._set_state(ModelState(latents, hyp, targets))

    def score_samples(self, X):
        """Log density of each row of ``X``."""
        check_is_fitted(self, "mixture_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self.mixture_.log_density(X)

    def score(self, X, y=None):
        """Mean log density of the rows of ``X``."""
        return float(np.mean(self.score_samples(X)))
