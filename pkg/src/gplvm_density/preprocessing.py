"""Raw / unit-variance / whitening preprocessing with its log-Jacobian."""

import warnings

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import InvalidInputError

__all__ = ["Preprocessor", "preprocess", "MODES"]

MODES = ("raw", "scaled", "whitened")
_ALIASES = {"r": "raw", "s": "scaled", "w": "whitened"}
EIG_FLOOR = 1e-8


def _mode(mode):
    mode = _ALIASES.get(mode, mode)
    if mode not in MODES:
        raise InvalidInputError(f"unknown preprocessing {mode!r}; choose from {MODES} or r/s/w")
    return mode


class Preprocessor(TransformerMixin, BaseEstimator):
    """Affine map ``z -> (z - shift_) @ transform_.T`` fitted on training data.

    ``log_abs_det_`` is ``log |det transform_|``: a log density evaluated in
    the transformed space plus this constant is the log density in the raw
    space.

    Parameters
    ----------
    mode : {'raw', 'scaled', 'whitened'} or {'r', 's', 'w'}
        ``scaled`` centres and divides each feature by its standard
        deviation; ``whitened`` centres and decorrelates to identity
        covariance, with eigenvalues floored at ``1e-8`` times the largest.
    """

    def __init__(self, mode="raw"):
        self.mode = mode

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        mode = _mode(self.mode)
        n, D = X.shape
        self.flagged_dims_ = np.zeros(D, dtype=bool)
        if mode == "raw":
            shift, transform = np.zeros(D), np.eye(D)
        elif mode == "scaled":
            shift = X.mean(axis=0)
            std = X.std(axis=0)
            self.flagged_dims_ = std <= 0
            if self.flagged_dims_.any():
                warnings.warn(f"zero-variance features {np.flatnonzero(self.flagged_dims_).tolist()} left unscaled",
                              RuntimeWarning, stacklevel=2)
            transform = np.diag(1.0 / np.where(self.flagged_dims_, 1.0, std))
        else:
            shift = X.mean(axis=0)
            Xc = X - shift
            evals, evecs = np.linalg.eigh(Xc.T @ Xc / n)
            if not evals[-1] > 0:
                raise InvalidInputError("cannot whiten data with zero covariance")
            floor = EIG_FLOOR * evals[-1]
            self.flagged_dims_ = evals < floor
            transform = (evecs / np.sqrt(np.maximum(evals, floor))).T
        self.shift_ = shift
        self.transform_ = transform
        self.log_abs_det_ = float(np.linalg.slogdet(transform)[1])
        self.n_features_in_ = D
        return self

    def transform(self, X):
        check_is_fitted(self, "transform_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return (X - self.shift_) @ self.transform_.T

    def inverse_transform(self, X):
        check_is_fitted(self, "transform_")
        return np.asarray(X) @ np.linalg.inv(self.transform_).T + self.shift_

    def to_dict(self):
        check_is_fitted(self, "transform_")
        return {
            "mode": _mode(self.mode),
            "shift": self.shift_.tolist(),
            "transform": self.transform_.tolist(),
            "log_abs_det": self.log_abs_det_,
        }

    @classmethod
    def from_dict(cls, record):
        pre = cls(record["mode"])
        pre.shift_ = np.asarray(record["shift"], dtype=float)
        pre.transform_ = np.asarray(record["transform"], dtype=float)
        pre.log_abs_det_ = float(record["log_abs_det"])
        pre.n_features_in_ = pre.shift_.shape[0]
        pre.flagged_dims_ = np.zeros(pre.n_features_in_, dtype=bool)
        return pre


def preprocess(train, mode):
    """Fit a :class:`Preprocessor` on ``train`` and return it with the transformed data."""
    pre = Preprocessor(mode).fit(train)
    return pre, pre.transform(train)
