"""Versioned JSON serialization of fitted density models."""

import json
from pathlib import Path

import numpy as np

from .baselines import DiagonalKDE, ManifoldParzen, PenalizedGaussianMixture
from .estimator import GPLVMDensity
from .exceptions import InvalidInputError
from .preprocessing import Preprocessor

__all__ = ["FORMAT", "VERSION", "model_to_dict", "model_from_dict", "save_model", "load_model"]

FORMAT = "gplvm-density-model"
VERSION = 1


def _arr(a):
    return np.asarray(a, dtype=float).tolist()


def model_to_dict(model, preprocessor=None, method=None, params=None):
    """Plain-data record of a fitted model and the preprocessing it expects.

    GPLVM models store latents ``X``, log-domain hyperparameters ``theta``
    and the mixture centres ``Zbar``; baselines store their fitted
    parameters.
    """
    if isinstance(model, GPLVMDensity):
        st = model.state_
        body = {
            "kind": "gplvm",
            "X": _arr(st.latents),
            "theta": _arr(st.hyp.to_log_vector()),
            "Zbar": _arr(st.targets),
            "stochastic": bool(st.stochastic),
            "estimator_params": model.get_params(),
        }
    elif isinstance(model, PenalizedGaussianMixture):
        body = {
            "kind": "gm",
            "weights": _arr(model.weights_),
            "means": _arr(model.means_),
            "sample_covariances": _arr(model.sample_covariances_),
            "ridge": float(model.ridge_),
            "estimator_params": model.get_params(),
        }
    elif isinstance(model, DiagonalKDE):
        body = {"kind": "kde", "centers": _arr(model.centers_), "widths": _arr(model.widths_),
                "estimator_params": model.get_params()}
    elif isinstance(model, ManifoldParzen):
        body = {"kind": "mp", "centers": _arr(model.centers_), "factors": _arr(model.factors_),
                "ridge": float(model.ridge_), "estimator_params": model.get_params()}
    else:
        raise InvalidInputError(f"cannot serialize {type(model).__name__}")
    return {
        "format": FORMAT,
        "version": VERSION,
        "method": method or body["kind"],
        "params": params or {},
        "model": body,
        "preprocessing": preprocessor.to_dict() if preprocessor is not None else None,
    }


def model_from_dict(record):
    """Inverse of :func:`model_to_dict`; returns ``(model, preprocessor)``."""
    if record.get("format") != FORMAT:
        raise InvalidInputError("not a serialized density model")
    if record.get("version") != VERSION:
        raise InvalidInputError(f"unsupported model version {record.get('version')!r}")
    body = record["model"]
    kind = body["kind"]
    params = body.get("estimator_params", {})
    if kind == "gplvm":
        params = {k: v for k, v in params.items() if k not in ("n_latent", "stochastic")}
        model = GPLVMDensity.from_state(body["X"], body["theta"], np.asarray(body["Zbar"]),
                                        body["stochastic"], **params)
    elif kind == "gm":
        model = PenalizedGaussianMixture(**params)
        model.weights_ = np.asarray(body["weights"])
        model.means_ = np.asarray(body["means"])
        model.sample_covariances_ = np.asarray(body["sample_covariances"])
        model.ridge_ = body["ridge"]
        D = model.means_.shape[1]
        model.covariances_ = model.sample_covariances_ + model.ridge_ * np.eye(D)
        model.n_features_in_ = D
    elif kind == "kde":
        model = DiagonalKDE(**params)
        model.centers_ = np.asarray(body["centers"])
        model.widths_ = np.asarray(body["widths"])
        model.n_features_in_ = model.centers_.shape[1]
    elif kind == "mp":
        model = ManifoldParzen(**params)
        model.centers_ = np.asarray(body["centers"])
        model.factors_ = np.asarray(body["factors"])
        model.ridge_ = body["ridge"]
        model.n_features_in_ = model.centers_.shape[1]
    else:
        raise InvalidInputError(f"unknown model kind {kind!r}")
    pre = record.get("preprocessing")
    return model, Preprocessor.from_dict(pre) if pre is not None else None


def save_model(path, model, preprocessor=None, method=None, params=None):
    Path(path).write_text(json.dumps(model_to_dict(model, preprocessor, method, params), indent=1))


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
