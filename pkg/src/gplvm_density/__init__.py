"""Density estimation with Gaussian process latent variable models.

The main estimator, :class:`GPLVMDensity`, represents data as a Gaussian
mixture obtained by mapping latent points (Diracs or Gaussians) through a
Gaussian-process regression, and trains it with leave-P-out density
objectives. Three classical reference estimators are included for
comparison, together with a small benchmark harness.
"""

from .baselines import DiagonalKDE, ManifoldParzen, PenalizedGaussianMixture
from .datasets import Dataset, load_dataset, parse_svmlight, write_svmlight
from .estimator import GPLVMDensity
from .exceptions import InvalidInputError, NumericalError, ParseError
from .kernels import Hyperparams
from .mixture import ModelState, ProjectedMixture, project_mixture
from .preprocessing import Preprocessor
from .training import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "GPLVMDensity",
    "PenalizedGaussianMixture",
    "DiagonalKDE",
    "ManifoldParzen",
    "Preprocessor",
    "Dataset",
    "load_dataset",
    "parse_svmlight",
    "write_svmlight",
    "Hyperparams",
    "ModelState",
    "ProjectedMixture",
    "project_mixture",
    "TrainConfig",
    "train",
    "InvalidInputError",
    "NumericalError",
    "ParseError",
]
