"""Initialization and the alternating latent/hyperparameter CG schedule."""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from .exceptions import InvalidInputError
from .kernels import Hyperparams
from .mixture import ModelState
from .objectives import OBJECTIVES, _select, evaluate_objective, loo_log_density_matrix
from .optim import cg_minimize

__all__ = ["TrainConfig", "TrainTrace", "init_latents", "init_hyperparams", "train"]


@dataclass(frozen=True)
class TrainConfig:
    """Settings of one training run.

    ``total_steps`` counts CG steps over all blocks; blocks of
    ``block_period`` steps alternate between the latents and the
    hyperparameters, starting with the latents.
    """

    n_latent: int = 2
    objective: str = "lpo"
    P: int = 5
    stochastic: bool = False
    total_steps: int = 600
    block_period: int = 10
    convergence_tol: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise InvalidInputError(f"objective must be one of {OBJECTIVES}")
        if self.total_steps < 0 or self.block_period < 1:
            raise InvalidInputError("total_steps must be >= 0 and block_period >= 1")
        if self.objective == "lpo" and (self.P is None or self.P < 1):
            raise InvalidInputError("LPO training needs P >= 1")
        if self.n_latent < 1:
            raise InvalidInputError("n_latent must be >= 1")


@dataclass
class TrainTrace:
    """Per-step objective values and timing of a training run.

    ``values[k]`` is the objective after step ``k`` of block
    ``blocks[k]``; ``block_start_values`` holds the value at the start of
    each block (LPO subsets may change between blocks).
    """

    values: list = field(default_factory=list)
    step_times: list = field(default_factory=list)
    blocks: list = field(default_factory=list)
    block_start_values: list = field(default_factory=list)
    block_kinds: list = field(default_factory=list)
    jitter_events: list = field(default_factory=list)
    line_search_failures: int = 0
    initial_state: ModelState = None
    final_state: ModelState = None

    @property
    def n_steps(self):
        return len(self.values)


def init_latents(Z, d):
    """Top-``d`` principal component scores of ``Z`` with unit variance.

    Each principal direction is signed so that its largest-magnitude
    loading is positive.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2:
        raise InvalidInputError("Z must be a 2-D array (N, D)")
    n, D = Z.shape
    if not 1 <= d <= min(D, n - 1):
        raise InvalidInputError(f"latent dimension must satisfy 1 <= d <= min(D, N-1) = {min(D, n - 1)}")
    Zc = Z - Z.mean(axis=0)
    evals, evecs = np.linalg.eigh(Zc.T @ Zc / n)
    U = evecs[:, ::-1][:, :d]
    pivot = np.argmax(np.abs(U), axis=0)
    U = U * np.sign(U[pivot, np.arange(d)])
    scores = Zc @ U
    std = scores.std(axis=0)
    if np.any(std <= 1e-12 * max(1.0, float(np.sqrt(evals[-1])))):
        raise InvalidInputError("data has fewer than d directions of non-zero variance")
    return scores / std


def init_hyperparams(Z, X, stochastic=False):
    """Data-driven starting hyperparameters.

    Squared length scales are the squared median pairwise latent distance
    per dimension, the signal variance is the mean per-dimension data
    variance and the noise variance is 1% of it. Latent variances start
    at 0.1 (stochastic) or 0.
    """
    Z = np.asarray(Z, dtype=float)
    X = np.asarray(X, dtype=float)
    if Z.ndim != 2 or X.ndim != 2 or Z.shape[0] != X.shape[0]:
        raise InvalidInputError("Z and X must be 2-D with the same number of rows")
    if X.shape[0] < 2:
        raise InvalidInputError("need at least two points")
    med = np.array([np.median(pdist(X[:, [k]])) for k in range(X.shape[1])])
    if np.any(med <= 0):
        raise InvalidInputError("zero median latent distance; latents are degenerate")
    signal = float(np.mean(Z.var(axis=0)))
    if not signal > 0:
        raise InvalidInputError("data has zero variance")
    latent = np.full(X.shape[1], 0.1) if stochastic else np.zeros(X.shape[1])
    return Hyperparams(med ** 2, signal, 0.01 * signal, latent)


def train(Z, config):
    """Fit latents and hyperparameters by alternating CG blocks.

    For the LPO objective the subsets are re-selected at each block
    boundary and held fixed inside the block.

    Returns
    -------
    TrainTrace
    """
    Z = np.asarray(Z, dtype=float)
    X = init_latents(Z, config.n_latent)
    stochastic = config.stochastic and config.objective != "lz"
    hyp = init_hyperparams(Z, X, stochastic)
    theta = hyp.to_log_vector(stochastic)
    trace = TrainTrace()
    trace.initial_state = ModelState(X, hyp, Z)
    n, d = X.shape
    kind, P = config.objective, config.P
    if kind == "lpo" and not P <= n - 1:
        raise InvalidInputError(f"P={P} needs at least P+1 training points")

    done, block, stalled = 0, 0, 0
    while done < config.total_steps:
        budget = min(config.block_period, config.total_steps - done)
        on_latents = block % 2 == 0
        subsets = None
        if kind == "lpo":
            state = ModelState(X, Hyperparams.from_log_vector(theta, d, stochastic), Z)
            subsets = _select(loo_log_density_matrix(state), P)

        if on_latents:
            def fun(x, theta=theta, subsets=subsets):
                ov = evaluate_objective(kind, x.reshape(n, d), theta, Z, stochastic, P, subsets,
                                        wrt=("latents",))
                _note_jitter(trace, ov)
                return ov.value, ov.grad_latents.ravel()
            x0 = X.ravel()
        else:
            def fun(t, X=X, subsets=subsets):
                ov = evaluate_objective(kind, X, t, Z, stochastic, P, subsets, wrt=("hyp",))
                _note_jitter(trace, ov)
                return ov.value, ov.grad_hyp
            x0 = theta

        start = time.perf_counter()
        x_new, cg = cg_minimize(fun, x0, max_steps=budget, tol=config.convergence_tol)
        elapsed = time.perf_counter() - start
        per_step = elapsed / max(cg.n_steps, 1)
        trace.block_start_values.append(cg.values[0])
        trace.block_kinds.append("latents" if on_latents else "hyp")
        trace.values.extend(cg.values[1:])
        trace.step_times.extend([per_step] * cg.n_steps)
        trace.blocks.extend([block] * cg.n_steps)
        if cg.status == "line_search_failed":
            trace.line_search_failures += 1
        if on_latents:
            X = x_new.reshape(n, d)
        else:
            theta = x_new
        # a block that cannot move either parameter group twice in a row ends training
        stalled = stalled + 1 if cg.n_steps == 0 or cg.values[-1] >= cg.values[0] else 0
        if stalled >= 2:
            break
        done += budget
        block += 1

    trace.final_state = ModelState(X, Hyperparams.from_log_vector(theta, d, stochastic), Z)
    return trace


def _note_jitter(trace, ov):
    if ov.jitter > 0:
        trace.jitter_events.append(ov.jitter)
