"""Split protocol, method grids and result persistence for benchmarks."""

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baselines import DiagonalKDE, ManifoldParzen, PenalizedGaussianMixture
from .estimator import GPLVMDensity
from .exceptions import InvalidInputError
from .preprocessing import Preprocessor, _mode

__all__ = [
    "METHODS",
    "RunSpec",
    "ExperimentResult",
    "make_splits",
    "evaluate_model",
    "build_model",
    "method_grid",
    "build_grid",
    "run_one",
    "run_grid",
    "summarize",
    "best_of",
    "write_outputs",
    "CSV_COLUMNS",
]

METHODS = ("lz", "lpo-det", "lpo-rd", "gm", "kde", "mp")
GPLVM_METHODS = ("lz", "lpo-det", "lpo-rd")
LATENT_DIMS = (1, 2, 3)
LEAVE_OUT = (1, 2, 5, 10, 15)
GM_CLUSTERS = tuple(range(1, 14))
MP_DIM_PERCENT = (5, 12, 19, 26, 33, 40)
MP_NEIGHBOR_PERCENT = (5, 10, 15, 20, 25, 30)
CSV_COLUMNS = ("dataset", "method", "params", "n_tr", "split", "preproc", "log_density",
               "log_density_raw_space")

# training the GPLVM costs O(N^3 D) per step; larger problems need --allow-large
LARGE_N_TR = 200
LARGE_D = 100


def make_splits(n_total, n_train, n_splits, seed):
    """Random train/test partitions, deterministic given ``seed``.

    Returns
    -------
    list of (train_idx, test_idx)
        Sorted index arrays; test is the complement of train.
    """
    if n_splits < 1:
        raise InvalidInputError("n_splits must be >= 1")
    if not 1 <= n_train <= n_total / 2:
        raise InvalidInputError(f"n_train={n_train} must be in [1, {n_total}/2]")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_splits):
        perm = rng.permutation(n_total)
        out.append((np.sort(perm[:n_train]), np.sort(perm[n_train:])))
    return out


def evaluate_model(model, test):
    """Mean log density of the rows of ``test`` under ``model``."""
    test = np.asarray(test, dtype=float)
    if test.ndim != 2 or test.shape[1] != getattr(model, "n_features_in_", test.shape[1]):
        raise InvalidInputError("test data dimension does not match the model")
    return float(np.mean(model.score_samples(test)))


def build_model(method, params, steps=600, seed=0):
    """Unfitted estimator for a method tag and its grid parameters."""
    if method == "lz":
        return GPLVMDensity(n_latent=params["d"], objective="lz", n_steps=steps, random_state=seed)
    if method in ("lpo-det", "lpo-rd"):
        return GPLVMDensity(n_latent=params["d"], objective="lpo", n_leave_out=params["P"],
                            stochastic=method == "lpo-rd", n_steps=steps, random_state=seed)
    if method == "gm":
        return PenalizedGaussianMixture(n_clusters=params["K"], random_state=seed)
    if method == "kde":
        return DiagonalKDE()
    if method == "mp":
        return ManifoldParzen(n_components=params["d"], n_neighbors=params["r"])
    raise InvalidInputError(f"unknown method {method!r}; choose from {METHODS}")


def method_grid(method, n_features, n_train, d_values=LATENT_DIMS, p_values=LEAVE_OUT):
    """Parameter dictionaries of one method family, restricted to valid cells."""
    D, n = n_features, n_train
    if method == "lz":
        return [{"d": d} for d in d_values if d <= min(D, n - 1)]
    if method in ("lpo-det", "lpo-rd"):
        return [{"d": d, "P": P} for d in d_values if d <= min(D, n - 1) for P in p_values if P <= n - 1]
    if method == "gm":
        return [{"K": K} for K in GM_CLUSTERS if K <= n]
    if method == "kde":
        return [{}]
    if method == "mp":
        ds = sorted({math.ceil(D * p / 100) for p in MP_DIM_PERCENT})
        rs = sorted({math.ceil(n * p / 100) for p in MP_NEIGHBOR_PERCENT})
        return [{"d": d, "r": r} for d in ds if d < D for r in rs if r < n]
    raise InvalidInputError(f"unknown method {method!r}; choose from {METHODS}")


@dataclass(frozen=True)
class RunSpec:
    """One fit/evaluate job: a grid cell on one split."""

    dataset: str
    method: str
    params: dict
    n_tr: int
    split: int
    preproc: str
    seed: int
    steps: int = 600

    @property
    def key(self):
        p = "_".join(f"{k}{v}" for k, v in sorted(self.params.items())) or "default"
        return f"{self.dataset}__{self.method}__{p}__n{self.n_tr}__{self.preproc}__s{self.split}"


def build_grid(dataset, n_features, n_total, methods, n_tr_list, preprocs, n_splits, seed,
               steps=600, d_values=LATENT_DIMS, p_values=LEAVE_OUT):
    specs = []
    for n_tr in n_tr_list:
        make_splits(n_total, n_tr, n_splits, seed)  # validate once per size
        for method in methods:
            for params in method_grid(method, n_features, n_tr, d_values, p_values):
                for pre in preprocs:
                    for split in range(n_splits):
                        specs.append(RunSpec(dataset, method, params, n_tr, split, _mode(pre), seed, steps))
    return specs


def run_one(spec, Z):
    """Fit and score one :class:`RunSpec`; failures are returned, not raised."""
    record = {**asdict(spec), "key": spec.key}
    try:
        train_idx, test_idx = make_splits(len(Z), spec.n_tr, spec.split + 1, spec.seed)[spec.split]
        pre = Preprocessor(spec.preproc).fit(Z[train_idx])
        model = build_model(spec.method, spec.params, spec.steps, spec.seed + spec.split)
        model.fit(pre.transform(Z[train_idx]))
        values = model.score_samples(pre.transform(Z[test_idx]))
        mean = float(np.mean(values))
        record.update(
            status="ok",
            log_density=mean,
            log_abs_det=pre.log_abs_det_,
            log_density_raw_space=mean + pre.log_abs_det_,
            n_test=len(test_idx),
            test_log_densities=values.tolist(),
        )
    except Exception as exc:  # noqa: BLE001 - any failure is recorded per run
        record.update(status="failed", error=f"{type(exc).__name__}: {exc}",
                      log_density=float("nan"), log_density_raw_space=float("nan"))
    return record


def _run_star(args):
    import torch
    torch.set_num_threads(1)
    return run_one(*args)


def run_grid(specs, Z, workers=1):
    """Run every spec; records come back in spec order regardless of ``workers``."""
    Z = np.asarray(Z, dtype=float)
    if workers <= 1:
        return [run_one(s, Z) for s in specs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_star, [(s, Z) for s in specs]))


@dataclass
class ExperimentResult:
    """Per-split results of one grid cell (method, params, n_tr, preproc)."""

    dataset: str
    method: str
    params: dict
    n_tr: int
    preproc: str
    split_values: list = field(default_factory=list)
    raw_split_values: list = field(default_factory=list)
    pooled: float = float("nan")
    failures: int = 0

    @property
    def mean(self):
        return float(np.mean(self.split_values)) if self.split_values else float("nan")

    @property
    def stderr(self):
        n = len(self.split_values)
        return float(np.std(self.split_values, ddof=1) / np.sqrt(n)) if n > 1 else float("nan")

    @property
    def raw_mean(self):
        return float(np.mean(self.raw_split_values)) if self.raw_split_values else float("nan")

    def to_dict(self):
        return {**asdict(self), "mean": self.mean, "stderr": self.stderr, "raw_mean": self.raw_mean}


def summarize(records):
    """Group run records into :class:`ExperimentResult` cells, in first-seen order."""
    cells = {}
    pooled = {}
    for r in records:
        key = (r["dataset"], r["method"], json.dumps(r["params"], sort_keys=True), r["n_tr"], r["preproc"])
        if key not in cells:
            cells[key] = ExperimentResult(r["dataset"], r["method"], r["params"], r["n_tr"], r["preproc"])
            pooled[key] = []
        if r["status"] != "ok":
            cells[key].failures += 1
            continue
        cells[key].split_values.append(r["log_density"])
        cells[key].raw_split_values.append(r["log_density_raw_space"])
        pooled[key].extend(r["test_log_densities"])
    for key, res in cells.items():
        if pooled[key]:
            res.pooled = float(np.mean(pooled[key]))
    return list(cells.values())


def best_of(results, raw_space=False):
    """Best cell per (method, n_tr) by mean test log density.

    Cells without a finite mean are skipped. ``raw_space`` ranks by the
    value with the preprocessing log-determinant added, which makes cells
    with different preprocessing comparable.
    """
    best = {}
    for res in results:
        value = res.raw_mean if raw_space else res.mean
        if not np.isfinite(value):
            continue
        k = (res.method, res.n_tr)
        if k not in best or value > (best[k].raw_mean if raw_space else best[k].mean):
            best[k] = res
    return best


def write_outputs(records, out_dir):
    """One JSON document per run, ``summary.csv`` and ``results.json``."""
    out = Path(out_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    for r in records:
        (out / "runs" / f"{r['key']}.json").write_text(json.dumps(r, indent=1))
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([r["dataset"], r["method"], json.dumps(r["params"], sort_keys=True), r["n_tr"],
                             r["split"], r["preproc"], repr(r["log_density"]), repr(r["log_density_raw_space"])])
    results = summarize(records)
    best = best_of(results, raw_space=True)
    (out / "results.json").write_text(json.dumps({
        "cells": [r.to_dict() for r in results],
        "best": [{"method": m, "n_tr": n, "params": r.params, "preproc": r.preproc,
                  "mean": r.mean, "raw_mean": r.raw_mean, "stderr": r.stderr}
                 for (m, n), r in best.items()],
    }, indent=1))
    return results


def needs_allow_large(methods, n_tr_list, n_features):
    return any(m in GPLVM_METHODS for m in methods) and (max(n_tr_list) > LARGE_N_TR or n_features > LARGE_D)


def default_workers():
    return max(1, (os.cpu_count() or 1) // 2)
