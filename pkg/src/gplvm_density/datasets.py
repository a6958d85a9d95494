"""Dataset ingestion: svmlight/libsvm text files and synthetic generators."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import InvalidInputError, ParseError

__all__ = ["Dataset", "parse_svmlight", "write_svmlight", "load_dataset", "make_curve", "make_gaussian",
           "make_paired"]


@dataclass(frozen=True)
class Dataset:
    """Unlabelled data, one observation per row of ``features``."""

    name: str
    features: np.ndarray
    source_format: str

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]


def parse_svmlight(path):
    """Read a sparse ``index:value`` file into a dense ``(N, D)`` dataset.

    Indices are 1-based; ``D`` is the largest index seen. A leading token
    without a colon is a label and is dropped, as are ``qid:`` tokens and
    ``#`` comments.

    Raises
    ------
    ParseError
        With the file and line number of the first malformed token.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc}", path=path) from exc
    rows = []
    max_index = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if ":" not in tokens[0]:
            tokens = tokens[1:]
        entries = {}
        for tok in tokens:
            key, sep, val = tok.partition(":")
            if not sep:
                raise ParseError(f"token {tok!r} is not index:value", path=path, line=lineno)
            if key == "qid":
                continue
            try:
                index = int(key)
            except ValueError:
                raise ParseError(f"non-integer feature index {key!r}", path=path, line=lineno) from None
            if index <= 0:
                raise ParseError(f"feature index {index} must be >= 1", path=path, line=lineno)
            try:
                value = float(val)
            except ValueError:
                raise ParseError(f"non-numeric value {val!r}", path=path, line=lineno) from None
            if not np.isfinite(value):
                raise ParseError(f"non-finite value {val!r}", path=path, line=lineno)
            entries[index] = value
            max_index = max(max_index, index)
        rows.append(entries)
    X = np.zeros((len(rows), max_index))
    for r, entries in enumerate(rows):
        for index, value in entries.items():
            X[r, index - 1] = value
    return Dataset(path.stem, X, "svmlight")


def write_svmlight(path, X, labels=None):
    """Write ``X`` in svmlight format, skipping zeros; values round-trip exactly."""
    X = np.asarray(X, dtype=float)
    with open(path, "w") as fh:
        for r, row in enumerate(X):
            label = repr(float(labels[r])) if labels is not None else "0"
            items = " ".join(f"{k + 1}:{float(v)!r}" for k, v in enumerate(row) if v != 0)
            fh.write(f"{label} {items}\n".rstrip() + "\n")


def make_curve(n, noise=0.05, seed=0):
    """Noisy 1-D curve in the plane: ``(sin t, sin t cos t)``, ``|t| < 0.9 pi``."""
    rng = np.random.default_rng(seed)
    t = rng.uniform(-0.9 * np.pi, 0.9 * np.pi, n)
    Z = np.column_stack([np.sin(t), np.sin(t) * np.cos(t)])
    return Z + noise * rng.standard_normal((n, 2))


def make_paired(n_pairs, dim=2, offset=1e-6, seed=0):
    """Near-duplicate pairs: ``n_pairs`` Gaussian points, each repeated once
    with a perturbation of size ``offset``. Rows ``2k`` and ``2k + 1`` pair up."""
    rng = np.random.default_rng(seed)
    base = rng.standard_normal((n_pairs, dim))
    Z = np.repeat(base, 2, axis=0)
    Z[1::2] += offset * rng.standard_normal((n_pairs, dim))
    return Z


def make_gaussian(n, dim=3, seed=0):
    """Standard normal sample of shape ``(n, dim)``."""
    return np.random.default_rng(seed).standard_normal((n, dim))


_SYNTHETIC = {
    "curve": lambda seed: make_curve(1000, seed=seed),
    "gauss3": lambda seed: make_gaussian(1000, 3, seed=seed),
}


def load_dataset(spec, seed=0):
    """Load ``spec``: a path to an svmlight file or ``synthetic:<name>``."""
    spec = str(spec)
    if spec.startswith("synthetic:"):
        name = spec.split(":", 1)[1]
        if name not in _SYNTHETIC:
            raise InvalidInputError(f"unknown synthetic dataset {name!r}; choose from {sorted(_SYNTHETIC)}")
        return Dataset(name, _SYNTHETIC[name](seed), "synthetic")
    return parse_svmlight(spec)
