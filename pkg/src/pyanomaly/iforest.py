"""Isolation forest over standardized forecast residuals."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .const import (
    DEFAULT_CONTAMINATION,
    DEFAULT_N_TREES,
    DEFAULT_SUBSAMPLE,
    SCHEMA_VERSION,
)
from .enums import ModelName
from .exceptions import (
    ConfigError,
    DataError,
    DegenerateDataError,
    ModelStateError,
    ParseError,
)
from .parser import check_schema

_LOGGER = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329
LEAF = -1


@dataclass
class Standardizer:
    """Object holding per-feature z-score statistics."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, values: np.ndarray | float) -> np.ndarray:
        """Return (values - mean) / std."""
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.std

    def inverse_transform(self, values: np.ndarray | float) -> np.ndarray:
        """Return values mapped back to raw units."""
        return np.asarray(values, dtype=np.float64) * self.std + self.mean

    @property
    def as_dict(self) -> dict[str, Any]:
        """Return Standardizer object as dictionary."""
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @staticmethod
    def from_dict(data: dict[str, Any]) -> Standardizer:
        """Return Standardizer object from a mapping."""
        return Standardizer(
            mean=np.asarray(data["mean"], dtype=np.float64),
            std=np.asarray(data["std"], dtype=np.float64),
        )


def fit_standardizer(residuals: np.ndarray) -> Standardizer:
    """Return the sample mean and (population) standard deviation of residuals."""
    values = np.asarray(residuals, dtype=np.float64)
    if values.shape[0] < 2:
        raise DataError("Standardizer needs at least 2 samples")

    mean = values.mean(axis=0)
    std = values.std(axis=0)
    if np.any(std == 0):
        raise DegenerateDataError("Residuals have zero variance")

    return Standardizer(mean=np.asarray(mean), std=np.asarray(std))


def average_path_length(n: np.ndarray | float) -> np.ndarray:
    """Return c(n), the mean unsuccessful-search path length of n points.

    c(n) = 0 for n <= 1 and c(2) = 1.
    """
    n = np.asarray(n, dtype=np.float64)
    result = np.zeros_like(n)
    result = np.where(n == 2, 1.0, result)

    large = n > 2
    safe = np.where(large, n, 3.0)
    harmonic = 2.0 * (np.log(safe - 1.0) + EULER_GAMMA) - 2.0 * (safe - 1.0) / safe
    return np.where(large, harmonic, result)


@dataclass
class IsolationTree:
    """Object holding one isolation tree as flat node arrays.

    feature is LEAF at leaves; size counts the training points that reached
    each node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray

    @property
    def depth(self) -> int:
        """Return the depth of the deepest leaf."""
        depths = np.zeros(len(self.feature), dtype=int)
        for node in range(len(self.feature)):
            if self.feature[node] != LEAF:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def path_length(self, X: np.ndarray) -> np.ndarray:  # noqa: N803
        """Return the corrected path length h(x) of every row of X."""
        node = np.zeros(len(X), dtype=int)
        depth = np.zeros(len(X), dtype=np.float64)
        rows = np.arange(len(X))

        active = self.feature[node] != LEAF
        while np.any(active):
            current = node[active]
            values = X[rows[active], self.feature[current]]
            node[active] = np.where(
                values < self.threshold[current],
                self.left[current],
                self.right[current],
            )
            depth[active] += 1.0
            active = self.feature[node] != LEAF

        return depth + average_path_length(self.size[node])

    @property
    def as_dict(self) -> dict[str, list[Any]]:
        """Return IsolationTree object as dictionary."""
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "size": self.size.tolist(),
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> IsolationTree:
        """Return IsolationTree object from a mapping."""
        return IsolationTree(
            feature=np.asarray(data["feature"], dtype=int),
            threshold=np.asarray(data["threshold"], dtype=np.float64),
            left=np.asarray(data["left"], dtype=int),
            right=np.asarray(data["right"], dtype=int),
            size=np.asarray(data["size"], dtype=int),
        )


def build_tree(
    sample: np.ndarray,
    max_depth: int,
    rng: np.random.Generator,
) -> IsolationTree:
    """Grow one tree depth-first, left child first.

    Each candidate node draws a split feature, then (when that feature is not
    constant) a split value uniform between the node's min and max.
    """
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    size: list[int] = []

    def new_node(count: int) -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        size.append(count)
        return len(size) - 1

    stack = [(new_node(len(sample)), sample, 0)]
    while stack:
        node, points, depth = stack.pop()
        if depth >= max_depth or len(points) <= 1:
            continue

        column = int(rng.integers(points.shape[1]))
        low, high = points[:, column].min(), points[:, column].max()
        if low == high:
            continue

        split = float(rng.uniform(low, high))
        goes_left = points[:, column] < split

        feature[node] = column
        threshold[node] = split
        left[node] = new_node(int(goes_left.sum()))
        right[node] = new_node(int((~goes_left).sum()))

        stack.append((right[node], points[~goes_left], depth + 1))
        stack.append((left[node], points[goes_left], depth + 1))

    return IsolationTree(
        feature=np.asarray(feature, dtype=int),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=int),
        right=np.asarray(right, dtype=int),
        size=np.asarray(size, dtype=int),
    )


@dataclass
class IsolationForestModel:
    """Object holding a fitted isolation forest."""

    trees: list[IsolationTree] = field(default_factory=list)
    n_trees: int = DEFAULT_N_TREES
    subsample: int = DEFAULT_SUBSAMPLE
    max_depth: int = 0
    contamination: float = DEFAULT_CONTAMINATION
    threshold: float = 1.0
    seed: int = 0
    standardizer: Standardizer | None = None

    @property
    def fitted(self) -> bool:
        """Return whether the forest holds trees."""
        return bool(self.trees)

    def path_lengths(self, X: np.ndarray) -> np.ndarray:  # noqa: N803
        """Return the tree-averaged path length E[h(x)] of every row."""
        if not self.fitted:
            raise ModelStateError("Isolation forest has not been fitted")

        X = _as_matrix(X)  # noqa: N806
        return np.mean([tree.path_length(X) for tree in self.trees], axis=0)

    def score_samples(self, X: np.ndarray) -> np.ndarray:  # noqa: N803
        """Return 2^(-E[h] / c(psi)); higher is more anomalous."""
        return np.power(2.0, -self.path_lengths(X) / average_path_length(self.subsample))

    def flag(self, X: np.ndarray) -> np.ndarray:  # noqa: N803
        """Return True where the score exceeds the contamination threshold."""
        return self.score_samples(X) > self.threshold

    @property
    def as_dict(self) -> dict[str, Any]:
        """Return IsolationForestModel object as a persistable dictionary."""
        return {
            "schema": SCHEMA_VERSION,
            "model": ModelName.IFOREST.value,
            "n_trees": self.n_trees,
            "subsample": self.subsample,
            "max_depth": self.max_depth,
            "contamination": self.contamination,
            "threshold": self.threshold,
            "seed": self.seed,
            "standardizer": None if self.standardizer is None else self.standardizer.as_dict,
            "trees": [tree.as_dict for tree in self.trees],
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> IsolationForestModel:
        """Return IsolationForestModel object from a persisted dictionary."""
        check_schema(str(data.get("schema", "")))
        if data.get("model") != ModelName.IFOREST.value:
            raise ParseError(f"Expected model iforest, found {data.get('model')}")  # noqa: EM102

        try:
            standardizer = data.get("standardizer")
            return IsolationForestModel(
                trees=[IsolationTree.from_dict(tree) for tree in data["trees"]],
                n_trees=int(data["n_trees"]),
                subsample=int(data["subsample"]),
                max_depth=int(data["max_depth"]),
                contamination=float(data["contamination"]),
                threshold=float(data["threshold"]),
                seed=int(data["seed"]),
                standardizer=None if standardizer is None else Standardizer.from_dict(standardizer),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError("Corrupt isolation forest document") from exc

    def save(self, path: str | Path) -> Path:
        """Write the forest as JSON."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.as_dict), encoding="utf-8")
        _LOGGER.info("Saved isolation forest to %s", path)
        return path

    @staticmethod
    def load(path: str | Path) -> IsolationForestModel:
        """Read a forest written by save."""
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"Invalid JSON in {path}") from exc  # noqa: EM102
        return IsolationForestModel.from_dict(data)


def _as_matrix(values: np.ndarray | float) -> np.ndarray:
    X = np.asarray(values, dtype=np.float64)  # noqa: N806
    if X.ndim == 0:
        return X.reshape(1, 1)
    if X.ndim == 1:
        return X[:, np.newaxis]
    return X


def iforest_fit(  # noqa: PLR0913
    residuals_std: np.ndarray,
    contamination: float = DEFAULT_CONTAMINATION,
    n_trees: int = DEFAULT_N_TREES,
    subsample: int = DEFAULT_SUBSAMPLE,
    seed: int = 0,
    *,
    standardizer: Standardizer | None = None,
) -> IsolationForestModel:
    """Build n_trees isolation trees on seeded subsamples.

    Rows are sorted before subsampling, so the forest depends on the training
    set and seed but not on row order. The flag threshold is the
    (1 - contamination) quantile of the training scores.
    """
    if not 0.0 < contamination < 0.5:
        raise ConfigError(
            f"Contamination must lie in (0, 0.5), got {contamination}",  # noqa: EM102
        )
    if n_trees < 1 or subsample < 2:
        raise ConfigError("Isolation forest needs n_trees >= 1 and subsample >= 2")

    X = _as_matrix(residuals_std)  # noqa: N806
    if len(X) < 2:
        raise DataError("Isolation forest needs at least 2 samples")
    if not np.all(np.isfinite(X)):
        raise DataError("Isolation forest input must be finite")

    X = X[np.lexsort(X.T[::-1])]  # noqa: N806
    psi = min(subsample, len(X))
    max_depth = math.ceil(math.log2(psi))

    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        rows = rng.choice(len(X), size=psi, replace=False)
        trees.append(build_tree(X[rows], max_depth, rng))

    model = IsolationForestModel(
        trees=trees,
        n_trees=n_trees,
        subsample=psi,
        max_depth=max_depth,
        contamination=contamination,
        seed=seed,
        standardizer=standardizer,
    )
    model.threshold = float(np.quantile(model.score_samples(X), 1.0 - contamination))
    _LOGGER.info(
        "Fitted isolation forest: %s trees, psi %s, threshold %.4f",
        n_trees,
        psi,
        model.threshold,
    )
    return model


def iforest_score(r_std: float, model: IsolationForestModel) -> float:
    """Return I_t, the anomaly score of one standardized residual."""
    return float(model.score_samples(np.asarray([r_std], dtype=np.float64))[0])


def iforest_score_batch(r_std: np.ndarray, model: IsolationForestModel) -> np.ndarray:
    """Return the anomaly score of every standardized residual."""
    return model.score_samples(np.asarray(r_std, dtype=np.float64))
