"""Local Outlier Factor for novelty detection.

Neighborhoods contain exactly ``k`` points; distance ties are broken by
training index. Local reachability densities use ``1 / (mean reach + 1e-10)``
so duplicated points keep finite scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ..errors import ParameterError

DENSITY_GUARD = 1e-10


def _knn(dist, k):
    idx = np.argsort(dist, axis=1, kind="stable")[:, :k]
    return idx, np.take_along_axis(dist, idx, axis=1)


@dataclass
class LofModel:
    training_points: np.ndarray
    n_neighbors: int
    k_distances: np.ndarray
    lrd: np.ndarray
    threshold: float = 1.5

    kind = "lof"

    def lof(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        dist = cdist(x, self.training_points)
        idx, d = _knn(dist, self.n_neighbors)
        reach = np.maximum(self.k_distances[idx], d)
        lrd_x = 1.0 / (reach.mean(axis=1) + DENSITY_GUARD)
        return self.lrd[idx].mean(axis=1) / lrd_x

    def decision(self, x) -> np.ndarray:
        """Authentication score: ``-LOF(x)``, higher means more legitimate."""
        return -self.lof(x)

    def accepts(self, x) -> np.ndarray:
        return self.lof(x) <= self.threshold


def lof_fit(features, n_neighbors: int = 3, threshold: float = 1.5) -> LofModel:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ParameterError("LOF expects a 2-d feature array")
    n = x.shape[0]
    if not 1 <= n_neighbors < n:
        raise ParameterError(f"n_neighbors must lie in [1, {n - 1}] for {n} training points")
    dist = cdist(x, x)
    np.fill_diagonal(dist, np.inf)
    idx, d = _knn(dist, n_neighbors)
    k_dist = d[:, -1]
    reach = np.maximum(k_dist[idx], d)
    lrd = 1.0 / (reach.mean(axis=1) + DENSITY_GUARD)
    return LofModel(x.copy(), n_neighbors, k_dist, lrd, threshold)


def lof_score(model: LofModel, x) -> np.ndarray:
    return model.decision(x)
