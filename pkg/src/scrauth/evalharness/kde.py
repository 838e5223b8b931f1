"""Gaussian kernel density of prediction scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from ..errors import ParameterError


def silverman_bandwidth(x) -> float:
    """Silverman's rule of thumb, ``0.9 min(sd, IQR/1.34) n^(-1/5)``.

    Falls back to whichever spread is nonzero, then to a small absolute
    width for constant data.
    """
    x = np.asarray(x, dtype=np.float64)
    sd = x.std(ddof=1) if x.size > 1 else 0.0
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread <= 0:
        spread = max(sd, (q75 - q25) / 1.34)
    if spread <= 0:
        spread = max(abs(float(x.mean())) * 0.1, 1e-3)
    return 0.9 * spread * x.size ** (-0.2)


@dataclass
class KdeCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def integral(self) -> float:
        return float(trapezoid(self.density, self.grid))

    def to_dict(self):
        return {"bandwidth": self.bandwidth, "grid": self.grid.tolist(), "density": self.density.tolist()}


def gaussian_kde(scores, n_grid: int = 512, pad: float = 5.0, bandwidth=None) -> KdeCurve:
    x = np.asarray(scores, dtype=np.float64).ravel()
    if x.size == 0:
        raise ParameterError("cannot estimate a density from no scores")
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    grid = np.linspace(x.min() - pad * h, x.max() + pad * h, n_grid)
    z = (grid[:, None] - x[None, :]) / h
    density = np.exp(-0.5 * z * z).sum(axis=1) / (x.size * h * np.sqrt(2 * np.pi))
    return KdeCurve(grid, density, h)
