"""Frequency cropping and min-max scaling of differential spectrograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import SAMPLE_RATE
from .errors import ParameterError
from .preprocess import N_FFT, DiffSpectrogramRaw

INPUT_SHAPE = (65, 158, 2)


@dataclass(frozen=True)
class CropSpec:
    f_thre: float = 12000.0
    n_fft: int = N_FFT
    f_s: int = SAMPLE_RATE

    @property
    def i_thre(self) -> int:
        exact = self.f_thre * self.n_fft / self.f_s
        if not float(exact).is_integer():
            raise ParameterError(f"{self.f_thre} Hz does not fall on an FFT bin")
        return int(exact)

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1 - self.i_thre


def crop(raw: DiffSpectrogramRaw, spec: CropSpec = CropSpec()) -> np.ndarray:
    """Keep bins ``i_thre`` and up; stack magnitude and phase as channels."""
    expected = spec.n_fft // 2 + 1
    if raw.magnitude_diff.shape != raw.phase_diff.shape or raw.magnitude_diff.shape[0] != expected:
        raise ParameterError(
            f"expected two {expected}-bin grids, got {raw.magnitude_diff.shape} and {raw.phase_diff.shape}"
        )
    i = spec.i_thre
    return np.stack([raw.magnitude_diff[i:], raw.phase_diff[i:]], axis=-1)


def _minmax(x):
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def normalize(cropped, per_channel: bool = False) -> np.ndarray:
    """Min-max scale to [0, 1] over the whole tensor (or per channel).

    A constant tensor maps to zeros.
    """
    x = np.asarray(cropped, dtype=np.float64)
    if not per_channel:
        return _minmax(x)
    return np.stack([_minmax(x[..., c]) for c in range(x.shape[-1])], axis=-1)


def to_tensor(raw: DiffSpectrogramRaw, spec: CropSpec = CropSpec(), per_channel: bool = False) -> np.ndarray:
    return normalize(crop(raw, spec), per_channel)
