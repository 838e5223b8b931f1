"""Recording -> tensors -> features -> decision, with per-stage timing hooks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import PipelineConfig
from .errors import ConfigurationError
from .neuralnet.model import FeatureExtractor
from .oneclass.enrollment import EnrollmentModel
from .preprocess import Preprocessor
from .spectro import INPUT_SHAPE, CropSpec, to_tensor


def make_preprocessor(cfg: PipelineConfig) -> Preprocessor:
    return Preprocessor(layout=cfg.signal.layout(), filter_order=cfg.preprocess.filter_order,
                        phase_wrap=cfg.preprocess.phase_wrap)


def recording_tensors(pre: Preprocessor, recording, per_channel: bool = False,
                      crop: CropSpec = CropSpec()) -> np.ndarray:
    """All sensing-frame tensors of one recording, shape ``(n_frames - 1, 65, 158, 2)``."""
    raws = pre.diff_spectrograms(recording)
    if not raws:
        return np.zeros((0, *INPUT_SHAPE), np.float32)
    return np.stack([to_tensor(r, crop, per_channel) for r in raws]).astype(np.float32)


@dataclass
class Pipeline:
    preprocessor: Preprocessor
    extractor: FeatureExtractor | None = None
    enrollment: EnrollmentModel | None = None
    per_channel: bool = False

    @classmethod
    def from_config(cls, cfg: PipelineConfig, extractor=None, enrollment=None):
        return cls(make_preprocessor(cfg), extractor, enrollment, cfg.preprocess.per_channel_norm)

    def tensors(self, recording) -> np.ndarray:
        return recording_tensors(self.preprocessor, recording, self.per_channel)

    def features(self, tensors) -> np.ndarray:
        if self.extractor is None:
            raise ConfigurationError("pipeline has no feature extractor")
        return self.extractor(tensors)

    def classify(self, features):
        if self.enrollment is None:
            raise ConfigurationError("pipeline has no enrollment model")
        return self.enrollment.decide(features, vote=True)

    def authenticate(self, recording):
        return self.classify(self.features(self.tensors(recording)))
