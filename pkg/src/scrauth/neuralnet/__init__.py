"""From-scratch CNN: layers, Adam training, checkpoints, feature extraction."""

from .checkpoint import load, save
from .model import CNN, FeatureExtractor, build_model, to_feature_extractor
from .train import Adam, TrainConfig, accuracy, train

__all__ = ["CNN", "FeatureExtractor", "build_model", "to_feature_extractor",
           "Adam", "TrainConfig", "train", "accuracy", "save", "load"]
