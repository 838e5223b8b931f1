"""Serializable pipeline configuration.

A config written with :meth:`PipelineConfig.to_json` and read back with
:meth:`PipelineConfig.from_json` reproduces the same run bit for bit.
"""

from __future__ import annotations

import json
import secrets
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .earsim import EnvironmentProfile, PlacementJitter, PopulationConfig
from .errors import ConfigurationError
from .neuralnet.train import TrainConfig
from .oneclass.enrollment import CLASSIFIERS, DEFAULT_HYPERPARAMS
from .preprocess import PHASE_WRAP_MODES
from .signals import ChirpSpec, FrameLayout

# stage tags for derived seeds; never reorder
STAGES = ("population", "habits", "extractor_trials", "study_trials", "attack_trials",
          "model_init", "training", "folds", "mimicry_victims")


@dataclass
class SignalConfig:
    n_frames: int = 2
    f_start: float = 17000.0
    f_end: float = 23000.0
    chirp_len: int = 1200
    taper_len: int = 120
    amplitude: float = 0.9
    silence_len: int = 1200

    def layout(self) -> FrameLayout:
        chirp = ChirpSpec(self.f_start, self.f_end, self.chirp_len, taper_len=self.taper_len,
                          amplitude=self.amplitude)
        return FrameLayout(n_frames=self.n_frames, chirp=chirp, silence_len=self.silence_len)


@dataclass
class SimConfig:
    n_subjects: int = 10
    n_attackers: int = 7
    trials_per_subject: int = 200
    extractor_trials: int = 100
    attack_trials: int = 20
    mimicry_victims: int = 5
    habit_shift: float = 2.0
    habit_coupling_spread: float = 0.2
    population: PopulationConfig = field(default_factory=PopulationConfig)
    environment: EnvironmentProfile = field(default_factory=EnvironmentProfile)
    jitter: PlacementJitter = field(default_factory=PlacementJitter)

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["population"] = self.population.to_dict()
        d["environment"] = self.environment.to_dict()
        d["jitter"] = asdict(self.jitter)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "population" in d:
            d["population"] = PopulationConfig.from_dict(d["population"])
        if "environment" in d:
            d["environment"] = EnvironmentProfile.from_dict(d["environment"])
        if "jitter" in d:
            d["jitter"] = PlacementJitter(**d["jitter"])
        return cls(**d)


@dataclass
class PreprocessConfig:
    phase_wrap: str = "none"
    filter_order: int = 5
    per_channel_norm: bool = False


@dataclass
class ClassifierConfig:
    kind: str = "ocsvm"
    hyperparams: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        return dict(DEFAULT_HYPERPARAMS[self.kind], **self.hyperparams)


@dataclass
class EvalConfig:
    folds: int = 5
    kde_grid: int = 512
    latency_runs: int = 50


_SIMPLE = {"signal": SignalConfig, "preprocess": PreprocessConfig, "classifier": ClassifierConfig,
           "evaluation": EvalConfig}


@dataclass
class PipelineConfig:
    signal: SignalConfig = field(default_factory=SignalConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    seed: int | None = None

    def validate(self):
        if self.preprocess.phase_wrap not in PHASE_WRAP_MODES:
            raise ConfigurationError(f"phase_wrap must be one of {PHASE_WRAP_MODES}")
        if self.classifier.kind not in CLASSIFIERS:
            raise ConfigurationError(f"classifier must be one of {CLASSIFIERS}")
        if self.signal.n_frames < 1:
            raise ConfigurationError("need at least one frame")
        if self.sim.n_subjects < 2:
            raise ConfigurationError("need at least 2 subjects")
        if self.sim.mimicry_victims < 0:
            raise ConfigurationError("mimicry_victims must be >= 0")
        self.signal.layout().chirp.validate()
        return self

    def with_seed(self) -> "PipelineConfig":
        """Copy with a concrete seed, drawing a fresh one if unset."""
        if self.seed is not None:
            return self
        return replace(self, seed=secrets.randbits(32))

    def stage_seed(self, stage: str) -> int:
        if self.seed is None:
            raise ConfigurationError("resolve the seed with with_seed() first")
        tag = STAGES.index(stage)
        return int(np.random.SeedSequence([self.seed, tag]).generate_state(1)[0])

    def to_dict(self):
        d = {name: asdict(getattr(self, name)) for name in _SIMPLE}
        d["sim"] = self.sim.to_dict()
        d["training"] = asdict(self.training)
        d["seed"] = self.seed
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config sections: {sorted(unknown)}")
        kw = {}
        try:
            for name, typ in _SIMPLE.items():
                if name in d:
                    kw[name] = typ(**d[name])
            if "sim" in d:
                kw["sim"] = SimConfig.from_dict(d["sim"])
            if "training" in d:
                kw["training"] = TrainConfig(**d["training"])
        except TypeError as exc:
            raise ConfigurationError(f"bad config: {exc}") from exc
        return cls(seed=d.get("seed"), **kw).validate()

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str):
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config is not valid JSON: {exc}") from exc

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())

    def save(self, path):
        Path(path).write_text(self.to_json())
