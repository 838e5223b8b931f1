import json

import numpy as np
import pytest

from scrauth import fileio
from scrauth.config import PipelineConfig
from scrauth.errors import ConfigurationError, ParameterError
from scrauth.signals import SensingWaveform, assemble_sensing_sequence


def test_config_round_trip_is_stable():
    cfg = PipelineConfig(seed=3)
    text = cfg.to_json()
    back = PipelineConfig.from_json(text)
    assert back == cfg
    assert back.to_json() == text


def test_config_partial_and_unknown():
    cfg = PipelineConfig.from_dict({"sim": {"n_subjects": 6}, "seed": 1})
    assert cfg.sim.n_subjects == 6 and cfg.sim.trials_per_subject == 200
    with pytest.raises(ConfigurationError):
        PipelineConfig.from_dict({"nonsense": {}})
    with pytest.raises(ConfigurationError):
        PipelineConfig.from_dict({"sim": {"bogus_field": 1}})
    with pytest.raises(ConfigurationError):
        PipelineConfig.from_dict({"preprocess": {"phase_wrap": "sideways"}})
    with pytest.raises(ConfigurationError):
        PipelineConfig.from_json("{not json")


def test_stage_seeds_are_distinct_and_need_a_seed():
    cfg = PipelineConfig(seed=11)
    seeds = {cfg.stage_seed(s) for s in ("population", "habits", "training", "folds")}
    assert len(seeds) == 4
    assert PipelineConfig(seed=11).stage_seed("training") == cfg.stage_seed("training")
    with pytest.raises(ConfigurationError):
        PipelineConfig().stage_seed("training")
    assert PipelineConfig().with_seed().seed is not None


def test_waveform_round_trip_is_byte_identical(tmp_path):
    wf = assemble_sensing_sequence()
    p1 = fileio.write_waveform(tmp_path / "a.f32", wf, "tx", n_frames=10)
    back, meta = fileio.read_waveform(p1)
    p2 = fileio.write_waveform(tmp_path / "b.f32", back, "tx", **{k: v for k, v in meta.items()
                                                                    if k not in ("role", "n_samples", "sample_rate")})
    assert p1.read_bytes() == p2.read_bytes()
    assert fileio.sidecar_path(p1).read_bytes() == fileio.sidecar_path(p2).read_bytes()


def test_array_round_trip_is_byte_identical(tmp_path):
    x = np.random.default_rng(0).normal(size=(2, 3, 4))
    p1 = fileio.write_array(tmp_path / "a", x, role="tensor")
    back, meta = fileio.read_array(p1)
    assert back.shape == (2, 3, 4)
    meta.pop("shape")
    p2 = fileio.write_array(tmp_path / "b", back, **meta)
    assert p1.read_bytes() == p2.read_bytes()
    assert fileio.sidecar_path(p1).read_text() == fileio.sidecar_path(p2).read_text()


def test_sidecar_mismatch_detected(tmp_path):
    p = fileio.write_waveform(tmp_path / "w", SensingWaveform(np.zeros(10)), "rx")
    meta = json.loads(fileio.sidecar_path(p).read_text())
    meta["n_samples"] = 11
    fileio.dump_json(meta, fileio.sidecar_path(p))
    with pytest.raises(ParameterError):
        fileio.read_waveform(p)
    with pytest.raises(ParameterError):
        fileio.write_waveform(tmp_path / "x", SensingWaveform(np.zeros(3)), "speaker")
