"""Transmitted sensing sequence: pilot preamble followed by chirp/silence frames."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import SAMPLE_RATE
from .errors import ParameterError


@dataclass(frozen=True)
class SensingWaveform:
    """Real-valued audio at a fixed sample rate, bounded to [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ParameterError("waveform samples must be one-dimensional")
        if samples.size and np.max(np.abs(samples)) > 1.0:
            raise ParameterError("waveform samples must lie within [-1, 1]")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class ChirpSpec:
    f_start: float = 17000.0
    f_end: float = 23000.0
    length: int = 1200
    sample_rate: int = SAMPLE_RATE
    taper_len: int = 120
    amplitude: float = 0.9

    def validate(self):
        nyquist = self.sample_rate / 2
        for f in (self.f_start, self.f_end):
            if not 0 < f < nyquist:
                raise ParameterError(f"chirp frequency {f} Hz outside (0, {nyquist}) Hz")
        if self.length < 1:
            raise ParameterError("chirp length must be positive")
        if self.taper_len < 0 or 2 * self.taper_len > self.length:
            raise ParameterError(
                f"taper of {self.taper_len} samples does not fit a {self.length}-sample chirp"
            )
        if not 0 < self.amplitude <= 1:
            raise ParameterError("chirp amplitude must lie in (0, 1]")


@dataclass(frozen=True)
class PilotSpec:
    n_chirps: int = 3
    chirp_len: int = 500
    f_start: float = 22000.0
    f_end: float = 18000.0
    sample_rate: int = SAMPLE_RATE
    amplitude: float = 0.9

    @property
    def total_len(self) -> int:
        return self.n_chirps * self.chirp_len

    def chirp_spec(self) -> ChirpSpec:
        return ChirpSpec(self.f_start, self.f_end, self.chirp_len, self.sample_rate, 0, self.amplitude)


@dataclass(frozen=True)
class FrameLayout:
    n_frames: int = 10
    chirp: ChirpSpec = field(default_factory=ChirpSpec)
    silence_len: int = 1200
    pilot: PilotSpec = field(default_factory=PilotSpec)

    @property
    def chirp_len(self) -> int:
        return self.chirp.length

    @property
    def frame_len(self) -> int:
        return self.chirp.length + self.silence_len

    @property
    def total_len(self) -> int:
        return self.pilot.total_len + self.n_frames * self.frame_len

    def frame_start(self, k: int) -> int:
        """Sample index in the transmitted sequence where frame ``k`` starts."""
        return self.pilot.total_len + k * self.frame_len


def taper_envelope(length: int, taper_len: int) -> np.ndarray:
    """Unit envelope whose ends follow the halves of a Hamming window."""
    env = np.ones(length)
    if taper_len:
        win = np.hamming(2 * taper_len)
        env[:taper_len] = win[:taper_len]
        env[length - taper_len:] = win[taper_len:]
    return env


def chirp_phase(spec: ChirpSpec) -> np.ndarray:
    """Phase of a linear sweep, integrated analytically from zero.

    The sweep reaches ``f_end`` exactly on the last sample.
    """
    t = np.arange(spec.length) / spec.sample_rate
    span = (spec.length - 1) / spec.sample_rate if spec.length > 1 else 1.0
    rate = (spec.f_end - spec.f_start) / span
    return 2 * np.pi * (spec.f_start * t + 0.5 * rate * t**2)


def generate_chirp(spec: ChirpSpec = ChirpSpec()) -> SensingWaveform:
    spec.validate()
    x = np.cos(chirp_phase(spec)) * taper_envelope(spec.length, spec.taper_len)
    x *= spec.amplitude / np.max(np.abs(x))
    return SensingWaveform(x, spec.sample_rate)


def generate_pilot(spec: PilotSpec = PilotSpec()) -> SensingWaveform:
    if spec.n_chirps < 1:
        raise ParameterError("pilot needs at least one chirp")
    one = generate_chirp(spec.chirp_spec()).samples
    return SensingWaveform(np.tile(one, spec.n_chirps), spec.sample_rate)


def assemble_sensing_sequence(layout: FrameLayout = FrameLayout()) -> SensingWaveform:
    """Pilot followed by ``n_frames`` repetitions of (chirp, silence)."""
    if layout.n_frames < 1:
        raise ParameterError("sensing sequence needs at least one frame")
    if layout.pilot.sample_rate != layout.chirp.sample_rate:
        raise ParameterError("pilot and chirp sample rates differ")
    frame = np.concatenate([generate_chirp(layout.chirp).samples, np.zeros(layout.silence_len)])
    pilot = generate_pilot(layout.pilot).samples
    return SensingWaveform(
        np.concatenate([pilot, np.tile(frame, layout.n_frames)]), layout.chirp.sample_rate
    )
