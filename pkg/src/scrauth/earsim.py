"""Synthetic stand-in for recording real call receivers.

A received waveform is the transmitted sequence passed through a sparse
multipath channel: the direct speaker-to-microphone path and a few static
room reflections are present in every frame; a subject-specific ear response
(a handful of delayed taps shaped by a 4-band absorption filter) only appears
once the phone reaches the ear. Placement jitter perturbs the ear taps per
trial and white or band-limited noise is added at a calibrated SNR.

All delays are in samples relative to the direct-path arrival. None of the
magnitudes here are measurements of real ears.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import signal

from . import SAMPLE_RATE
from .errors import ClippingError, GenerationError, ParameterError
from .signals import FrameLayout, PilotSpec, SensingWaveform

ABSORPTION_EDGES = (17000.0, 18500.0, 20000.0, 21500.0, 23000.0)
SENSING_BAND = (17000.0, 23000.0)
ABSORPTION_TAPS = 33
FRAC_HALF_WIDTH = 8
NOISE_KINDS = ("none", "white", "recorded-babble-surrogate")
TRIAL_KINDS = ("enroll", "genuine", "zero_effort", "mimicry")


@dataclass(frozen=True)
class EarProfile:
    subject_id: str
    taps: tuple  # ((delay, gain), ...)
    absorption: tuple = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "taps", tuple((float(d), float(g)) for d, g in self.taps))
        object.__setattr__(self, "absorption", tuple(float(a) for a in self.absorption))
        self.validate()

    def validate(self):
        if len(self.taps) < 3:
            raise ParameterError("an ear profile needs at least 3 taps")
        delays = [d for d, _ in self.taps]
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ParameterError("ear tap delays must be strictly increasing")
        if delays[0] < 5 or delays[-1] > 60:
            raise ParameterError("ear tap delays must lie in [5, 60] samples")
        gains = [g for _, g in self.taps]
        if any(abs(g) > 0.6 for g in gains) or sum(abs(g) for g in gains) > 1 + 1e-12:
            raise ParameterError("ear tap gains must satisfy |g| <= 0.6 and sum |g| <= 1")
        if len(self.absorption) != len(ABSORPTION_EDGES) - 1 or not all(0 <= a <= 1 for a in self.absorption):
            raise ParameterError("absorption needs 4 band factors in [0, 1]")

    def to_dict(self):
        return {"subject_id": self.subject_id, "taps": [list(t) for t in self.taps],
                "absorption": list(self.absorption)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["subject_id"], tuple(tuple(t) for t in d["taps"]), tuple(d["absorption"]))


@dataclass(frozen=True)
class EnvironmentProfile:
    """Static channel plus the subject's habitual phone placement.

    ``ear_coupling`` scales the whole ear response and ``placement_shift``
    offsets its delays; both describe where the subject usually holds the
    phone and are what a mimicry attacker copies.
    """

    direct_gain: float = 0.5
    direct_delay: int = 40
    static_reflections: tuple = ((90, 0.15), (230, -0.08))
    noise_kind: str = "white"
    snr_db: float = 30.0
    ear_coupling: float = 0.3
    placement_shift: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "static_reflections",
                           tuple((int(d), float(g)) for d, g in self.static_reflections))
        if self.noise_kind not in NOISE_KINDS:
            raise ParameterError(f"unknown noise kind {self.noise_kind!r}")
        if self.direct_delay < 0 or any(d <= 0 for d, _ in self.static_reflections):
            raise ParameterError("direct delay must be >= 0 and reflections must arrive after it")
        if any(abs(g) >= abs(self.direct_gain) for _, g in self.static_reflections):
            raise ParameterError("the direct path must dominate every static reflection")

    def to_dict(self):
        d = dict(self.__dict__)
        d["static_reflections"] = [list(r) for r in self.static_reflections]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["static_reflections"] = tuple(tuple(r) for r in d.get("static_reflections", ()))
        return cls(**d)


@dataclass(frozen=True)
class PlacementJitter:
    delay_jitter: float = 1.0
    gain_jitter: float = 0.1
    seed: int | None = None

    def __post_init__(self):
        if self.delay_jitter < 0 or self.gain_jitter < 0:
            raise ParameterError("jitter bounds must be nonnegative")


@dataclass
class TrialRecording:
    waveform: SensingWaveform
    truth: str
    trial_kind: str
    ear_present_from_frame: int
    n_frames: int
    ear_signal: np.ndarray | None = field(default=None, repr=False)

    def metadata(self):
        return {"truth": self.truth, "trial_kind": self.trial_kind,
                "ear_present_from_frame": self.ear_present_from_frame, "n_frames": self.n_frames}


@dataclass(frozen=True)
class PopulationConfig:
    n_taps: tuple = (3, 6)
    delay_range: tuple = (5, 60)
    gain_range: tuple = (0.15, 0.6)
    absorption_range: tuple = (0.3, 1.0)
    min_distance: float = 0.15
    max_retries: int = 500

    def to_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in self.__dict__.items()}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@lru_cache(maxsize=256)
def absorption_filter(absorption: tuple, numtaps: int = ABSORPTION_TAPS,
                      sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Linear-phase FIR interpolating the band factors across 17-23 kHz."""
    centers = [(a + b) / 2 for a, b in zip(ABSORPTION_EDGES, ABSORPTION_EDGES[1:])]
    nyq = sample_rate / 2
    freq = [0.0, ABSORPTION_EDGES[0], *centers, ABSORPTION_EDGES[-1], nyq]
    gain = [absorption[0], absorption[0], *absorption, absorption[-1], absorption[-1]]
    return signal.firwin2(numtaps, freq, gain, fs=sample_rate)


def fractional_delay(delay: float, half_width: int = FRAC_HALF_WIDTH):
    """Hann-windowed sinc kernel; returns (first index, taps)."""
    base = int(np.floor(delay))
    n = np.arange(base - half_width, base + half_width + 1)
    x = n - delay
    taps = np.sinc(x) * 0.5 * (1 + np.cos(np.pi * x / (half_width + 1)))
    return base - half_width, taps


def ear_impulse_response(ear: EarProfile, shift: float = 0.0, gain_factors=None,
                         coupling: float = 1.0) -> np.ndarray:
    """Ear response relative to the direct-path arrival (index 0).

    The fractional kernels are offset so the response stays causal for any
    shift down to ``-(5 - 1)`` samples.
    """
    gains = np.array([g for _, g in ear.taps])
    if gain_factors is not None:
        gains = gains * gain_factors
    delays = np.array([d for d, _ in ear.taps]) + shift
    if delays.min() < 1:
        raise ParameterError("placement shift moves an ear tap before the direct path")
    sparse = np.zeros(int(np.ceil(delays.max())) + 2 * FRAC_HALF_WIDTH + 2)
    for d, g in zip(delays, gains):
        start, taps = fractional_delay(d + FRAC_HALF_WIDTH)
        sparse[start:start + taps.size] += g * taps
    return coupling * np.convolve(sparse, absorption_filter(ear.absorption))


def band_power(x, band=SENSING_BAND, sample_rate: int = SAMPLE_RATE) -> float:
    spec = np.fft.rfft(x)
    f = np.fft.rfftfreq(x.size, 1 / sample_rate)
    mask = (f >= band[0]) & (f <= band[1])
    return float(np.sum(np.abs(spec[mask]) ** 2)) * 2 / x.size**2


def _magnitude_response(ear: EarProfile, n_points: int = 64) -> np.ndarray:
    h = ear_impulse_response(ear)
    f = np.linspace(*SENSING_BAND, n_points)
    _, resp = signal.freqz(h, worN=f, fs=SAMPLE_RATE)
    return np.abs(resp)


def profile_distance(a: EarProfile, b: EarProfile) -> float:
    """RMS gap between the two ears' in-band magnitude responses."""
    return float(np.sqrt(np.mean((_magnitude_response(a) - _magnitude_response(b)) ** 2)))


def _random_profile(subject_id: str, rng: np.random.Generator, cfg: PopulationConfig) -> EarProfile:
    n_taps = int(rng.integers(cfg.n_taps[0], cfg.n_taps[1] + 1))
    lo, hi = cfg.delay_range
    delays = np.sort(rng.choice(np.arange(lo, hi + 1), size=n_taps, replace=False))
    delays = delays + rng.uniform(0, 0.99, n_taps) * (delays < hi)
    gains = rng.uniform(*cfg.gain_range, n_taps) * rng.choice([-1.0, 1.0], n_taps)
    total = np.abs(gains).sum()
    if total > 1:
        gains /= total
    absorption = rng.uniform(*cfg.absorption_range, len(ABSORPTION_EDGES) - 1)
    return EarProfile(subject_id, tuple(zip(delays.tolist(), gains.tolist())), tuple(absorption.tolist()))


def make_population(n_subjects: int, seed: int, config: PopulationConfig = PopulationConfig()) -> list:
    """Draw ``n_subjects`` ears pairwise at least ``config.min_distance`` apart."""
    if n_subjects < 2:
        raise ParameterError("a population needs at least 2 subjects")
    rng = np.random.default_rng(seed)
    population = []
    for i in range(n_subjects):
        for _ in range(config.max_retries):
            candidate = _random_profile(f"s{i:03d}", rng, config)
            if all(profile_distance(candidate, p) >= config.min_distance for p in population):
                population.append(candidate)
                break
        else:
            raise GenerationError(
                f"could not place subject {i} at distance >= {config.min_distance} "
                f"after {config.max_retries} draws"
            )
    return population


def habitual_environment(base: EnvironmentProfile, seed: int, shift_range: float = 2.0,
                         coupling_spread: float = 0.2) -> EnvironmentProfile:
    """A subject's own way of holding the phone in the base environment."""
    rng = np.random.default_rng(seed)
    return replace(
        base,
        placement_shift=float(rng.uniform(-shift_range, shift_range)),
        ear_coupling=float(base.ear_coupling * rng.uniform(1 - coupling_spread, 1 + coupling_spread)),
    )


def _frames_in(tx_len: int, layout: FrameLayout) -> int:
    n, rem = divmod(tx_len - layout.pilot.total_len, layout.frame_len)
    if rem or n < 1:
        raise ParameterError(f"{tx_len}-sample waveform is not a whole sensing sequence")
    return n


def _noise(kind: str, n: int, rng: np.random.Generator, clean: np.ndarray, snr_db: float):
    if kind == "none" or n == 0:
        return np.zeros(n)
    raw = rng.standard_normal(n)
    if kind == "white":
        target = band_power(clean) / 10 ** (snr_db / 10)
        got = band_power(raw)
    else:
        sos = signal.butter(8, 15000, btype="lowpass", fs=SAMPLE_RATE, output="sos")
        t = np.arange(n) / SAMPLE_RATE
        envelope = 1 + 0.5 * np.sin(2 * np.pi * rng.uniform(2, 6) * t + rng.uniform(0, 2 * np.pi))
        raw = signal.sosfilt(sos, raw) * envelope
        target = np.mean(clean**2) / 10 ** (snr_db / 10)
        got = np.mean(raw**2)
    if got == 0 or target == 0:
        return np.zeros(n)
    return raw * np.sqrt(target / got)


def render_trial(tx: SensingWaveform, ear: EarProfile | None, env: EnvironmentProfile,
                 jitter: PlacementJitter = PlacementJitter(), seed: int = 0, *,
                 trial_kind: str = "genuine", ear_present_from_frame: int = 1,
                 pilot: PilotSpec = PilotSpec(), frame_len: int = 2400,
                 truth: str | None = None) -> TrialRecording:
    """Pass ``tx`` through the simulated channel.

    Raises :class:`ClippingError` instead of clipping when any output sample
    leaves [-1, 1].
    """
    if trial_kind not in TRIAL_KINDS:
        raise ParameterError(f"unknown trial kind {trial_kind!r}")
    layout = FrameLayout(pilot=pilot, silence_len=frame_len - 1200)
    x = tx.samples
    n_frames = _frames_in(x.size, layout)
    if not 1 <= ear_present_from_frame <= n_frames:
        raise ParameterError("the first frame must stay ear-free and at least one frame must carry the ear")
    seeds = [seed] if jitter.seed is None else [jitter.seed, seed]
    rng = np.random.default_rng(seeds)

    env_ir = np.zeros(env.direct_delay + max([0, *(d for d, _ in env.static_reflections)]) + 1)
    env_ir[env.direct_delay] += env.direct_gain
    for d, g in env.static_reflections:
        env_ir[env.direct_delay + d] += g

    ear_ir = np.zeros(0)
    if ear is not None:
        shift = env.placement_shift + rng.uniform(-jitter.delay_jitter, jitter.delay_jitter)
        factors = 1 + rng.uniform(-jitter.gain_jitter, jitter.gain_jitter, len(ear.taps))
        rel = ear_impulse_response(ear, shift, factors, env.ear_coupling)
        ear_ir = np.concatenate([np.zeros(env.direct_delay), rel])

    n_out = x.size + max(env_ir.size, ear_ir.size) - 1
    clean = np.zeros(n_out)
    clean[:x.size + env_ir.size - 1] += np.convolve(x, env_ir)
    ear_part = np.zeros(n_out)
    if ear_ir.size:
        gated = x.copy()
        gated[:layout.frame_start(ear_present_from_frame)] = 0.0
        ear_part[:x.size + ear_ir.size - 1] = np.convolve(gated, ear_ir)
    clean += ear_part
    y = clean + _noise(env.noise_kind, n_out, rng, clean, env.snr_db)
    peak = np.max(np.abs(y))
    if peak > 1.0:
        raise ClippingError(f"channel output peaks at {peak:.3f}; lower the gains")
    subject = truth if truth is not None else (ear.subject_id if ear is not None else "none")
    return TrialRecording(SensingWaveform(y, tx.sample_rate), subject, trial_kind,
                          ear_present_from_frame, n_frames, ear_part)


def render_mimicry_trial(tx: SensingWaveform, victim_env: EnvironmentProfile, attacker_ear: EarProfile,
                         seed: int = 0, jitter: PlacementJitter = PlacementJitter(), **kw) -> TrialRecording:
    """Attacker's own ear held the way the victim holds the phone."""
    return render_trial(tx, attacker_ear, victim_env, jitter, seed, trial_kind="mimicry", **kw)
