"""Align and denoise recorded echoes.

Coarse synchronization finds the pilot preamble, the recording is cut into
50 ms frames, and a matched filter locates each chirp inside its frame. The
resulting 1200-sample segments are band-passed and turned into magnitude and
phase spectrograms, from which the first (ear-free) segment is subtracted.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from . import SAMPLE_RATE
from .errors import ParameterError, PilotNotFoundError, TruncationError
from .signals import FrameLayout, SensingWaveform, generate_chirp, generate_pilot

N_FFT = 256
HOP = 6
SEGMENT_LEN = 1200
PHASE_WRAP_MODES = ("none", "angular")


def _samples(x) -> np.ndarray:
    if isinstance(x, SensingWaveform):
        return x.samples
    return np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class SyncedSegment:
    samples: np.ndarray
    frame_index: int
    fine_offset: int
    padded: bool = False

    def __post_init__(self):
        if self.samples.shape != (SEGMENT_LEN,):
            raise ParameterError(f"segment must hold {SEGMENT_LEN} samples, got {self.samples.shape}")


@dataclass(frozen=True)
class CorrelationResult:
    values: np.ndarray
    peak_index: int


@dataclass(frozen=True)
class SpectrogramPair:
    magnitude: np.ndarray
    phase: np.ndarray

    @property
    def shape(self):
        return self.magnitude.shape


@dataclass(frozen=True)
class DiffSpectrogramRaw:
    magnitude_diff: np.ndarray
    phase_diff: np.ndarray

    @property
    def shape(self):
        return self.magnitude_diff.shape


def normalized_xcorr(recording, template) -> np.ndarray:
    """Pearson-style correlation of ``template`` against every window of ``recording``.

    Entry ``k`` compares ``recording[k:k + len(template)]`` with the template,
    so a perfect copy scores 1 regardless of its gain.
    """
    r = _samples(recording)
    p = _samples(template)
    n = p.size
    num = signal.correlate(r, p, mode="valid", method="fft")
    energy = np.concatenate([[0.0], np.cumsum(r * r)])
    win = energy[n:] - energy[:-n]
    denom = np.linalg.norm(p) * np.sqrt(np.clip(win, 0.0, None))
    out = np.zeros_like(num)
    ok = denom > 1e-12 * max(1.0, np.linalg.norm(p))
    out[ok] = num[ok] / denom[ok]
    return out


def coarse_sync(recording, pilot=None, threshold: float = 0.5) -> int:
    """Index where the sensing sequence starts (just after the detected pilot)."""
    r = _samples(recording)
    p = _samples(pilot if pilot is not None else generate_pilot())
    if r.size <= p.size:
        raise ParameterError("recording is not longer than the pilot")
    ncc = normalized_xcorr(r, p)
    peak = int(np.argmax(ncc))
    if ncc[peak] < threshold:
        raise PilotNotFoundError(
            f"best pilot correlation {ncc[peak]:.3f} is below threshold {threshold}"
        )
    return peak + p.size


def segment(recording, start_index: int, n_frames: int, frame_len: int = 2400) -> list:
    """Cut ``n_frames`` consecutive frames starting at ``start_index``."""
    r = _samples(recording)
    if start_index < 0:
        raise ParameterError("start index must be nonnegative")
    available = max(0, (r.size - start_index) // frame_len)
    frames = [r[start_index + k * frame_len:start_index + (k + 1) * frame_len].copy()
              for k in range(min(n_frames, available))]
    if available < n_frames:
        raise TruncationError(
            f"recording holds {available} of {n_frames} frames after index {start_index}", frames
        )
    return frames


def matched_filter(frame, template) -> CorrelationResult:
    """|R_xy| over every lag of the frame; lags near the end see zero padding.

    Uses direct summation so equal peaks compare exactly and the earliest wins.
    """
    y = _samples(frame)
    x = _samples(template)
    padded = np.concatenate([y, np.zeros(x.size - 1)])
    values = np.abs(np.correlate(padded, x, mode="valid"))
    return CorrelationResult(values, int(np.argmax(values)))


def fine_sync(frame, template=None, frame_index: int = 0) -> SyncedSegment:
    y = _samples(frame)
    x = _samples(template if template is not None else generate_chirp())
    peak = matched_filter(y, x).peak_index
    seg = y[peak:peak + x.size]
    padded = seg.size < x.size
    if padded:
        seg = np.concatenate([seg, np.zeros(x.size - seg.size)])
    return SyncedSegment(seg.copy(), frame_index, peak, padded)


@lru_cache(maxsize=16)
def butter_bandpass(order: int = 5, low: float = 17000.0, high: float = 23000.0,
                    sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    return signal.butter(order, [low, high], btype="bandpass", fs=sample_rate, output="sos")


def bandpass(waveform, order: int = 5, band=(17000.0, 23000.0), sample_rate: int = SAMPLE_RATE):
    """Causal (forward-only) Butterworth band-pass; returns a float array."""
    if isinstance(waveform, SensingWaveform):
        sample_rate = waveform.sample_rate
    if sample_rate != SAMPLE_RATE:
        raise ParameterError(f"band-pass is designed for {SAMPLE_RATE} Hz input")
    sos = butter_bandpass(order, float(band[0]), float(band[1]), sample_rate)
    return signal.sosfilt(sos, _samples(waveform))


def stft_pair(segment, n_fft: int = N_FFT, hop: int = HOP) -> SpectrogramPair:
    """One-sided STFT magnitude and principal phase, Hamming window, no padding."""
    x = segment.samples if isinstance(segment, SyncedSegment) else _samples(segment)
    if x.size < n_fft:
        raise ParameterError(f"segment shorter than the {n_fft}-point window")
    frames = sliding_window_view(x, n_fft)[::hop]
    spec = np.fft.rfft(frames * np.hamming(n_fft), axis=1).T
    phase = np.angle(spec)
    phase[phase <= -np.pi] = np.pi
    return SpectrogramPair(np.abs(spec), phase)


def mpss(spec_s: SpectrogramPair, spec_r: SpectrogramPair, phase_wrap: str = "none") -> DiffSpectrogramRaw:
    """Magnitude-phase spectrogram subtraction against a reference segment.

    ``phase_wrap="none"`` keeps the literal |phi_s - phi_r| in [0, 2*pi);
    ``"angular"`` folds it onto the circle distance in [0, pi].
    """
    if spec_s.shape != spec_r.shape or spec_s.phase.shape != spec_r.phase.shape:
        raise ParameterError(f"spectrogram shapes differ: {spec_s.shape} vs {spec_r.shape}")
    if phase_wrap not in PHASE_WRAP_MODES:
        raise ParameterError(f"unknown phase wrap mode {phase_wrap!r}")
    mag = np.abs(spec_s.magnitude - spec_r.magnitude)
    phase = np.abs(spec_s.phase - spec_r.phase)
    if phase_wrap == "angular":
        phase = np.minimum(phase, 2 * np.pi - phase)
    return DiffSpectrogramRaw(mag, phase)


@dataclass(frozen=True)
class Preprocessor:
    """Recording -> synced segments -> differential spectrograms."""

    layout: FrameLayout = FrameLayout()
    filter_order: int = 5
    phase_wrap: str = "none"
    pilot_threshold: float = 0.5
    reference_frame: int = 0

    def templates(self):
        return generate_pilot(self.layout.pilot), generate_chirp(self.layout.chirp)

    def segments(self, recording) -> list:
        pilot, chirp = self.templates()
        start = coarse_sync(recording, pilot, self.pilot_threshold)
        frames = segment(recording, start, self.layout.n_frames, self.layout.frame_len)
        return [fine_sync(f, chirp, k) for k, f in enumerate(frames)]

    def spectrogram(self, seg: SyncedSegment) -> SpectrogramPair:
        return stft_pair(bandpass(seg.samples, self.filter_order))

    def diff_spectrograms(self, recording, frames=None) -> list:
        """Differential spectrograms of every non-reference frame (or ``frames``)."""
        segs = self.segments(recording)
        ref = self.spectrogram(segs[self.reference_frame])
        if frames is None:
            frames = [k for k in range(len(segs)) if k != self.reference_frame]
        return [mpss(self.spectrogram(segs[k]), ref, self.phase_wrap) for k in frames]
