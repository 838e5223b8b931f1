import numpy as np
import pytest

from scrauth.earsim import (
    EarProfile, EnvironmentProfile, PlacementJitter, PopulationConfig, band_power, ear_impulse_response,
    fractional_delay, habitual_environment, make_population, profile_distance, render_mimicry_trial,
    render_trial,
)
from scrauth.errors import ClippingError, GenerationError, ParameterError
from scrauth.preprocess import Preprocessor
from scrauth.signals import FrameLayout, assemble_sensing_sequence

LAYOUT = FrameLayout(n_frames=3)
TX = assemble_sensing_sequence(LAYOUT)
EAR = EarProfile("x", ((10.0, 0.4), (25.0, -0.3), (40.0, 0.2)))
QUIET = EnvironmentProfile(noise_kind="none")
STILL = PlacementJitter(0.0, 0.0)


def test_profile_validation():
    with pytest.raises(ParameterError):
        EarProfile("x", ((10, 0.4), (20, 0.3)))  # too few taps
    with pytest.raises(ParameterError):
        EarProfile("x", ((10, 0.4), (9, 0.3), (30, 0.1)))
    with pytest.raises(ParameterError):
        EarProfile("x", ((10, 0.6), (20, 0.3), (30, 0.3)))  # sum > 1
    with pytest.raises(ParameterError):
        EarProfile("x", ((2, 0.1), (20, 0.3), (30, 0.3)))
    with pytest.raises(ParameterError):
        EnvironmentProfile(static_reflections=((90, 0.6),))


def test_profile_dict_round_trip():
    assert EarProfile.from_dict(EAR.to_dict()) == EAR
    env = habitual_environment(EnvironmentProfile(), 3)
    assert EnvironmentProfile.from_dict(env.to_dict()) == env


def test_fractional_delay_integer_is_impulse():
    start, taps = fractional_delay(12.0)
    k = np.zeros(40)
    k[start:start + taps.size] = taps
    expect = np.zeros(40)
    expect[12] = 1
    np.testing.assert_allclose(k, expect, atol=1e-12)


def test_fractional_delay_centroid():
    start, taps = fractional_delay(20.3)
    n = np.arange(start, start + taps.size)
    assert np.sum(n * taps) / np.sum(taps) == pytest.approx(20.3, abs=0.05)


def test_ear_ir_is_causal_and_scaled():
    h = ear_impulse_response(EAR)
    np.testing.assert_allclose(ear_impulse_response(EAR, coupling=0.5), 0.5 * h)
    with pytest.raises(ParameterError):
        ear_impulse_response(EAR, shift=-10)


def test_no_ear_frames_after_silence_are_identical():
    # frame 0 also carries the pilot's reflection tail, so compare frames 1 and 2
    rec = render_trial(TX, None, QUIET, STILL, seed=0)
    pre = Preprocessor(layout=LAYOUT, reference_frame=1)
    (d,) = pre.diff_spectrograms(rec.waveform, frames=[2])
    assert np.max(d.magnitude_diff) < 1e-9


def test_ear_echo_only_after_gate():
    rec = render_trial(TX, EAR, QUIET, STILL, seed=0, ear_present_from_frame=1)
    gate = LAYOUT.frame_start(1)
    assert np.all(rec.ear_signal[:gate] == 0)
    assert np.any(rec.ear_signal[gate:] != 0)
    assert rec.n_frames == 3 and rec.truth == "x"


def test_ear_present_from_zero_rejected():
    with pytest.raises(ParameterError):
        render_trial(TX, EAR, QUIET, STILL, ear_present_from_frame=0)


def test_white_noise_hits_in_band_snr():
    env = EnvironmentProfile(snr_db=20)
    clean = render_trial(TX, EAR, QUIET, STILL, seed=4).waveform.samples
    noisy = render_trial(TX, EAR, env, STILL, seed=4).waveform.samples
    snr = 10 * np.log10(band_power(clean) / band_power(noisy - clean))
    assert snr == pytest.approx(20, abs=0.01)


def test_babble_surrogate_is_lowpassed():
    env = EnvironmentProfile(noise_kind="recorded-babble-surrogate", snr_db=20)
    clean = render_trial(TX, EAR, QUIET, STILL, seed=4).waveform.samples
    n = render_trial(TX, EAR, env, STILL, seed=4).waveform.samples - clean
    assert band_power(n) < 0.01 * np.mean(n**2)
    assert 10 * np.log10(np.mean(clean**2) / np.mean(n**2)) == pytest.approx(20, abs=0.01)


def test_clipping_raises():
    with pytest.raises(ClippingError):
        render_trial(TX, EAR, EnvironmentProfile(direct_gain=0.95, noise_kind="none"), STILL)


def test_render_is_deterministic_and_seed_dependent():
    a = render_trial(TX, EAR, EnvironmentProfile(), PlacementJitter(), seed=5).waveform.samples
    b = render_trial(TX, EAR, EnvironmentProfile(), PlacementJitter(), seed=5).waveform.samples
    c = render_trial(TX, EAR, EnvironmentProfile(), PlacementJitter(), seed=6).waveform.samples
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)


def test_mimicry_uses_victim_placement():
    victim_env = habitual_environment(QUIET, 1)
    a = render_mimicry_trial(TX, victim_env, EAR, seed=2, jitter=STILL)
    b = render_trial(TX, EAR, victim_env, STILL, seed=2)
    assert a.trial_kind == "mimicry"
    assert a.waveform.samples.tobytes() == b.waveform.samples.tobytes()


def test_population_is_separated_and_reproducible():
    pop = make_population(12, 3)
    assert [p.subject_id for p in pop] == [f"s{i:03d}" for i in range(12)]
    d = [profile_distance(a, b) for i, a in enumerate(pop) for b in pop[i + 1:]]
    assert min(d) >= PopulationConfig().min_distance
    assert make_population(12, 3) == pop


def test_population_impossible_spacing():
    with pytest.raises(GenerationError):
        make_population(5, 0, PopulationConfig(min_distance=50.0, max_retries=5))


def test_subject_recording_syncs():
    rec = render_trial(TX, EAR, EnvironmentProfile(), PlacementJitter(), seed=1)
    segs = Preprocessor(layout=LAYOUT).segments(rec.waveform)
    # coarse sync already absorbs the direct-path delay
    assert [s.fine_offset for s in segs] == [0, 0, 0]
