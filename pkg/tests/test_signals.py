import numpy as np
import pytest

from oracles import brute_xcorr, dft_band_energy_ratio
from scrauth.errors import ParameterError
from scrauth.signals import (
    ChirpSpec, FrameLayout, PilotSpec, assemble_sensing_sequence, chirp_phase, generate_chirp,
    generate_pilot, taper_envelope,
)

PAPER_CHIRP = ChirpSpec(17000, 23000, 1200, 48000, 120, 1.0)


def inst_freq(spec):
    return np.diff(chirp_phase(spec)) * spec.sample_rate / (2 * np.pi)


def test_chirp_sweeps_17_to_23_khz():
    w = generate_chirp(PAPER_CHIRP)
    assert len(w) == 1200
    f = inst_freq(PAPER_CHIRP)
    assert f[0] == pytest.approx(17000, abs=10)
    assert f[-1] == pytest.approx(23000, abs=10)
    assert np.max(np.abs(w.samples)) == pytest.approx(1.0)


def test_zero_sweep_is_a_sinusoid():
    spec = ChirpSpec(19000, 19000, 480, 48000, 0, 1.0)
    x = generate_chirp(spec).samples
    n = np.arange(480)
    np.testing.assert_allclose(x, np.cos(2 * np.pi * 19000 * n / 48000), atol=1e-12)
    assert np.all(np.abs(x) <= 1)


def test_chirp_band_energy_by_direct_dft():
    x = generate_chirp(PAPER_CHIRP).samples
    assert dft_band_energy_ratio(x, 48000, 17000, 23000) >= 0.95
    # widened band leaves < 5% outside
    assert 1 - dft_band_energy_ratio(x, 48000, 16000, 24000) < 0.05


@pytest.mark.parametrize("spec", [
    ChirpSpec(17000, 25000),
    ChirpSpec(0, 23000),
    ChirpSpec(taper_len=601),
    ChirpSpec(amplitude=1.5),
])
def test_invalid_chirp_specs(spec):
    with pytest.raises(ParameterError):
        generate_chirp(spec)


def test_chirp_is_deterministic():
    a = generate_chirp().samples
    b = generate_chirp().samples
    assert a.tobytes() == b.tobytes()


def test_taper_envelope_symmetric_hamming_halves():
    env = taper_envelope(1200, 120)
    np.testing.assert_allclose(env, env[::-1], atol=1e-9)
    ham = np.hamming(240)
    np.testing.assert_array_equal(env[:120], ham[:120])
    np.testing.assert_array_equal(env[-120:], ham[120:])
    assert np.all(env[120:-120] == 1)


def test_default_amplitude_leaves_headroom():
    assert np.max(np.abs(generate_chirp().samples)) == pytest.approx(0.9)


def test_pilot_lengths():
    assert len(generate_pilot()) == 1500
    assert len(generate_pilot(PilotSpec(n_chirps=1))) == 500


def test_pilot_is_three_untapered_down_chirps():
    p = generate_pilot().samples
    np.testing.assert_array_equal(p[:500], p[500:1000])
    np.testing.assert_array_equal(p[:500], p[1000:])
    spec = PilotSpec().chirp_spec()
    f = inst_freq(spec)
    assert f[0] == pytest.approx(22000, abs=10) and f[-1] == pytest.approx(18000, abs=10)
    assert abs(p[0]) == pytest.approx(0.9)  # no taper on the first sample


def test_pilot_correlation_has_three_peaks_500_apart():
    p = generate_pilot().samples
    r = np.abs(brute_xcorr(p, p[:500]))
    peaks = [0, 500, 1000]
    assert int(np.argmax(r)) == 0
    np.testing.assert_allclose(r[peaks], r[0], rtol=1e-9)
    # everything outside the +-12-sample main lobes is well below the peaks
    away = np.ones(r.size, bool)
    for p0 in peaks:
        away[max(0, p0 - 12):p0 + 13] = False
    assert r[away].max() < 0.5 * r[peaks].min()


def test_sequence_length_and_layout():
    assert len(assemble_sensing_sequence(FrameLayout(n_frames=10))) == 25500
    one = assemble_sensing_sequence(FrameLayout(n_frames=1)).samples
    np.testing.assert_array_equal(one[1500:2700], generate_chirp().samples)


def test_silent_gaps_are_zero():
    layout = FrameLayout(n_frames=20)
    x = assemble_sensing_sequence(layout).samples
    for k in range(20):
        start = layout.frame_start(k) + 1200
        assert np.sum(x[start:start + 1200] ** 2) == 0.0


def test_zero_frames_rejected():
    with pytest.raises(ParameterError):
        assemble_sensing_sequence(FrameLayout(n_frames=0))
