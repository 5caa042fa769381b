import numpy as np
import pytest

from hmds import audio
from hmds.audio import (
    Chromagram,
    Spectrogram,
    WarpPath,
    apply_warp,
    chromagram,
    dtw_align,
    dynamics_curve,
    flatness_curve,
    pitch_classes,
    resample_curve,
    stft,
    tempo_curve,
    warp_derivative,
)

FS = 8000


def tone(freq, duration=1.0, fs=FS):
    t = np.arange(int(fs * duration)) / fs
    return np.sin(2 * np.pi * freq * t)


def chirp(f0, f1, duration, fs=FS):
    """Exponential glissando; chroma direction changes continuously."""
    t = np.arange(int(fs * duration)) / fs
    k = np.log(f1 / f0) / duration
    phase = 2 * np.pi * f0 * (np.exp(k * t) - 1.0) / k
    return np.sin(phase) + 0.4 * np.sin(2 * phase)


class TestStft:
    def test_pure_tone_concentrates_in_its_bin(self):
        s = stft(tone(440.0, 2.0), FS, freq_res=5.0, time_res=0.1)
        target = np.argmin(np.abs(s.freq_bins - 440.0))
        for t in range(s.n_frames):
            col = s.mag[:, t]
            near = col[max(0, target - 2) : target + 3].sum()
            assert near / col.sum() > 0.99
        assert s.freq_bins[target] == pytest.approx(440.0)

    def test_silence_gives_zero_magnitudes(self):
        s = stft(np.zeros(FS), FS, freq_res=10.0, time_res=0.1)
        assert np.all(s.mag == 0.0)

    def test_white_noise_bins_near_uniform(self):
        # interior |rfft| bins of white noise are iid Rayleigh; the bin means
        # over T frames deviate from their common mean by ~0.52/sqrt(T)
        rng = np.random.default_rng(0)
        sig = rng.standard_normal(int(FS * 20.48))
        s = stft(sig, FS, freq_res=40.0, time_res=0.01)
        means = s.mag[1:-1].mean(axis=1)
        t = s.n_frames
        rel = np.abs(means / means.mean() - 1.0)
        assert rel.max() < 6 * 0.523 / np.sqrt(t)

    def test_short_signal_rejected(self):
        with pytest.raises(ValueError, match="shorter than one analysis window"):
            stft(np.zeros(100), FS, freq_res=5.0, time_res=0.1)

    def test_window_and_hop_geometry(self):
        s = stft(np.ones(FS), FS, freq_res=5.0, time_res=0.1)
        # bin spacing equals the requested frequency resolution
        assert s.freq_bins[1] - s.freq_bins[0] == pytest.approx(5.0)
        assert s.frame_times[1] - s.frame_times[0] == pytest.approx(0.1)

    def test_stereo_downmixed(self):
        sig = np.stack([tone(440.0), tone(440.0)], axis=1)
        s = stft(sig, FS, freq_res=10.0, time_res=0.1)
        mono = stft(tone(440.0), FS, freq_res=10.0, time_res=0.1)
        np.testing.assert_allclose(s.mag, mono.mag, atol=1e-12)


class TestChromagram:
    def test_440_maps_to_class_a(self):
        ch = chromagram(stft(tone(440.0, 2.0), FS, freq_res=5.0, time_res=0.1))
        energy = ch.chroma.sum(axis=1)
        assert energy[0] / energy.sum() > 0.99  # class 0 is A at the 440 Hz reference

    def test_octave_equivalence(self):
        ch = chromagram(stft(tone(880.0, 2.0), FS, freq_res=5.0, time_res=0.1))
        energy = ch.chroma.sum(axis=1)
        assert np.argmax(energy) == 0

    def test_two_tone_split(self):
        # C4 (261.6) and G4 (392): classes 3 and 10 relative to A = 0
        sig = tone(261.6, 2.0) + tone(392.0, 2.0)
        ch = chromagram(stft(sig, FS, freq_res=5.0, time_res=0.1))
        energy = ch.chroma.sum(axis=1)
        # off-bin tones leak a little magnitude into sidelobes; the two target
        # classes must still dominate and share the energy roughly equally
        assert set(np.argsort(energy)[-2:]) == {3, 10}
        assert (energy[3] + energy[10]) / energy.sum() > 0.9
        assert energy[3] == pytest.approx(energy[10], rel=0.1)

    def test_pitch_class_formula(self):
        classes = pitch_classes(np.array([440.0, 880.0, 261.6, 392.0, 10.0]))
        np.testing.assert_array_equal(classes, [0, 0, 3, 10, -1])

    def test_energy_conserved_over_included_bins(self):
        s = stft(tone(440.0) + 0.3 * tone(700.0), FS, freq_res=5.0, time_res=0.1)
        ch = chromagram(s)
        included = s.freq_bins >= 20.0
        np.testing.assert_allclose(ch.chroma.sum(axis=0), s.mag[included].sum(axis=0), rtol=1e-12)


def random_chromagram(rng, n_frames):
    c = rng.gamma(1.0, 1.0, (12, n_frames))
    return Chromagram(chroma=c, frame_times=np.arange(n_frames) * 0.1)


def random_monotone_path(rng, ns, nr):
    """A random valid warp path for cost lower-bound checks."""
    s, r = 0, 0
    pairs = [(0, 0)]
    while (s, r) != (ns - 1, nr - 1):
        moves = []
        if s < ns - 1 and r < nr - 1:
            moves.append((1, 1))
        if s < ns - 1:
            moves.append((1, 0))
        if r < nr - 1:
            moves.append((0, 1))
        ds, dr = moves[rng.integers(len(moves))]
        s, r = s + ds, r + dr
        pairs.append((s, r))
    return np.asarray(pairs)


def path_cost(src, ref, pairs):
    cost = 0.0
    for s, r in pairs:
        a, b = src.chroma[:, s], ref.chroma[:, r]
        cost += 1.0 - float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
    return cost


class TestDtw:
    def test_self_alignment_is_identity_diagonal(self):
        rng = np.random.default_rng(1)
        ch = random_chromagram(rng, 40)
        path = dtw_align(ch, ch)
        assert path.cost == pytest.approx(0.0, abs=1e-9)
        np.testing.assert_array_equal(path.pairs[:, 0], np.arange(40))
        np.testing.assert_array_equal(path.pairs[:, 1], np.arange(40))

    def test_duplicated_frames_give_half_slope(self):
        rng = np.random.default_rng(2)
        ref = random_chromagram(rng, 30)
        src = Chromagram(chroma=np.repeat(ref.chroma, 2, axis=1),
                         frame_times=np.arange(60) * 0.05)
        path = dtw_align(src, ref)
        v = warp_derivative(path)
        mid = v[5:-5]
        assert abs(mid.mean() - 0.5) < 0.05

    def test_reversed_costs_more_than_self(self):
        rng = np.random.default_rng(3)
        ref = random_chromagram(rng, 25)
        rev = Chromagram(chroma=ref.chroma[:, ::-1], frame_times=ref.frame_times)
        self_cost = dtw_align(ref, ref).cost
        rev_cost = dtw_align(rev, ref).cost
        assert rev_cost > self_cost + 1.0
        # boundary constraints still hold
        path = dtw_align(rev, ref)
        assert tuple(path.pairs[0]) == (0, 0)
        assert tuple(path.pairs[-1]) == (24, 24)

    def test_optimal_cost_is_lower_bound(self):
        rng = np.random.default_rng(4)
        src = random_chromagram(rng, 12)
        ref = random_chromagram(rng, 15)
        best = dtw_align(src, ref)
        assert best.cost == pytest.approx(path_cost(src, ref, best.pairs), rel=1e-9)
        for _ in range(50):
            pairs = random_monotone_path(rng, 12, 15)
            assert path_cost(src, ref, pairs) >= best.cost - 1e-9

    def test_path_steps_valid(self):
        rng = np.random.default_rng(5)
        path = dtw_align(random_chromagram(rng, 20), random_chromagram(rng, 31))
        steps = np.diff(path.pairs, axis=0)
        assert np.all(steps >= 0) and np.all(steps <= 1)
        assert np.all(steps.sum(axis=1) >= 1)

    def test_empty_rejected(self):
        rng = np.random.default_rng(6)
        empty = Chromagram(chroma=np.zeros((12, 0)), frame_times=np.zeros(0))
        with pytest.raises(ValueError, match="empty"):
            dtw_align(empty, random_chromagram(rng, 5))


class TestCurves:
    def test_identity_warp_gives_exact_uniform_tempo(self):
        pairs = np.stack([np.arange(50), np.arange(50)], axis=1)
        curve = tempo_curve(WarpPath(pairs=pairs, cost=0.0), 32)
        np.testing.assert_array_equal(curve, np.full(32, 1.0 / 32))

    def test_piecewise_slope_ratio(self):
        # reference advances 2 per source frame in the first half, 1 per frame after;
        # first-half derivative values must be twice the second-half values
        pairs = [(0, 0)]
        for s in range(1, 40):
            ref = 2 * s if s < 20 else 38 + (s - 19)
            prev = pairs[-1][1]
            pairs.append((s, prev + 1))  # diagonal step
            for rr in range(prev + 2, ref + 1):
                pairs.append((s, rr))  # extra reference-advance steps
        w = WarpPath(pairs=np.asarray(pairs), cost=0.0)
        v = warp_derivative(w, smooth_width=1)
        first, second = v[2:18], v[22:38]
        assert np.all(first == 2.0)
        assert np.all(second == 1.0)

    def test_tempo_curve_contract(self):
        pairs = np.stack([np.arange(10), np.arange(10)], axis=1)
        curve = tempo_curve(WarpPath(pairs=pairs, cost=0.0), 4)
        assert curve.shape == (4,)
        assert curve.sum() == pytest.approx(1.0, abs=1e-12)

    def test_dynamics_constant(self):
        ch = Chromagram(chroma=np.full((12, 30), 2.0), frame_times=np.arange(30) * 0.1)
        curve = dynamics_curve(ch, 16)
        np.testing.assert_allclose(curve, 1.0 / 16, rtol=1e-12)

    def test_dynamics_scale_invariance(self):
        rng = np.random.default_rng(7)
        c = rng.gamma(2.0, 1.0, (12, 40))
        a = dynamics_curve(Chromagram(chroma=c, frame_times=np.arange(40.0)), 32)
        b = dynamics_curve(Chromagram(chroma=3.7 * c, frame_times=np.arange(40.0)), 32)
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_dynamics_loud_frame(self):
        c = np.ones((12, 20))
        c[:, 7] = 2.0
        curve = dynamics_curve(Chromagram(chroma=c, frame_times=np.arange(20.0)), 20)
        ratio = curve[7] / curve[0]
        assert ratio == pytest.approx(2.0, rel=0.05)

    def test_dynamics_silent_recording(self):
        ch = Chromagram(chroma=np.zeros((12, 10)), frame_times=np.arange(10.0))
        with pytest.raises(ValueError, match="silent recording"):
            dynamics_curve(ch, 8)

    def test_flatness_values(self):
        mag = np.zeros((4, 3))
        mag[:, 0] = 1.0                      # uniform: flatness 1
        mag[0, 1] = 4.0                      # single bin: flatness ~ 0
        mag[:, 2] = [1.0, 1.0, 4.0, 4.0]     # gm/am = 2/2.5 = 0.8
        s = Spectrogram(freq_bins=np.arange(1, 5) * 100.0, frame_times=np.arange(3) * 0.1, mag=mag)
        curve = flatness_curve(s, 3)
        raw = curve / curve.sum()
        flat = raw / raw[0]  # frame 0 has flatness exactly 1
        assert flat[1] < 1e-3
        assert flat[2] == pytest.approx(0.8, rel=1e-12)

    def test_resample_identity(self):
        v = np.array([0.1, 0.2, 0.3, 0.4])
        np.testing.assert_allclose(resample_curve(v, 4), v, rtol=1e-12)

    def test_resample_constant(self):
        np.testing.assert_allclose(resample_curve(np.full(7, 3.0), 5), 1.0 / 5, rtol=1e-12)

    def test_resample_ramp_preserves_endpoint_ratio(self):
        ramp = np.arange(1.0, 11.0)
        out = resample_curve(ramp, 25)
        assert out[0] / out[-1] == pytest.approx(ramp[0] / ramp[-1], rel=1e-12)

    def test_curves_sum_to_one_and_nonnegative(self):
        rng = np.random.default_rng(8)
        for grid in (16, 301, 1024):
            c = rng.gamma(1.5, 1.0, (12, 57))
            curve = dynamics_curve(Chromagram(chroma=c, frame_times=np.arange(57.0)), grid)
            assert curve.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(curve >= 0)


class TestWarpApplication:
    def test_apply_warp_identity(self):
        rng = np.random.default_rng(9)
        ch = random_chromagram(rng, 25)
        path = dtw_align(ch, ch)
        out = apply_warp(ch, path, ch.frame_times)
        np.testing.assert_array_equal(out.chroma, ch.chroma)

    def test_apply_warp_spectrogram_columns(self):
        rng = np.random.default_rng(10)
        ref = random_chromagram(rng, 20)
        src = Chromagram(chroma=np.repeat(ref.chroma, 2, axis=1), frame_times=np.arange(40.0))
        path = dtw_align(src, ref)
        spec = Spectrogram(freq_bins=np.arange(1, 4) * 100.0, frame_times=np.arange(40.0),
                           mag=np.tile(np.arange(40.0), (3, 1)))
        warped = apply_warp(spec, path, ref.frame_times)
        assert warped.mag.shape == (3, 20)


class TestIO:
    def test_chromagram_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(11)
        ch = random_chromagram(rng, 17)
        audio.write_chromagram_csv(ch, tmp_path / "c.csv")
        back = audio.read_chromagram_csv(tmp_path / "c.csv")
        np.testing.assert_array_equal(back.chroma, ch.chroma)
        np.testing.assert_array_equal(back.frame_times, ch.frame_times)

    def test_chromagram_csv_shape_errors(self, tmp_path):
        (tmp_path / "bad.csv").write_text("0.0,0.1\n1.0,2.0\n")
        with pytest.raises(ValueError, match="13 rows"):
            audio.read_chromagram_csv(tmp_path / "bad.csv")

    def test_curve_csv_round_trip(self, tmp_path):
        curve = resample_curve(np.random.default_rng(12).gamma(2, 1, 50), 64)
        audio.write_curve_csv(curve, tmp_path / "c.csv")
        np.testing.assert_array_equal(audio.read_curve_csv(tmp_path / "c.csv"), curve)

    def test_wav_round_trip(self, tmp_path):
        sig = 0.5 * tone(440.0, 0.25)
        audio.save_wav(tmp_path / "t.wav", sig, FS)
        back, rate = audio.load_wav(tmp_path / "t.wav")
        assert rate == FS
        np.testing.assert_allclose(back, sig, atol=1e-6)


class TestEndToEnd:
    def test_extract_curves_shapes(self):
        sig = chirp(220.0, 660.0, 4.0)
        spec = stft(sig, FS, freq_res=10.0, time_res=0.1)
        ref = chromagram(spec)
        curves = audio.extract_curves(sig, FS, ref, freq_res=10.0, time_res=0.1, grid_size=128)
        for name in ("tempo", "dynamics", "timbre"):
            assert curves[name].shape == (128,)
            assert curves[name].sum() == pytest.approx(1.0, abs=1e-12)
        # self-alignment: tempo must be uniform
        np.testing.assert_allclose(curves["tempo"], 1.0 / 128, rtol=1e-9)
