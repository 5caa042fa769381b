"""Audio front end: spectrograms, chromagrams, alignment, and feature curves.

A recording is reduced to three normalized curves over the piece:

* tempo: the local slope of the warping path that aligns the recording's
  chromagram to a reference chromagram (how fast the recording moves through
  the reference),
* dynamics: per-frame chroma magnitude relative to the piece average,
* spectral flatness: geometric over arithmetic mean of the spectrum per
  frame, a timbre proxy (1 for a flat spectrum, near 0 for a pure tone).

Each curve is resampled onto a common grid over normalized time [0, 1] and
normalized to sum to 1, so curves are directly comparable with the Hellinger
distance regardless of recording length.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.io import wavfile

DEFAULT_FREQ_RES = 5.0  # Hz
DEFAULT_TIME_RES = 0.1  # seconds
DEFAULT_GRID = 1024
DEFAULT_REF_PITCH = 440.0
MIN_CHROMA_FREQ = 20.0  # bins below this are dropped from the chroma mapping

PITCH_CLASS_NAMES = ["A", "A#", "B", "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#"]


@dataclasses.dataclass(frozen=True, eq=False)
class Spectrogram:
    """Magnitude spectrogram: mag[f, t] over freq_bins (Hz) and frame_times (s)."""

    freq_bins: np.ndarray
    frame_times: np.ndarray
    mag: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "freq_bins", np.asarray(self.freq_bins, dtype=np.float64))
        object.__setattr__(self, "frame_times", np.asarray(self.frame_times, dtype=np.float64))
        object.__setattr__(self, "mag", np.asarray(self.mag, dtype=np.float64))
        if self.mag.shape != (len(self.freq_bins), len(self.frame_times)):
            raise ValueError("mag must be (n_bins, n_frames)")

    @property
    def n_frames(self) -> int:
        return self.mag.shape[1]


@dataclasses.dataclass(frozen=True, eq=False)
class Chromagram:
    """12 x T pitch-class magnitudes; row q aggregates all octaves of one pitch class."""

    chroma: np.ndarray
    frame_times: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "chroma", np.asarray(self.chroma, dtype=np.float64))
        object.__setattr__(self, "frame_times", np.asarray(self.frame_times, dtype=np.float64))
        if self.chroma.ndim != 2 or self.chroma.shape[0] != 12:
            raise ValueError("chroma must be a (12, n_frames) array")

    @property
    def n_frames(self) -> int:
        return self.chroma.shape[1]


@dataclasses.dataclass(frozen=True, eq=False)
class WarpPath:
    """Monotone alignment path: pairs[k] = (source frame, reference frame).

    Starts at (0, 0), ends at (T_src - 1, T_ref - 1), and each step advances
    at least one coordinate, each by at most 1.  ``cost`` is the accumulated
    per-frame cosine distance along the path.
    """

    pairs: np.ndarray
    cost: float

    def __post_init__(self):
        object.__setattr__(self, "pairs", np.asarray(self.pairs, dtype=np.int64))
        if self.pairs.ndim != 2 or self.pairs.shape[1] != 2:
            raise ValueError("pairs must be a (K, 2) index array")

    @property
    def source_idx(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def reference_idx(self) -> np.ndarray:
        return self.pairs[:, 1]


def _to_mono(signal: np.ndarray) -> np.ndarray:
    signal = np.asarray(signal)
    if signal.ndim == 2:
        signal = signal.mean(axis=1)
    return np.asarray(signal, dtype=np.float64)


def stft(
    signal,
    sample_rate: float,
    freq_res: float = DEFAULT_FREQ_RES,
    time_res: float = DEFAULT_TIME_RES,
) -> Spectrogram:
    """Magnitude short-time Fourier transform (phase discarded).

    Window length is sample_rate / freq_res rounded to the nearest even
    integer, so bin spacing matches the requested frequency resolution; the
    hop is time_res * sample_rate.  A Hann window is applied per frame.
    Stereo input is downmixed by averaging.
    """
    sig = _to_mono(signal)
    win = 2 * int(round(sample_rate / (2.0 * freq_res)))
    if win < 2:
        raise ValueError("frequency resolution too coarse for this sample rate")
    hop = max(int(round(time_res * sample_rate)), 1)
    if len(sig) < win:
        raise ValueError(
            f"signal shorter than one analysis window ({len(sig)} < {win} samples)"
        )
    n_frames = 1 + (len(sig) - win) // hop
    idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = sig[idx] * np.hanning(win)[None, :]
    mag = np.abs(np.fft.rfft(frames, axis=1)).T  # (n_bins, n_frames)
    freq_bins = np.fft.rfftfreq(win, d=1.0 / sample_rate)
    frame_times = (hop * np.arange(n_frames) + win / 2.0) / sample_rate
    return Spectrogram(freq_bins=freq_bins, frame_times=frame_times, mag=mag)


def pitch_classes(freq_bins: np.ndarray, ref_pitch: float = DEFAULT_REF_PITCH) -> np.ndarray:
    """Equal-temperament pitch class per frequency: round(12 log2(f / ref)) mod 12.

    Class 0 is the reference pitch class (A for the default 440 Hz).  Bins
    below the audible floor get class -1 and are excluded from aggregation.
    """
    f = np.asarray(freq_bins, dtype=np.float64)
    classes = np.full(f.shape, -1, dtype=np.int64)
    ok = f >= MIN_CHROMA_FREQ
    classes[ok] = np.mod(np.round(12.0 * np.log2(f[ok] / ref_pitch)).astype(np.int64), 12)
    return classes


def chromagram(s: Spectrogram, ref_pitch: float = DEFAULT_REF_PITCH) -> Chromagram:
    """Aggregate spectrogram magnitude into the 12 octave-equivalent pitch classes."""
    if not ref_pitch > 0:
        raise ValueError("ref_pitch must be positive")
    classes = pitch_classes(s.freq_bins, ref_pitch)
    out = np.zeros((12, s.n_frames))
    for q in range(12):
        sel = classes == q
        if np.any(sel):
            out[q] = s.mag[sel].sum(axis=0)
    return Chromagram(chroma=out, frame_times=s.frame_times)


def _cosine_cost(src: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Pairwise cosine distance between columns; silent frames match silent frames."""
    sn = np.linalg.norm(src, axis=0)
    rn = np.linalg.norm(ref, axis=0)
    zs, zr = sn == 0.0, rn == 0.0
    a = src / np.where(zs, 1.0, sn)[None, :]
    b = ref / np.where(zr, 1.0, rn)[None, :]
    sim = a.T @ b
    if zs.any() or zr.any():
        sim[np.ix_(zs, zr)] = 1.0  # both silent: identical
    return np.clip(1.0 - sim, 0.0, None)


def dtw_align(src: Chromagram, ref: Chromagram) -> WarpPath:
    """Dynamic time warping of a chromagram onto a reference chromagram.

    Minimizes the cumulative cosine distance between chroma columns subject to
    the boundary and monotonicity constraints, with steps {(1,0),(0,1),(1,1)}.
    Ties during backtracking prefer the diagonal step, then the
    reference-advancing step, then the source-advancing step.
    """
    if src.n_frames == 0 or ref.n_frames == 0:
        raise ValueError("cannot align an empty chromagram")
    cost = _cosine_cost(src.chroma, ref.chroma)
    ns, nr = cost.shape
    acc = np.empty((ns, nr))
    acc[0] = np.cumsum(cost[0])
    acc[1:, 0] = acc[0, 0] + np.cumsum(cost[1:, 0])
    for s in range(1, ns):
        row = acc[s]
        prev = acc[s - 1]
        crow = cost[s]
        for r in range(1, nr):
            row[r] = crow[r] + min(prev[r - 1], prev[r], row[r - 1])
    pairs = [(ns - 1, nr - 1)]
    s, r = ns - 1, nr - 1
    while s > 0 or r > 0:
        if s == 0:
            r -= 1
        elif r == 0:
            s -= 1
        else:
            diag, horiz, vert = acc[s - 1, r - 1], acc[s, r - 1], acc[s - 1, r]
            best = min(diag, horiz, vert)
            if diag == best:
                s, r = s - 1, r - 1
            elif horiz == best:
                r -= 1
            else:
                s -= 1
        pairs.append((s, r))
    pairs.reverse()
    return WarpPath(pairs=np.asarray(pairs), cost=float(acc[-1, -1]))


def _first_occurrence(keys: np.ndarray, values: np.ndarray) -> np.ndarray:
    """values[k] at the first occurrence of each distinct key (keys sorted)."""
    _, idx = np.unique(keys, return_index=True)
    return values[idx]


def warp_derivative(w: WarpPath, smooth_width: int = 5) -> np.ndarray:
    """Local tempo ratio along the path: d(reference index)/d(source index).

    Forward differences of the reference coordinate at each source frame,
    smoothed by a centered moving average (the raw differences are integers
    and noisy).  Values above 1 mean the source moves through the reference
    faster than real time; below 1, slower.
    """
    ref_at_src = _first_occurrence(w.source_idx, w.reference_idx)
    if len(ref_at_src) < 2:
        return np.ones(1)
    v = np.diff(ref_at_src).astype(np.float64)
    if smooth_width > 1:
        kernel = np.ones(min(smooth_width, len(v)))
        v = np.convolve(v, kernel, mode="same") / np.convolve(
            np.ones_like(v), kernel, mode="same"
        )
    return v


def resample_curve(values, grid_size: int) -> np.ndarray:
    """Linear interpolation onto a uniform grid over [0, 1], renormalized to sum to 1."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("values must be a nonempty 1-d array")
    if grid_size < 1:
        raise ValueError("grid size must be >= 1")
    if v.size == 1:
        out = np.full(grid_size, v[0])
    else:
        out = np.interp(np.linspace(0.0, 1.0, grid_size), np.linspace(0.0, 1.0, v.size), v)
    total = out.sum()
    if total <= 0:
        raise ValueError("cannot normalize a curve with non-positive mass")
    return out / total


def tempo_curve(w: WarpPath, grid_size: int = DEFAULT_GRID, smooth_width: int = 5) -> np.ndarray:
    """Normalized tempo curve: the warp derivative on normalized source time."""
    return resample_curve(warp_derivative(w, smooth_width), grid_size)


def dynamics_curve(aligned: Chromagram, grid_size: int = DEFAULT_GRID) -> np.ndarray:
    """Normalized dynamics curve: per-frame chroma magnitude over the piece average."""
    frame_mag = aligned.chroma.sum(axis=0)
    avg = frame_mag.mean()
    if avg <= 0:
        raise ValueError("silent recording: dynamics are undefined")
    return resample_curve(frame_mag / avg, grid_size)


def flatness_curve(aligned: Spectrogram, grid_size: int = DEFAULT_GRID) -> np.ndarray:
    """Normalized spectral-flatness curve: geometric over arithmetic mean per frame.

    Magnitudes are floored at the smallest positive normal float before the
    geometric mean, so a single silent bin collapses the flatness toward 0
    instead of producing log(0).
    """
    floored = np.maximum(aligned.mag, np.finfo(np.float64).tiny)
    gm = np.exp(np.mean(np.log(floored), axis=0))
    am = floored.mean(axis=0)
    return resample_curve(gm / am, grid_size)


def apply_warp(obj, w: WarpPath, ref_times: np.ndarray):
    """Re-index a chromagram or spectrogram onto the reference frame grid.

    For each reference frame the first matched source frame is taken, so the
    result has one column per reference frame and carries ``ref_times``.
    """
    src_for_ref = _first_occurrence(w.reference_idx, w.source_idx)
    ref_times = np.asarray(ref_times, dtype=np.float64)
    if len(src_for_ref) != len(ref_times):
        raise ValueError("ref_times length must match the path's reference span")
    if isinstance(obj, Chromagram):
        return Chromagram(chroma=obj.chroma[:, src_for_ref], frame_times=ref_times)
    if isinstance(obj, Spectrogram):
        return Spectrogram(
            freq_bins=obj.freq_bins, frame_times=ref_times, mag=obj.mag[:, src_for_ref]
        )
    raise TypeError("apply_warp expects a Chromagram or Spectrogram")


def extract_curves(
    signal,
    sample_rate: float,
    reference: Chromagram,
    freq_res: float = DEFAULT_FREQ_RES,
    time_res: float = DEFAULT_TIME_RES,
    grid_size: int = DEFAULT_GRID,
    ref_pitch: float = DEFAULT_REF_PITCH,
) -> dict[str, np.ndarray]:
    """Full front end for one recording: returns tempo/dynamics/timbre curves.

    The recording's chromagram is aligned onto the supplied reference
    chromagram; curves from different recordings are comparable only when they
    share the same reference.
    """
    spec = stft(signal, sample_rate, freq_res=freq_res, time_res=time_res)
    chroma = chromagram(spec, ref_pitch=ref_pitch)
    path = dtw_align(chroma, reference)
    aligned_chroma = apply_warp(chroma, path, reference.frame_times)
    aligned_spec = apply_warp(spec, path, reference.frame_times)
    return {
        "tempo": tempo_curve(path, grid_size),
        "dynamics": dynamics_curve(aligned_chroma, grid_size),
        "timbre": flatness_curve(aligned_spec, grid_size),
    }


def load_wav(path) -> tuple[np.ndarray, int]:
    """Read a PCM or float WAV file as a mono float64 signal in [-1, 1]."""
    rate, data = wavfile.read(path)
    data = np.asarray(data)
    if data.dtype == np.int16:
        sig = data / 32768.0
    elif data.dtype == np.int32:
        sig = data / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        sig = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported WAV sample format: {data.dtype}")
    return _to_mono(sig), int(rate)


def save_wav(path, signal, sample_rate: int) -> None:
    """Write a mono float32 WAV file."""
    wavfile.write(path, int(sample_rate), np.asarray(signal, dtype=np.float32))


def write_chromagram_csv(c: Chromagram, path) -> None:
    """CSV layout: header row of frame times, then 12 rows of pitch-class magnitudes."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join("%.16e" % t for t in c.frame_times) + "\n")
        for q in range(12):
            fh.write(",".join("%.16e" % v for v in c.chroma[q]) + "\n")


def read_chromagram_csv(path) -> Chromagram:
    """Read a chromagram written by :func:`write_chromagram_csv`."""
    with open(path, "r", encoding="utf-8") as fh:
        rows = [line.strip() for line in fh if line.strip()]
    if len(rows) != 13:
        raise ValueError(f"expected 13 rows (frame times + 12 pitch classes), got {len(rows)}")
    try:
        times = np.array([float(v) for v in rows[0].split(",")])
        chroma = np.array([[float(v) for v in row.split(",")] for row in rows[1:]])
    except ValueError as exc:
        raise ValueError(f"malformed chromagram CSV: {exc}") from None
    if chroma.shape[1] != times.shape[0]:
        raise ValueError("pitch-class rows must match the frame-time header length")
    return Chromagram(chroma=chroma, frame_times=times)


def write_curve_csv(curve: np.ndarray, path) -> None:
    """Curve CSV: header ``t,value`` with t on the uniform [0, 1] grid."""
    curve = np.asarray(curve, dtype=np.float64)
    grid = np.linspace(0.0, 1.0, curve.size) if curve.size > 1 else np.zeros(1)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,value\n")
        for t, v in zip(grid, curve):
            fh.write(f"{'%.16e' % t},{'%.16e' % v}\n")


def read_curve_csv(path) -> np.ndarray:
    """Read the value column of a curve CSV written by :func:`write_curve_csv`."""
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "t,value":
            raise ValueError(f"expected header 't,value', got {header!r}")
        for ln, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"line {ln}: expected 2 fields")
            values.append(float(parts[1]))
    if not values:
        raise ValueError("curve file holds no values")
    return np.asarray(values)
