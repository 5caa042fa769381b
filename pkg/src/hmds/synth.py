"""Ground-truth generators: model-simulated distance tensors and warped test audio."""

from __future__ import annotations

import numpy as np

from .core import DistanceTensor, ModelState, pair_indices


def generate_tensor(true_state: ModelState, m: int, rng: np.random.Generator) -> DistanceTensor:
    """Simulate a distance tensor from the model at a known state.

    y_ijp ~ Gamma(psi, psi / (tau_p * delta_ij)) independently across pairs
    and replicates, mirrored to a symmetric tensor with zero diagonal.  The
    relative spread of each entry is 1/sqrt(psi).
    """
    if m != true_state.n_replicates:
        raise ValueError(f"m = {m} does not match len(tau) = {true_state.n_replicates}")
    n = true_state.n_entities
    mean = true_state.delta[:, None] * true_state.tau[None, :]  # (n_pairs, M)
    draws = rng.gamma(true_state.psi, mean / true_state.psi)
    iu, ju = pair_indices(n)
    v = np.zeros((n, n, m))
    v[iu, ju, :] = draws
    v[ju, iu, :] = draws
    return DistanceTensor(v)


def synth_melody(
    sample_rate: int,
    n_notes: int,
    note_duration: float,
    rng: np.random.Generator,
    harmonics: int = 3,
) -> np.ndarray:
    """A random equal-temperament melody with a few harmonics per note.

    Gives chromagrams tonal structure so alignment has something to lock onto.
    """
    pitches = 220.0 * 2.0 ** (rng.integers(0, 25, size=n_notes) / 12.0)
    n_samp = int(round(note_duration * sample_rate))
    t = np.arange(n_samp) / sample_rate
    envelope = 0.6 + 0.4 * np.cos(np.linspace(-np.pi / 3, np.pi / 3, n_samp))
    parts = []
    for f0 in pitches:
        note = np.zeros(n_samp)
        for k in range(1, harmonics + 1):
            note += (0.5**k) * np.sin(2.0 * np.pi * k * f0 * t)
        parts.append(note * envelope)
    out = np.concatenate(parts)
    return 0.8 * out / np.max(np.abs(out))


def generate_warped_audio(
    base: np.ndarray,
    sample_rate: int,
    tempo_profile,
    gain_profile,
    rng: np.random.Generator | None = None,
    noise_level: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Time-stretch and re-weight a base signal by piecewise-constant profiles.

    ``tempo_profile`` holds speed factors (2 = twice as fast as the base) for
    equal spans of the base signal; segments should last at least a second so
    the induced warp is coarser than the analysis frame grid.  ``gain_profile``
    is applied over equal spans of the output.  Returns the warped waveform
    together with the true warp: the base sample position of every output
    sample, which is the ground truth any alignment should recover.

    Stretching is plain resampling, so pitch scales with speed; factors that
    are powers of two keep pitch classes fixed (octave equivalence).
    """
    base = np.asarray(base, dtype=np.float64)
    tempo = np.asarray(tempo_profile, dtype=np.float64)
    gain = np.asarray(gain_profile, dtype=np.float64)
    if np.any(tempo <= 0) or np.any(gain <= 0):
        raise ValueError("tempo and gain profiles must be strictly positive")

    bounds = np.linspace(0, len(base), len(tempo) + 1)
    positions = []
    pos = 0.0
    for speed, end in zip(tempo, bounds[1:]):
        if pos >= end:
            continue
        seg = np.arange(pos, end, speed)
        positions.append(seg)
        pos = seg[-1] + speed
    positions = np.concatenate(positions)
    positions = positions[positions <= len(base) - 1]
    out = np.interp(positions, np.arange(len(base)), base)

    seg_len = len(out) / len(gain)
    envelope = gain[np.minimum((np.arange(len(out)) / seg_len).astype(int), len(gain) - 1)]
    out = out * envelope
    if noise_level > 0.0:
        if rng is None:
            raise ValueError("rng required when noise_level > 0")
        out = out + noise_level * rng.standard_normal(len(out))
    return out, positions
