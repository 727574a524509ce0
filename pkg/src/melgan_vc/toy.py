"""Synthetic two-domain corpora: band-limited noise with different spectral envelopes."""
from __future__ import annotations

from typing import List, Sequence, Tuple

import numpy as np

from .dsp import DspConfig, NormalizationStats, Waveform, corpus_ref_db, to_log_normalized, waveform_to_mel_linear

LOW_BAND = (150.0, 1200.0)
HIGH_BAND = (2500.0, 6000.0)


def band_noise(seconds: float, band: Tuple[float, float], rng: np.random.Generator,
               sample_rate: int = 16000, peak: float = 0.5) -> Waveform:
    """White noise shaped by a raised-cosine spectral envelope over ``band``.

    A slow random amplitude modulation keeps clips from being stationary.
    """
    n = int(round(seconds * sample_rate))
    spec = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    lo, hi = band
    inside = (freqs >= lo) & (freqs <= hi)
    env = np.zeros_like(freqs)
    env[inside] = np.sin(np.pi * (freqs[inside] - lo) / (hi - lo)) ** 2
    x = np.fft.irfft(spec * env, n)
    t = np.arange(n) / sample_rate
    x *= 0.6 + 0.4 * np.sin(2 * np.pi * rng.uniform(0.5, 3.0) * t + rng.uniform(0, 2 * np.pi))
    return Waveform(x * (peak / np.max(np.abs(x))), sample_rate)


def make_domains(n_clips: int = 16, seconds: float = 2.0, seed: int = 0,
                 bands: Sequence[Tuple[float, float]] = (LOW_BAND, HIGH_BAND),
                 config: DspConfig | None = None):
    """Normalized spectrograms for each band, sharing one corpus-wide normalization.

    Returns ``(domains, stats)`` where ``domains[k]`` is a list of ``MelSpectrogram``.
    """
    config = config or DspConfig()
    rng = np.random.default_rng(seed)
    linear: List[List[np.ndarray]] = []
    for band in bands:
        clips = [band_noise(seconds, band, rng, config.sample_rate) for _ in range(n_clips)]
        linear.append([waveform_to_mel_linear(w, config) for w in clips])
    stats = NormalizationStats(config.min_db, corpus_ref_db((m for dom in linear for m in dom), config))
    domains = [[to_log_normalized(m, stats, config) for m in dom] for dom in linear]
    return domains, stats
