"""Analysis and resynthesis of a harmonic tone.

Walks a 1 s tone through the front end: STFT, mel projection, log
normalization, then back through the mel pseudo-inverse and Griffin-Lim.
Prints the spectral-convergence error per iteration and writes both the
original and the resynthesized audio next to this script.

    python demos/dsp_roundtrip.py
"""
from pathlib import Path

import numpy as np

from melgan_vc import dsp
from melgan_vc.dsp import DspConfig, NormalizationStats, Waveform

OUT = Path(__file__).resolve().parent / "out"


def main():
    config = DspConfig()
    t = np.arange(config.sample_rate) / config.sample_rate
    x = sum(np.sin(2 * np.pi * 220.0 * k * t) / k for k in range(1, 6))
    w = Waveform(0.5 * x / np.max(np.abs(x)), config.sample_rate)

    mel = dsp.waveform_to_mel_linear(w, config)
    stats = NormalizationStats(config.min_db, dsp.corpus_ref_db([mel], config))
    m = dsp.to_log_normalized(mel, stats, config)
    print(f"{len(w)} samples -> {m.mel_channels} x {m.frames} normalized mel spectrogram")
    print(f"value range [{m.values.min():.3f}, {m.values.max():.3f}]")

    # Griffin-Lim against the exact linear magnitudes
    errors = []
    dsp.griffin_lim(dsp.stft(w, config), config, seed=0, errors=errors)
    for i in (0, 9, 29, 59):
        print(f"Griffin-Lim iteration {i + 1:2d}: spectral convergence {errors[i]:.4f}")

    # full inverse path from the normalized mel spectrogram
    back = dsp.spectrogram_to_waveform(m, config)
    OUT.mkdir(exist_ok=True)
    dsp.save_audio(OUT / "tone.wav", w)
    dsp.save_audio(OUT / "tone_resynth.wav", back)
    print(f"wrote {OUT / 'tone.wav'} and {OUT / 'tone_resynth.wav'}")


if __name__ == "__main__":
    main()
