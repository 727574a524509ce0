"""Arbitrary-length translation: chunk, run G per chunk, rejoin, resynthesize."""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np
import torch

from .chunker import ChunkConfig, chunk_sequence, unchunk
from .dsp import (DspConfig, MelSpectrogram, NormalizationStats, Waveform, mel_project, n_frames,
                  spectrogram_to_waveform, stft, to_log_normalized)

ChunkFn = Callable[[np.ndarray], np.ndarray]


def generator_fn(g: torch.nn.Module, batch_size: int = 64) -> ChunkFn:
    """Wrap a generator as ``(n, M, L/2) float array -> same-shape array`` in eval mode."""
    def run(chunks: np.ndarray) -> np.ndarray:
        g.eval()
        outs = []
        with torch.no_grad():
            for i in range(0, len(chunks), batch_size):
                x = torch.from_numpy(np.ascontiguousarray(chunks[i:i + batch_size], dtype=np.float32))
                outs.append(g(x).numpy())
        return np.concatenate(outs)
    return run


def translate_spectrogram(values: np.ndarray, translate: ChunkFn, chunk_cfg: ChunkConfig) -> np.ndarray:
    """Translate an ``M x t`` spectrogram of any width; output width equals ``t``."""
    seq = chunk_sequence(values, chunk_cfg)
    out = translate(np.stack(seq.chunks))
    if out.shape != (len(seq.chunks),) + seq.chunks[0].shape:
        raise ValueError(f"translator returned shape {out.shape}")
    seq.chunks = list(out)
    return unchunk(seq)


def analyze(w: Waveform, stats: NormalizationStats, config: DspConfig) -> MelSpectrogram:
    """Normalized mel spectrogram of ``ceil(len/hop)`` frames, also for sub-window inputs."""
    frames = n_frames(len(w), config.hop_size)
    x = w.samples
    if len(x) < config.window_size:
        x = np.pad(x, (0, config.window_size - len(x)))
    mel = mel_project(stft(Waveform(x, w.sample_rate), config), config)[:, :frames]
    return to_log_normalized(mel, stats, config)


def convert_waveform(w: Waveform, translate: ChunkFn, stats: NormalizationStats, config: DspConfig,
                     chunk_cfg: ChunkConfig, seed: int = 0):
    """Return ``(output waveform, input spectrogram, translated spectrogram)``."""
    source = analyze(w, stats, config)
    values = translate_spectrogram(source.values, translate, chunk_cfg)
    translated = MelSpectrogram(np.clip(values, -1.0, 1.0), stats, source.config_digest)
    return spectrogram_to_waveform(translated, config, seed=seed), source, translated


def convert_with_state(w: Waveform, state, translate: Optional[ChunkFn] = None, seed: int = 0):
    cfg = state.config
    return convert_waveform(w, translate or generator_fn(state.g), state.stats, cfg.dsp, cfg.chunk, seed)
