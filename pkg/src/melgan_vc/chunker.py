"""Fixed-width crops, half splitting, and padded chunking along the time axis.

Spectrogram matrices are ``(mel_channels, frames)``; time is the last axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

PAD_VALUE = -1.0  # normalized silence


@dataclass(frozen=True)
class ChunkConfig:
    L: int = 96

    def __post_init__(self):
        if self.L < 2 or self.L % 2:
            raise ValueError(f"L must be even and >= 2, got {self.L}")

    @property
    def half(self) -> int:
        return self.L // 2

    @classmethod
    def from_hop_size(cls, hop_size: int) -> "ChunkConfig":
        return cls(L=hop_size // 2)


@dataclass
class TrainingCrop:
    values: np.ndarray
    source_id: int = 0
    offset: int = 0


@dataclass
class ChunkSequence:
    chunks: List[np.ndarray]
    original_frames: int
    pad_frames: int


def _values(spec) -> np.ndarray:
    return spec.values if hasattr(spec, "values") else np.asarray(spec)


def random_crop(spec, cfg: ChunkConfig, rng: np.random.Generator, source_id: int = 0) -> TrainingCrop:
    """Contiguous ``M x L`` slice at a uniformly drawn offset."""
    values = _values(spec)
    t = values.shape[1]
    if t < cfg.L:
        raise ValueError(f"spectrogram has {t} frames, fewer than L={cfg.L}")
    offset = int(rng.integers(0, t - cfg.L + 1))
    return TrainingCrop(values[:, offset:offset + cfg.L], source_id, offset)


def split_crop(crop) -> Tuple[np.ndarray, np.ndarray]:
    values = _values(crop)
    width = values.shape[-1]
    if width % 2:
        raise ValueError(f"cannot split odd width {width}")
    h = width // 2
    return values[..., :h], values[..., h:]


def concat(chunks: Sequence[np.ndarray]) -> np.ndarray:
    if len(chunks) == 0:
        raise ValueError("nothing to concatenate")
    mel = {c.shape[0] for c in chunks}
    if len(mel) != 1:
        raise ValueError(f"mel-channel mismatch among chunks: {sorted(mel)}")
    return np.concatenate(list(chunks), axis=-1)


def chunk_sequence(spec, cfg: ChunkConfig) -> ChunkSequence:
    """Right-pad with silence to a multiple of ``L/2`` and cut into chunks."""
    values = _values(spec)
    t = values.shape[1]
    if t < 1:
        raise ValueError("empty spectrogram")
    h = cfg.half
    pad = -t % h
    padded = np.pad(values, ((0, 0), (0, pad)), constant_values=PAD_VALUE)
    chunks = [padded[:, i:i + h] for i in range(0, t + pad, h)]
    return ChunkSequence(chunks, t, pad)


def unchunk(seq: ChunkSequence) -> np.ndarray:
    if not seq.chunks:
        raise ValueError("empty chunk sequence")
    h = seq.chunks[0].shape[1]
    if (any(c.shape[1] != h for c in seq.chunks) or not 0 <= seq.pad_frames < h
            or len(seq.chunks) * h != seq.original_frames + seq.pad_frames):
        raise ValueError("inconsistent chunk sequence metadata")
    return concat(seq.chunks)[:, :seq.original_frames]
